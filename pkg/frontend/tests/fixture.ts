// A deterministic 30-node garden used by the layout and backend tests.

import type { GardenView, NodeKind, NodeStatus, NodeView } from '../src/types.js';

let nextId = 0;

function node(
  kind: NodeKind,
  parent: number | null,
  childOrder: number,
  text: string,
  extra: Partial<NodeView> = {},
): NodeView {
  nextId += 1;
  return {
    id: nextId,
    kind,
    status: 'Succeeded',
    is_leaf: false,
    assigned_submodule: null,
    text_excerpt: text,
    parent,
    child_order: childOrder,
    ...extra,
  };
}

export function makeFixtureNodes(): NodeView[] {
  nextId = 0;
  const nodes: NodeView[] = [];
  const add = (...args: Parameters<typeof node>): NodeView => {
    const n = node(...args);
    nodes.push(n);
    return n;
  };

  const seed = add('Seed', null, 0, 'a walled garden with a fountain');
  const terrain = add('PlanStep', seed.id, 0, 'shape the terrain');
  const flora = add('PlanStep', seed.id, 1, 'plant the flora');
  const water = add('PlanStep', seed.id, 2, 'build the fountain');

  const ground = add('PlanStep', terrain.id, 0, 'carve ground mesh',
    { is_leaf: true, assigned_submodule: 'procedural_mesh' });
  const walls = add('PlanStep', terrain.id, 1, 'raise the walls',
    { is_leaf: true, assigned_submodule: 'code_generator' });
  add('PlanStep', terrain.id, 2, 'hedge the perimeter',
    { is_leaf: true, assigned_submodule: 'mesh_downloader', status: 'Pending' });

  const beds = add('PlanStep', flora.id, 0, 'lay flower beds');
  const roses = add('PlanStep', beds.id, 0, 'fetch rose bushes',
    { is_leaf: true, assigned_submodule: 'mesh_downloader' });
  const ivy = add('PlanStep', beds.id, 1, 'generate ivy',
    { is_leaf: true, assigned_submodule: 'mesh_generator' });
  const lawn = add('PlanStep', flora.id, 1, 'scatter lawn grass',
    { is_leaf: true, assigned_submodule: 'code_generator' });

  const basin = add('PlanStep', water.id, 0, 'sculpt the basin',
    { is_leaf: true, assigned_submodule: 'procedural_mesh' });
  const jets = add('PlanStep', water.id, 1, 'animate water jets',
    { is_leaf: true, assigned_submodule: 'code_generator' });

  const groundTask = add('Task', ground.id, 0, '[procedural_mesh] ground');
  const groundA1 = add('CodeAttempt', groundTask.id, 0, 'Attempt 1');
  add('Evaluation', groundA1.id, 0, 'Pass');

  const wallsTask = add('Task', walls.id, 0, '[code_generator] walls');
  const wallsA1 = add('CodeAttempt', wallsTask.id, 0, 'Attempt 1',
    { status: 'Failed' });
  const wallsE1 = add('Evaluation', wallsA1.id, 0, 'compile error',
    { status: 'Failed' });
  const wallsA2 = add('CodeAttempt', wallsE1.id, 0, 'Attempt 2');
  add('Evaluation', wallsA2.id, 0, 'Pass');

  const rosesTask = add('Task', roses.id, 0, '[mesh_downloader] roses');
  add('AssetArtifact', rosesTask.id, 0, 'rose bushes');

  const ivyTask = add('Task', ivy.id, 0, '[mesh_generator] ivy',
    { status: 'Failed' });
  add('AssetArtifact', ivyTask.id, 0, 'ivy generation failed',
    { status: 'Failed' });

  const lawnTask = add('Task', lawn.id, 0, '[code_generator] lawn',
    { status: 'InProgress' });
  const lawnA1 = add('CodeAttempt', lawnTask.id, 0, 'Attempt 1',
    { status: 'Failed' });
  add('Evaluation', lawnA1.id, 0, 'too uniform', { status: 'Failed' });

  const basinTask = add('Task', basin.id, 0, '[procedural_mesh] basin',
    { status: 'Pending' });
  const jetsTask = add('Task', jets.id, 0, '[code_generator] jets',
    { status: 'Pending' });
  void basinTask;
  void jetsTask;

  return nodes;
}

export function makeFixtureView(): GardenView {
  const nodes = makeFixtureNodes();
  const inProgress = nodes.find((n) => n.status === 'InProgress');
  return {
    nodes,
    in_progress_node: inProgress ? inProgress.id : null,
    mode: 'Step',
    config: {
      max_depth: 3,
      max_branching: 4,
      max_code_attempts: 3,
      submodules: ['code_generator', 'procedural_mesh', 'mesh_downloader', 'mesh_generator'],
    },
    last_seq: nodes.length,
  };
}

export function fixtureDepth(nodes: NodeView[], id: number): number {
  const byId = new Map(nodes.map((n) => [n.id, n]));
  let depth = 0;
  let cursor = byId.get(id);
  while (cursor && cursor.parent !== null) {
    cursor = byId.get(cursor.parent);
    depth += 1;
  }
  return depth;
}

export function expectedStatus(nodes: NodeView[], id: number): NodeStatus {
  const found = nodes.find((n) => n.id === id);
  if (!found) throw new Error(`fixture has no node ${id}`);
  return found.status;
}

// Canvas layout: the garden fans out left to right. A node's column is its
// depth in the graph, so plan levels line up, tasks sit right of their
// leaves, and implementation chains extend rightward attempt by attempt.
// Rows follow depth-first order, keeping each subtree visually contiguous.

import { LEGEND, nodeColor, type LegendEntry } from './colors.js';
import type { GardenStore } from './store.js';
import type { NodeKind, NodeStatus } from './types.js';

export const COLUMN_WIDTH = 230;
export const ROW_HEIGHT = 64;

export interface CanvasNode {
  id: number;
  kind: NodeKind;
  status: NodeStatus;
  label: string;
  column: number;
  row: number;
  x: number;
  y: number;
  color: string;
  isLeaf: boolean;
  submodule: string | null;
  inProgress: boolean;
  pendingEdit: boolean;
}

export interface CanvasEdge {
  from: number;
  to: number;
}

export interface CanvasModel {
  nodes: CanvasNode[];
  edges: CanvasEdge[];
  legend: LegendEntry[];
  columns: number;
  rows: number;
  mode: string;
}

export function buildCanvasModel(store: GardenStore): CanvasModel {
  const nodes: CanvasNode[] = [];
  const edges: CanvasEdge[] = [];
  const seed = store.seed();
  let columns = 0;
  let row = 0;

  if (seed) {
    // depth-first walk; every visited node takes the next free row
    const stack: Array<{ id: number; column: number }> = [
      { id: seed.id, column: 0 },
    ];
    while (stack.length > 0) {
      const { id, column } = stack.pop()!;
      const node = store.nodes.get(id);
      if (!node || node.status === 'Pruned') continue;
      nodes.push({
        id: node.id,
        kind: node.kind,
        status: node.status,
        label: node.text_excerpt,
        column,
        row,
        x: column * COLUMN_WIDTH,
        y: row * ROW_HEIGHT,
        color: nodeColor(node.kind, node.status),
        isLeaf: node.is_leaf,
        submodule: node.assigned_submodule,
        inProgress: store.inProgress === node.id,
        pendingEdit: store.pendingEdits.has(node.id),
      });
      row += 1;
      columns = Math.max(columns, column + 1);
      if (node.parent !== null) edges.push({ from: node.parent, to: node.id });
      const children = store.children(id);
      for (let i = children.length - 1; i >= 0; i -= 1) {
        stack.push({ id: children[i]!.id, column: column + 1 });
      }
    }
  }

  return {
    nodes,
    edges,
    legend: LEGEND,
    columns,
    rows: row,
    mode: store.mode,
  };
}

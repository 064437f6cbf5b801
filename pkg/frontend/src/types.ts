// Wire types mirroring the backend HTTP interface.

export type NodeKind =
  | 'Seed'
  | 'PlanStep'
  | 'Task'
  | 'CodeAttempt'
  | 'Evaluation'
  | 'AssetArtifact';

export type NodeStatus = 'Pending' | 'InProgress' | 'Succeeded' | 'Failed' | 'Pruned';

export type GardenMode = 'Paused' | 'Step' | 'Play';

export interface NodeView {
  id: number;
  kind: NodeKind;
  status: NodeStatus;
  is_leaf: boolean;
  assigned_submodule: string | null;
  text_excerpt: string;
  parent: number | null;
  child_order: number;
}

export interface GardenView {
  nodes: NodeView[];
  in_progress_node: number | null;
  mode: GardenMode;
  config: {
    max_depth: number;
    max_branching: number;
    max_code_attempts: number;
    submodules: string[];
  };
  last_seq: number;
}

export interface NodeDetail extends Omit<NodeView, 'text_excerpt'> {
  text: string;
  payload: Record<string, unknown>;
  screenshots: string[];
  feedback: string | null;
}

export interface GardenEvent {
  seq: number;
  timestamp: string;
  actor: 'System' | 'User';
  payload: { type: string } & Record<string, unknown>;
}

export interface PatchResult {
  removed: number[];
  backups: string[];
}

// Node coloring. Red, green, and yellow are reserved for implementation
// verdicts; plan structure stays neutral so failures stand out.

import type { NodeKind, NodeStatus } from './types.js';

export const COLOR = {
  plan: '#d7d7d7',
  task: '#7cb3e8',
  inFlight: '#f2d272',
  pass: '#8fd18f',
  fail: '#e88a8a',
} as const;

export interface LegendEntry {
  color: string;
  label: string;
}

export const LEGEND: LegendEntry[] = [
  { color: COLOR.plan, label: 'plan step (seed and sub-steps)' },
  { color: COLOR.task, label: 'task handed to a submodule' },
  { color: COLOR.inFlight, label: 'implementation in flight' },
  { color: COLOR.pass, label: 'implementation succeeded' },
  { color: COLOR.fail, label: 'implementation failed' },
];

const IMPLEMENTATION_KINDS: NodeKind[] = ['CodeAttempt', 'Evaluation', 'AssetArtifact'];

export function nodeColor(kind: NodeKind, status: NodeStatus): string {
  if (kind === 'Seed' || kind === 'PlanStep') return COLOR.plan;
  if (kind === 'Task') return COLOR.task;
  if (IMPLEMENTATION_KINDS.includes(kind)) {
    if (status === 'Succeeded') return COLOR.pass;
    if (status === 'Failed') return COLOR.fail;
    return COLOR.inFlight;
  }
  return COLOR.plan;
}

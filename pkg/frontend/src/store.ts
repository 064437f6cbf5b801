// Garden state as a pure reduction of (snapshot, event stream). Reloading
// the page and replaying the same inputs reproduces the same store.

import type { GardenEvent, GardenMode, GardenView, NodeView } from './types.js';

export interface BackupNotice {
  backupId: string;
  removed: number[];
  edit: string;
}

export class GardenStore {
  nodes = new Map<number, NodeView>();
  mode: GardenMode = 'Paused';
  inProgress: number | null = null;
  lastSeq = 0;
  lastBackup: BackupNotice | null = null;
  /** node ids optimistically marked pending until the stream confirms */
  pendingEdits = new Set<number>();

  applySnapshot(view: GardenView): void {
    this.nodes.clear();
    for (const node of view.nodes) this.nodes.set(node.id, node);
    this.mode = view.mode;
    this.inProgress = view.in_progress_node;
    this.lastSeq = view.last_seq;
  }

  markPending(nodeId: number): void {
    this.pendingEdits.add(nodeId);
  }

  applyEvent(event: GardenEvent): void {
    if (event.seq <= this.lastSeq) return; // duplicate after a reconnect
    this.lastSeq = event.seq;
    const payload = event.payload;
    switch (payload.type) {
      case 'node_added':
      case 'node_updated':
      case 'node_restored': {
        const node = wireNode(payload.node as Record<string, unknown>);
        this.nodes.set(node.id, node);
        this.pendingEdits.delete(node.id);
        break;
      }
      case 'node_deleted': {
        const id = payload.id as number;
        this.nodes.delete(id);
        this.pendingEdits.delete(id);
        break;
      }
      case 'mode_changed':
        this.mode = payload.mode as GardenMode;
        break;
      case 'backup_created':
        this.lastBackup = {
          backupId: payload.backup_id as string,
          removed: (payload.removed as number[]) ?? [],
          edit: (payload.edit as string) ?? '',
        };
        break;
      case 'work_unit':
        // a unit just finished; nothing is in progress until the next starts
        this.inProgress = null;
        break;
      default:
        break; // informational events
    }
  }

  children(parentId: number): NodeView[] {
    const out = [...this.nodes.values()].filter((n) => n.parent === parentId);
    out.sort((a, b) => a.child_order - b.child_order || a.id - b.id);
    return out;
  }

  depth(nodeId: number): number {
    let depth = 0;
    let node = this.nodes.get(nodeId);
    while (node && node.parent !== null) {
      node = this.nodes.get(node.parent);
      depth += 1;
    }
    return depth;
  }

  seed(): NodeView | undefined {
    return [...this.nodes.values()].find((n) => n.kind === 'Seed');
  }

  /** ids of a node and everything beneath it (used for removal animation) */
  subtree(nodeId: number): number[] {
    const out: number[] = [];
    const stack = [nodeId];
    while (stack.length > 0) {
      const id = stack.pop()!;
      out.push(id);
      for (const child of this.children(id)) stack.push(child.id);
    }
    return out;
  }
}

function wireNode(raw: Record<string, unknown>): NodeView {
  return {
    id: raw.id as number,
    kind: raw.kind as NodeView['kind'],
    status: raw.status as NodeView['status'],
    is_leaf: Boolean(raw.is_leaf),
    assigned_submodule: (raw.assigned_submodule as string | null) ?? null,
    text_excerpt: typeof raw.text === 'string'
      ? raw.text.slice(0, 120)
      : ((raw.text_excerpt as string) ?? ''),
    parent: (raw.parent as number | null) ?? null,
    child_order: (raw.child_order as number) ?? 0,
  };
}

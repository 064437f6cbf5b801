// Client + store against a fixture backend: snapshot, live events, cascade
// deletion round-trip, and stream resume after a dropped connection.

import assert from 'node:assert/strict';
import { after, before, test } from 'node:test';

import { ApiClient, type StreamStatus } from '../src/api.js';
import { buildCanvasModel } from '../src/layout.js';
import { GardenStore } from '../src/store.js';
import type { GardenEvent } from '../src/types.js';
import { FixtureBackend, waitFor } from './fixture-server.js';

let backend: FixtureBackend;
let client: ApiClient;

before(async () => {
  backend = new FixtureBackend();
  const port = await backend.start();
  client = new ApiClient(`http://127.0.0.1:${port}`);
});

after(async () => {
  await backend.stop();
});

test('snapshot renders the 30-node fixture with a legend', async () => {
  const store = new GardenStore();
  store.applySnapshot(await client.getGarden('g1'));
  const model = buildCanvasModel(store);
  assert.equal(model.nodes.length, 30);
  assert.equal(model.legend.length, 5);
});

test('toggling is-leaf removes descendants within one event round-trip', async () => {
  const store = new GardenStore();
  store.applySnapshot(await client.getGarden('g1'));

  // "lay flower beds" has two leaf children with no tasks yet
  const beds = [...store.nodes.values()].find(
    (n) => n.text_excerpt === 'lay flower beds')!;
  const doomed = store.subtree(beds.id).filter((id) => id !== beds.id);
  assert.ok(doomed.length >= 2);

  const received: GardenEvent[] = [];
  const stream = client.streamEvents('g1', store.lastSeq, (event) => {
    received.push(event);
    store.applyEvent(event);
  });

  store.markPending(beds.id);
  const patch = await client.patchNode('g1', beds.id, { is_leaf: true });
  assert.deepEqual([...patch.removed].sort(), [...doomed].sort());
  assert.equal(patch.backups.length, 1);

  // one round-trip: the deletion events that the PATCH emitted
  await waitFor(() => doomed.every((id) => !store.nodes.has(id)),
    5000, 'descendants to disappear');
  assert.ok(!store.pendingEdits.has(beds.id));
  assert.equal(store.lastBackup?.backupId, patch.backups[0]);

  const model = buildCanvasModel(store);
  const ids = new Set(model.nodes.map((n) => n.id));
  for (const id of doomed) assert.ok(!ids.has(id));
  stream.stop();
});

test('stream resumes from the last seq after a dropped connection', async () => {
  const store = new GardenStore();
  store.applySnapshot(await client.getGarden('g1'));

  const seqs: number[] = [];
  const statuses: StreamStatus[] = [];
  const stream = client.streamEvents('g1', store.lastSeq, (event) => {
    seqs.push(event.seq);
    store.applyEvent(event);
  }, (status) => statuses.push(status), 50);

  await waitFor(() => statuses.includes('open'), 5000, 'stream open');
  const baseline = store.lastSeq;

  backend.dropConnections();
  backend.push('System', {
    type: 'node_added',
    node: { id: 500, kind: 'PlanStep', status: 'Pending', is_leaf: false,
            assigned_submodule: null, text: 'post-drop step', parent: 1,
            child_order: 9 },
  });

  await waitFor(() => store.nodes.has(500), 5000, 'post-drop event delivery');
  assert.ok(statuses.includes('lost'));
  // no duplicates despite the reconnect replaying from the cursor
  assert.deepEqual(seqs, [...new Set(seqs)]);
  assert.ok(store.lastSeq > baseline);
  stream.stop();
});

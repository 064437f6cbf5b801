// Browser bootstrap: wires the store, canvas, side panel, and controls to a
// backend chosen via ?api=...&garden=... query parameters.

import { ApiClient } from './api.js';
import { buildCanvasModel, COLUMN_WIDTH, ROW_HEIGHT, type CanvasModel } from './layout.js';
import { GardenStore } from './store.js';
import type { NodeDetail } from './types.js';

const params = new URLSearchParams(window.location.search);
const apiBase = params.get('api') ?? 'http://127.0.0.1:8642';
const api = new ApiClient(apiBase);
const store = new GardenStore();

let gardenId = params.get('garden') ?? '';
let selectedNode: number | null = null;

const canvasEl = document.getElementById('canvas') as HTMLDivElement;
const edgesEl = document.getElementById('edges') as unknown as SVGSVGElement;
const panelEl = document.getElementById('panel') as HTMLDivElement;
const legendEl = document.getElementById('legend') as HTMLDivElement;
const bannerEl = document.getElementById('banner') as HTMLDivElement;
const undoEl = document.getElementById('undo') as HTMLDivElement;
const modeEl = document.getElementById('mode') as HTMLSpanElement;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderLegend(model: CanvasModel): void {
  legendEl.replaceChildren(el('strong', '', 'Legend'));
  for (const entry of model.legend) {
    const row = el('div', 'legend-row');
    const swatch = el('span', 'swatch');
    swatch.style.background = entry.color;
    row.append(swatch, el('span', '', entry.label));
    legendEl.append(row);
  }
}

function renderCanvas(): void {
  const model = buildCanvasModel(store);
  modeEl.textContent = model.mode;
  canvasEl.querySelectorAll('.node').forEach((existing) => existing.remove());
  canvasEl.style.width = `${(model.columns + 1) * COLUMN_WIDTH}px`;
  canvasEl.style.height = `${(model.rows + 2) * ROW_HEIGHT}px`;

  const positions = new Map<number, { x: number; y: number }>();
  for (const node of model.nodes) {
    positions.set(node.id, { x: node.x, y: node.y });
    const box = el('div', 'node');
    box.style.left = `${node.x + 10}px`;
    box.style.top = `${node.y + 10}px`;
    box.style.background = node.color;
    if (node.inProgress) box.classList.add('in-progress');
    if (node.pendingEdit) box.classList.add('pending-edit');
    if (node.id === selectedNode) box.classList.add('selected');
    const title = node.isLeaf && node.submodule
      ? `${node.kind} · leaf → ${node.submodule}`
      : node.kind;
    box.append(el('div', 'node-kind', title), el('div', 'node-label', node.label));
    box.addEventListener('click', () => void selectNode(node.id));
    canvasEl.append(box);
  }

  edgesEl.setAttribute('width', String((model.columns + 1) * COLUMN_WIDTH));
  edgesEl.setAttribute('height', String((model.rows + 2) * ROW_HEIGHT));
  edgesEl.replaceChildren();
  for (const edge of model.edges) {
    const from = positions.get(edge.from);
    const to = positions.get(edge.to);
    if (!from || !to) continue;
    const line = document.createElementNS('http://www.w3.org/2000/svg', 'line');
    line.setAttribute('x1', String(from.x + COLUMN_WIDTH - 30));
    line.setAttribute('y1', String(from.y + 32));
    line.setAttribute('x2', String(to.x + 10));
    line.setAttribute('y2', String(to.y + 32));
    line.setAttribute('class', 'edge');
    edgesEl.append(line);
  }
  renderLegend(model);
}

async function selectNode(nodeId: number): Promise<void> {
  selectedNode = nodeId;
  renderCanvas();
  let detail: NodeDetail;
  try {
    detail = await api.getNode(gardenId, nodeId);
  } catch {
    panelEl.replaceChildren(el('p', 'error', 'node no longer exists'));
    return;
  }
  panelEl.replaceChildren();
  panelEl.append(el('h3', '', `${detail.kind} ${detail.id} · ${detail.status}`));
  const text = el('pre', 'full-text', detail.text);
  panelEl.append(text);

  if (detail.kind === 'PlanStep') {
    const label = el('label', 'is-leaf');
    const checkbox = el('input') as HTMLInputElement;
    checkbox.type = 'checkbox';
    checkbox.checked = detail.is_leaf;
    checkbox.addEventListener('change', () => {
      store.markPending(nodeId);
      renderCanvas();
      api.patchNode(gardenId, nodeId, { is_leaf: checkbox.checked })
        .catch((err) => showError(err));
    });
    label.append(checkbox, el('span', '', ' is leaf'));
    panelEl.append(label);
  }

  if (detail.kind === 'Evaluation') {
    panelEl.append(el('h4', '', 'feedback'));
    const editor = el('textarea') as HTMLTextAreaElement;
    editor.value = detail.feedback ?? '';
    const save = el('button', '', 'save feedback (reruns downstream)');
    save.addEventListener('click', () => {
      store.markPending(nodeId);
      renderCanvas();
      api.patchNode(gardenId, nodeId, { feedback: editor.value })
        .catch((err) => showError(err));
    });
    panelEl.append(editor, save);
  }

  if (detail.kind === 'Evaluation' || detail.kind === 'CodeAttempt') {
    const run = el('button', '', 'compile & run');
    run.addEventListener('click', () => {
      run.setAttribute('disabled', 'true');
      api.compileAndRun(gardenId, nodeId)
        .then((r) => { run.textContent = `session ${r.session}`; })
        .catch((err) => { run.removeAttribute('disabled'); showError(err); });
    });
    panelEl.append(run);
  }

  if (detail.screenshots.length > 0) {
    panelEl.append(el('h4', '', `screenshots (${detail.screenshots.length})`));
    const list = el('ul');
    for (const shot of detail.screenshots) list.append(el('li', '', shot));
    panelEl.append(list);
  }
  const preview = detail.payload['preview_image'];
  if (typeof preview === 'string') {
    panelEl.append(el('p', '', `asset preview: ${preview}`));
  }
}

function showError(err: unknown): void {
  bannerEl.textContent = err instanceof Error ? err.message : String(err);
  bannerEl.classList.add('visible', 'error');
  setTimeout(() => bannerEl.classList.remove('visible', 'error'), 4000);
}

function showUndo(): void {
  const backup = store.lastBackup;
  if (!backup) return;
  undoEl.replaceChildren(
    el('span', '', `removed ${backup.removed.length} nodes `),
  );
  const button = el('button', '', `undo (${backup.backupId})`);
  button.addEventListener('click', () => {
    api.restore(gardenId, backup.backupId).catch((err) => showError(err));
    undoEl.classList.remove('visible');
  });
  undoEl.append(button);
  undoEl.classList.add('visible');
  setTimeout(() => undoEl.classList.remove('visible'), 8000);
}

async function start(): Promise<void> {
  if (!gardenId) {
    gardenId = (await api.createGarden()).garden_id;
    const next = new URLSearchParams(window.location.search);
    next.set('garden', gardenId);
    history.replaceState(null, '', `?${next.toString()}`);
  }
  const view = await api.getGarden(gardenId);
  store.applySnapshot(view);
  renderCanvas();

  api.streamEvents(gardenId, store.lastSeq, (event) => {
    const type = event.payload.type;
    store.applyEvent(event);
    if (type === 'backup_created') showUndo();
    renderCanvas();
  }, (status) => {
    if (status === 'lost') {
      bannerEl.textContent = 'connection lost, retrying…';
      bannerEl.classList.add('visible');
    } else if (status === 'open') {
      bannerEl.classList.remove('visible');
    }
  });

  (document.getElementById('seed-form') as HTMLFormElement).addEventListener(
    'submit', (ev) => {
      ev.preventDefault();
      const input = document.getElementById('seed-text') as HTMLInputElement;
      if (input.value.trim().length === 0) return;
      api.seed(gardenId, input.value).catch((err) => showError(err));
      input.value = '';
    });
  (document.getElementById('btn-step') as HTMLButtonElement)
    .addEventListener('click', () => void api.step(gardenId).catch(showError));
  (document.getElementById('btn-play') as HTMLButtonElement)
    .addEventListener('click', () => void api.setMode(gardenId, 'play').catch(showError));
  (document.getElementById('btn-pause') as HTMLButtonElement)
    .addEventListener('click', () => void api.setMode(gardenId, 'pause').catch(showError));
}

void start();

// Browser shell: wires the service client, view state, and the three.js
// cylinder view into the page.  All analysis lives server-side; every control
// here just issues a request and re-renders from the response documents.

import * as THREE from 'three';
import { ApiError, CovarClient, StaleRevisionError } from './api.js';
import { birdsEyePose, CylinderView, defaultPose, RenderError, type CameraPose } from './scene.js';
import {
  contributionSum,
  echoPanel,
  NEG_LOG10_P_MAX,
  realignSummary,
  scoreRows,
  ViewState,
  violatedKeySet,
} from './state.js';
import type { EdgeAction, ScoreResult } from './types.js';

const SERVICE_URL =
  new URLSearchParams(location.search).get('service') ?? 'http://127.0.0.1:8642';

const client = new CovarClient(SERVICE_URL);
const state = new ViewState();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const banner = el<HTMLDivElement>('banner');
const edgeMenu = el<HTMLDivElement>('edge-menu');
let menuKey: string | null = null;

function showBanner(text: string, stale = false) {
  banner.textContent = '';
  banner.append(text + ' ');
  if (stale) {
    const btn = document.createElement('button');
    btn.textContent = 'refresh';
    btn.onclick = () => {
      banner.hidden = true;
      void refreshAll();
    };
    banner.append(btn);
  }
  banner.hidden = false;
}

function reportError(err: unknown) {
  if (err instanceof StaleRevisionError) {
    state.markStale();
    showBanner('stale view — refresh', true);
  } else if (err instanceof RenderError) {
    showBanner(`render error: ${err.message}`);
  } else if (err instanceof ApiError) {
    showBanner(`${err.code}: ${err.message}`);
  } else {
    showBanner(String(err));
  }
}

// --- three.js shell --------------------------------------------------------

const viewport = el<HTMLDivElement>('view');
const renderer = new THREE.WebGLRenderer({ antialias: true });
renderer.setPixelRatio(window.devicePixelRatio);
viewport.append(renderer.domElement);

const scene3 = new THREE.Scene();
scene3.background = new THREE.Color(0x14161a);
scene3.add(new THREE.AmbientLight(0xffffff, 0.75));
const keyLight = new THREE.DirectionalLight(0xffffff, 1.4);
keyLight.position.set(3, 6, 2);
scene3.add(keyLight);

const camera = new THREE.PerspectiveCamera(45, 1, 0.01, 100);
const camTarget = new THREE.Vector3();

function applyPose(pose: CameraPose) {
  camera.position.set(...pose.position);
  camTarget.set(...pose.target);
  camera.up.set(...pose.up);
  camera.lookAt(camTarget);
}

// minimal orbit: drag rotates about the target, wheel dollies
let dragging = false;
let lastX = 0;
let lastY = 0;
renderer.domElement.addEventListener('pointerdown', (ev) => {
  dragging = true;
  lastX = ev.clientX;
  lastY = ev.clientY;
});
window.addEventListener('pointerup', () => (dragging = false));
window.addEventListener('pointermove', (ev) => {
  if (!dragging) return;
  const dx = (ev.clientX - lastX) * 0.008;
  const dy = (ev.clientY - lastY) * 0.008;
  lastX = ev.clientX;
  lastY = ev.clientY;
  const offset = camera.position.clone().sub(camTarget);
  const sph = new THREE.Spherical().setFromVector3(offset);
  sph.theta -= dx;
  sph.phi = Math.min(Math.max(sph.phi - dy, 0.05), Math.PI - 0.05);
  camera.position.setFromSpherical(sph).add(camTarget);
  camera.up.set(0, 1, 0);
  camera.lookAt(camTarget);
});
renderer.domElement.addEventListener('wheel', (ev) => {
  ev.preventDefault();
  const offset = camera.position.clone().sub(camTarget);
  offset.multiplyScalar(ev.deltaY > 0 ? 1.1 : 0.9);
  camera.position.copy(camTarget).add(offset);
});
window.addEventListener('keydown', (ev) => {
  if (!view) return;
  if (ev.key === 'b') applyPose(birdsEyePose(view.params));
  if (ev.key === 'v') applyPose(defaultPose(view.params));
});

function resize() {
  const w = viewport.clientWidth || 800;
  const h = viewport.clientHeight || 600;
  renderer.setSize(w, h);
  camera.aspect = w / h;
  camera.updateProjectionMatrix();
}
window.addEventListener('resize', resize);

let view: CylinderView | null = null;

function makeAxisLabel(text: string): THREE.Sprite {
  const canvas = document.createElement('canvas');
  canvas.width = 64;
  canvas.height = 32;
  const ctx = canvas.getContext('2d')!;
  ctx.font = '24px sans-serif';
  ctx.fillStyle = '#c8ccd4';
  ctx.textAlign = 'center';
  ctx.fillText(text, 32, 24);
  const texture = new THREE.CanvasTexture(canvas);
  const sprite = new THREE.Sprite(new THREE.SpriteMaterial({ map: texture, depthTest: false }));
  sprite.scale.set(0.16, 0.08, 1);
  return sprite;
}

function installView(next: CylinderView) {
  if (view) {
    scene3.remove(view.group);
    view.dispose();
  }
  view = next;
  scene3.add(view.group);
  // column index above each axis
  const p = view.params;
  const top = p.height_step * p.categories.length + 0.08;
  for (let j = 0; j < p.L; j++) {
    const angle = (2 * Math.PI * j) / p.L;
    const label = makeAxisLabel(String(j));
    label.position.set(p.radius * Math.cos(angle), top, -p.radius * Math.sin(angle));
    view.group.add(label);
  }
}

renderer.setAnimationLoop(() => {
  renderer.render(scene3, camera);
});

// --- edge picking and brushing --------------------------------------------

const raycaster = new THREE.Raycaster();

renderer.domElement.addEventListener('click', (ev) => {
  edgeMenu.hidden = true;
  if (!view) return;
  const rect = renderer.domElement.getBoundingClientRect();
  const ndc = new THREE.Vector2(
    ((ev.clientX - rect.left) / rect.width) * 2 - 1,
    -((ev.clientY - rect.top) / rect.height) * 2 + 1,
  );
  raycaster.setFromCamera(ndc, camera);
  const key = view.pickEdge(raycaster);
  if (!key) return;
  menuKey = key;
  el<HTMLSpanElement>('edge-menu-key').textContent = key;
  edgeMenu.style.left = `${ev.clientX + 4}px`;
  edgeMenu.style.top = `${ev.clientY + 4}px`;
  edgeMenu.hidden = false;
});

async function editEdge(action: EdgeAction) {
  if (!state.datasetId || !menuKey) return;
  edgeMenu.hidden = true;
  try {
    const resp = await client.editEdge(state.datasetId, menuKey, action, state.revision);
    state.noteRevision(resp.revision);
    await refreshAll();
  } catch (err) {
    reportError(err);
  }
}
el<HTMLButtonElement>('btn-pin').onclick = () => void editEdge('pin');
el<HTMLButtonElement>('btn-remove').onclick = () => void editEdge('remove');
el<HTMLButtonElement>('btn-reset').onclick = () => void editEdge('reset');

// --- sliders ---------------------------------------------------------------

const sliderZ = el<HTMLInputElement>('slider-z');
const sliderP = el<HTMLInputElement>('slider-p');
const sliderRaw = el<HTMLInputElement>('slider-raw');
const selectSign = el<HTMLSelectElement>('select-sign');
sliderP.max = String(NEG_LOG10_P_MAX);

function readSliders() {
  state.setSliders({
    minZ: Number(sliderZ.value),
    negLog10P: Number(sliderP.value),
    minRaw: Number(sliderRaw.value),
    sign: selectSign.value as 'both' | 'positive' | 'negative',
  });
}

function writeSliders() {
  sliderZ.max = String(Math.max(state.bounds.maxZ, 1).toFixed(2));
  sliderRaw.max = String(Math.max(state.bounds.maxRaw, 1).toFixed(2));
  sliderZ.value = String(state.sliders.minZ);
  sliderP.value = String(state.sliders.negLog10P);
  sliderRaw.value = String(state.sliders.minRaw);
  el<HTMLSpanElement>('label-z').textContent = `|z| ≥ ${state.sliders.minZ.toFixed(1)}`;
  el<HTMLSpanElement>('label-p').textContent =
    state.sliders.negLog10P <= 0 ? 'p ≤ 1' : `p ≤ 1e-${state.sliders.negLog10P.toFixed(0)}`;
  el<HTMLSpanElement>('label-raw').textContent = `|raw| ≥ ${state.sliders.minRaw.toFixed(1)}`;
}

let sliderTimer: ReturnType<typeof setTimeout> | undefined;
for (const input of [sliderZ, sliderP, sliderRaw, selectSign]) {
  input.addEventListener('input', () => {
    readSliders();
    writeSliders();
    clearTimeout(sliderTimer);
    sliderTimer = setTimeout(() => void refreshAll(), 150);
  });
}

// --- panels ----------------------------------------------------------------

async function refreshEchoes() {
  if (!state.datasetId) return;
  const resp = await client.echoes(state.datasetId, state.filter());
  const panel = echoPanel(resp);
  el<HTMLSpanElement>('phi-now').textContent = panel.phi.toFixed(1);
  const list = el<HTMLUListElement>('echo-list');
  list.textContent = '';
  if (!panel.rows.length) {
    const li = document.createElement('li');
    li.textContent = 'no echo ladders at this filter';
    list.append(li);
  }
  for (const row of panel.rows.slice(0, 8)) {
    const li = document.createElement('li');
    li.textContent = `${row.label} — ${row.memberCount} rungs, mass ${row.mass.toFixed(1)}`;
    list.append(li);
  }
}

el<HTMLButtonElement>('btn-realign').onclick = async () => {
  if (!state.datasetId) return;
  try {
    const report = await client.realign(state.datasetId, { revision: state.revision });
    const s = realignSummary(report);
    el<HTMLDivElement>('realign-result').textContent =
      `Φ ${s.before.toFixed(1)} → ${s.after.toFixed(1)} ` +
      `(×${s.ratio.toFixed(2)}, ${s.rowsShifted} rows shifted, ${s.rounds} rounds)`;
    await refreshAll();
  } catch (err) {
    reportError(err);
  }
};

let modelId: string | null = null;

el<HTMLButtonElement>('btn-model').onclick = async () => {
  if (!state.datasetId) return;
  try {
    const resp = await client.buildModel(state.datasetId, { revision: state.revision });
    state.noteRevision(resp.revision);
    modelId = resp.model_id;
    el<HTMLSpanElement>('model-line').textContent = `model ${modelId} (visible edges)`;
  } catch (err) {
    reportError(err);
  }
};

function renderScoreTable(results: ScoreResult[]) {
  const table = el<HTMLTableElement>('score-table');
  table.textContent = '';
  const head = table.insertRow();
  for (const h of ['#', 'id', 'log score', 'log10 fold', 'violations']) {
    const cell = document.createElement('th');
    cell.textContent = h;
    head.append(cell);
  }
  for (const row of scoreRows(results)) {
    const tr = table.insertRow();
    tr.insertCell().textContent = String(row.rank + 1);
    tr.insertCell().textContent = row.id;
    tr.insertCell().textContent = row.total.toFixed(3);
    tr.insertCell().textContent = row.log10Fold.toFixed(2);
    tr.insertCell().textContent = String(row.violatedCount);
    const full = results[row.rank];
    tr.onclick = () => {
      // brush the violated couplings in the 3D view
      view?.setSelected(violatedKeySet(full));
      el<HTMLDivElement>('score-detail').textContent =
        `${full.id}: nodes+edges sum ${contributionSum(full).toFixed(3)}, ` +
        `${full.violated_edges.length} violated`;
    };
  }
}

el<HTMLButtonElement>('btn-score').onclick = async () => {
  if (!modelId) {
    showBanner('build a model first');
    return;
  }
  const lines = el<HTMLTextAreaElement>('score-input')
    .value.split('\n')
    .map((s) => s.trim())
    .filter(Boolean);
  if (!lines.length) return;
  try {
    const resp = await client.score(modelId, lines);
    renderScoreTable(resp.results);
  } catch (err) {
    reportError(err);
  }
};

// --- dataset lifecycle -----------------------------------------------------

async function refreshAll() {
  if (!state.datasetId) return;
  try {
    const graph = await client.graph(state.datasetId, state.filter());
    state.applyGraph(graph);
    writeSliders();
    el<HTMLSpanElement>('edge-count').textContent =
      `${state.visibleEdgeCount} of ${graph.stats.edge_total} edges`;
    el<HTMLSpanElement>('revision-line').textContent = `rev ${state.revision}`;
    const sceneDoc = await client.scene(state.datasetId, state.filter());
    installView(new CylinderView(sceneDoc));
    await refreshEchoes();
    banner.hidden = true;
  } catch (err) {
    reportError(err);
  }
}

async function openDataset(load: () => ReturnType<CovarClient['uploadRows']>) {
  try {
    const info = await load();
    state.openDataset(info.id, info.revision);
    el<HTMLSpanElement>('dataset-line').textContent =
      `${info.id}: ${info.n} rows × ${info.L} columns`;
    modelId = null;
    el<HTMLSpanElement>('model-line').textContent = '';
    await refreshAll();
    if (view) applyPose(defaultPose(view.params));
  } catch (err) {
    reportError(err);
  }
}

el<HTMLButtonElement>('btn-upload').onclick = () => {
  const text = el<HTMLTextAreaElement>('rows-input').value;
  if (text.trim()) void openDataset(() => client.uploadText(text));
};
el<HTMLButtonElement>('btn-demo-hairpin').onclick = () =>
  void openDataset(() => client.uploadDemo('hairpin'));
el<HTMLButtonElement>('btn-demo-shifted').onclick = () =>
  void openDataset(() => client.uploadDemo('shifted'));

resize();

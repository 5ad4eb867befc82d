// Builds a three.js object tree from a cylinder scene document.  The scene
// geometry (positions, radii, chord widths) is computed server-side; this
// module only turns the document into meshes, so it runs equally well in a
// browser and in node-based tests (no renderer is created here).

import * as THREE from 'three';
import type { SceneDoc, SceneEdge, SceneParams } from './types.js';

/** Raised on malformed scene documents; the shell shows a render-error banner. */
export class RenderError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'RenderError';
  }
}

const AXIS_COLOR = 0x444850;
const POSITIVE_COLOR = 0x3a6ea8;     // solid steel blue
const NEGATIVE_COLOR = 0xe08080;     // light red, drawn translucent
const NEGATIVE_OPACITY = 0.45;
const SELECT_EMISSIVE = 0xffd54a;
const GOLDEN_ANGLE = 0.381966;

/** Deterministic per-category color; the gap symbol stays neutral grey. */
export function categoryColor(cat: string, params: SceneParams): THREE.Color {
  const idx = params.categories.indexOf(cat);
  if (idx < 0 || idx === params.categories.length - 1) {
    return new THREE.Color(0x9ea3ab);
  }
  return new THREE.Color().setHSL((0.02 + idx * GOLDEN_ANGLE) % 1, 0.65, 0.55);
}

/** Edges on the same cycle share one highlight hue. */
export function cycleColor(cycleId: number): THREE.Color {
  return new THREE.Color().setHSL((0.09 + cycleId * GOLDEN_ANGLE) % 1, 0.95, 0.6);
}

export interface CameraPose {
  position: [number, number, number];
  target: [number, number, number];
  up: [number, number, number];
}

function stackHeight(params: SceneParams): number {
  return params.height_step * params.categories.length;
}

export function defaultPose(params: SceneParams): CameraPose {
  const r = params.radius;
  const h = stackHeight(params);
  return {
    position: [2.6 * r, h + 1.4 * r, 2.6 * r],
    target: [0, h / 2, 0],
    up: [0, 1, 0],
  };
}

/** Top-down overview of the whole dependency network. */
export function birdsEyePose(params: SceneParams): CameraPose {
  const r = params.radius;
  return {
    position: [0, stackHeight(params) + 3.2 * r, 0],
    target: [0, 0, 0],
    up: [0, 0, -1],
  };
}

function checkFinite(values: number[], what: string) {
  for (const v of values) {
    if (typeof v !== 'number' || !Number.isFinite(v)) {
      throw new RenderError(`non-finite coordinate in ${what}`);
    }
  }
}

function validate(doc: SceneDoc) {
  if (!doc || typeof doc !== 'object') throw new RenderError('scene document missing');
  const p = doc.params;
  if (!p || !Array.isArray(p.categories) || !(p.radius > 0) || !(p.height_step > 0)) {
    throw new RenderError('scene params missing or degenerate');
  }
  if (!Array.isArray(doc.axes) || !Array.isArray(doc.glyphs) || !Array.isArray(doc.edges)) {
    throw new RenderError('scene lists missing');
  }
  for (const g of doc.glyphs) checkFinite([g.x, g.y, g.z, g.r], `glyph ${g.j}.${g.cat}`);
  for (const e of doc.edges) {
    if (typeof e.key !== 'string' || !e.key) throw new RenderError('edge without key');
    checkFinite([e.x1, e.y1, e.z1, e.x2, e.y2, e.z2, e.width], `edge ${e.key}`);
  }
}

const UNIT_Y = new THREE.Vector3(0, 1, 0);

function chordMesh(e: SceneEdge, geometry: THREE.CylinderGeometry): THREE.Mesh {
  const a = new THREE.Vector3(e.x1, e.y1, e.z1);
  const b = new THREE.Vector3(e.x2, e.y2, e.z2);
  const dir = new THREE.Vector3().subVectors(b, a);
  const length = Math.max(dir.length(), 1e-9);

  const color = e.cycle_id !== null && e.cycle_id !== undefined
    ? cycleColor(e.cycle_id)
    : new THREE.Color(e.sign > 0 ? POSITIVE_COLOR : NEGATIVE_COLOR);
  const material = new THREE.MeshLambertMaterial({ color });
  if (e.sign < 0) {
    material.transparent = true;
    material.opacity = NEGATIVE_OPACITY;
  }

  const mesh = new THREE.Mesh(geometry, material);
  mesh.position.copy(a).add(b).multiplyScalar(0.5);
  mesh.scale.set(e.width, length, e.width);
  mesh.quaternion.setFromUnitVectors(UNIT_Y, dir.normalize());
  mesh.userData = { kind: 'edge', key: e.key, sign: e.sign, cycleId: e.cycle_id };
  return mesh;
}

export class CylinderView {
  readonly group: THREE.Group;
  readonly params: SceneParams;

  private edgeMeshes = new Map<string, THREE.Mesh>();
  private glyphMeshes: THREE.Mesh[] = [];
  private axisCount_ = 0;
  private sphereGeom = new THREE.SphereGeometry(1, 12, 12);
  private chordGeom = new THREE.CylinderGeometry(1, 1, 1, 8);
  private axisGeom: THREE.CylinderGeometry;

  constructor(doc: SceneDoc) {
    validate(doc);
    this.params = doc.params;
    this.group = new THREE.Group();
    this.group.name = 'cylinder-view';

    const r = doc.params.radius;
    const h = stackHeight(doc.params);
    this.axisGeom = new THREE.CylinderGeometry(0.004 * r, 0.004 * r, h, 6);
    const axisMat = new THREE.MeshLambertMaterial({ color: AXIS_COLOR });
    for (const axis of doc.axes) {
      const mesh = new THREE.Mesh(this.axisGeom, axisMat);
      mesh.position.set(r * Math.cos(axis.angle), h / 2, -r * Math.sin(axis.angle));
      mesh.userData = { kind: 'axis', index: axis.index };
      this.group.add(mesh);
      this.axisCount_ += 1;
    }

    for (const g of doc.glyphs) {
      const mesh = new THREE.Mesh(
        this.sphereGeom,
        new THREE.MeshLambertMaterial({ color: categoryColor(g.cat, doc.params) }),
      );
      mesh.position.set(g.x, g.y, g.z);
      mesh.scale.setScalar(g.r);
      mesh.userData = { kind: 'glyph', j: g.j, cat: g.cat };
      this.group.add(mesh);
      this.glyphMeshes.push(mesh);
    }

    for (const e of doc.edges) {
      const mesh = chordMesh(e, this.chordGeom);
      this.group.add(mesh);
      this.edgeMeshes.set(e.key, mesh);
    }
  }

  edgeCount(): number {
    return this.edgeMeshes.size;
  }

  glyphCount(): number {
    return this.glyphMeshes.length;
  }

  axisCount(): number {
    return this.axisCount_;
  }

  edgeKeys(): string[] {
    return [...this.edgeMeshes.keys()];
  }

  hasEdge(key: string): boolean {
    return this.edgeMeshes.has(key);
  }

  edgeMesh(key: string): THREE.Mesh | undefined {
    return this.edgeMeshes.get(key);
  }

  /** Emissive highlight on the given edges, cleared everywhere else. */
  setSelected(keys: Iterable<string>) {
    const wanted = new Set(keys);
    for (const [key, mesh] of this.edgeMeshes) {
      const mat = mesh.material as THREE.MeshLambertMaterial;
      mat.emissive.setHex(wanted.has(key) ? SELECT_EMISSIVE : 0x000000);
    }
  }

  /** First edge hit by the ray, as its key; null when the ray misses. */
  pickEdge(raycaster: THREE.Raycaster): string | null {
    const hits = raycaster.intersectObjects([...this.edgeMeshes.values()], false);
    if (!hits.length) return null;
    return (hits[0].object.userData as { key: string }).key;
  }

  pickGlyph(raycaster: THREE.Raycaster): { j: number; cat: string } | null {
    const hits = raycaster.intersectObjects(this.glyphMeshes, false);
    if (!hits.length) return null;
    const d = hits[0].object.userData as { j: number; cat: string };
    return { j: d.j, cat: d.cat };
  }

  dispose() {
    for (const mesh of this.edgeMeshes.values()) {
      (mesh.material as THREE.Material).dispose();
    }
    for (const mesh of this.glyphMeshes) {
      (mesh.material as THREE.Material).dispose();
    }
    this.sphereGeom.dispose();
    this.chordGeom.dispose();
    this.axisGeom.dispose();
    this.edgeMeshes.clear();
    this.glyphMeshes.length = 0;
  }
}

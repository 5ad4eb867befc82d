"""Cylinder scene construction for graph views.

Columns become vertical axes on a cylinder surface (angle 2*pi*j/L), every
category keeps one fixed height level shared by all columns (alphabet order,
gap on top), glyph radius tracks sqrt of marginal frequency so area tracks
frequency, and edge width tracks |raw residual|.  The glyph landscape depends
only on the marginals, never on the filter.

Chords between distinct surface axes cannot lie on a common line (a line
meets the cylinder in at most two points unless it is a surface ruling, which
would require both endpoints on one axis -- and same-column edges do not
exist).  A defensive check still runs and, should a degenerate overlap ever
appear, nudges the category height levels apart by a documented epsilon.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .contingency import export_order
from .metagraph import CycleReport, FilterSpec, Metagraph, detect_cycles, edge_key

__all__ = [
    "LayoutParams",
    "CylinderScene",
    "compute_layout",
    "emit_scene",
    "colinear_overlaps",
]

_EPS_FACTOR = 1e-6


@dataclass(frozen=True)
class LayoutParams:
    radius: float = 1.0
    height_step: float = 0.12
    glyph_scale: float = 0.06

    def __post_init__(self):
        for v in (self.radius, self.height_step, self.glyph_scale):
            if not (v > 0 and math.isfinite(v)):
                raise ValueError("layout parameters must be positive and finite")

    def to_dict(self) -> dict:
        return {"radius": self.radius, "height_step": self.height_step,
                "glyph_scale": self.glyph_scale}


@dataclass
class CylinderScene:
    params: dict
    axes: list[dict]
    glyphs: list[dict]
    edges: list[dict]

    def to_document(self) -> dict:
        return {"params": dict(self.params), "axes": [dict(a) for a in self.axes],
                "glyphs": [dict(g) for g in self.glyphs],
                "edges": [dict(e) for e in self.edges]}

    def to_json(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_document(cls, doc: dict) -> "CylinderScene":
        return cls(params=dict(doc["params"]),
                   axes=[dict(a) for a in doc["axes"]],
                   glyphs=[dict(g) for g in doc["glyphs"]],
                   edges=[dict(e) for e in doc["edges"]])


def _segments(edges: list[dict]) -> tuple[np.ndarray, np.ndarray]:
    a = np.array([[e["x1"], e["y1"], e["z1"]] for e in edges], dtype=np.float64)
    b = np.array([[e["x2"], e["y2"], e["z2"]] for e in edges], dtype=np.float64)
    return a, b


def colinear_overlaps(edges: list[dict], tol: float = 1e-9) -> list[tuple[int, int]]:
    """Pairs of edges sharing a line over positive length.

    A pair offends when the segments are parallel within `tol`, lie on the
    same line, and their projections onto it overlap beyond a point.  Pairs
    sharing an endpoint are exempt (meeting at a glyph is fine).
    """
    E = len(edges)
    if E < 2:
        return []
    A, B = _segments(edges)
    D = B - A
    norm = np.linalg.norm(D, axis=1)

    bad = []
    for i in range(E - 1):
        d = D[i]
        li = norm[i]
        if li == 0:
            continue
        Aj, Bj, Dj = A[i + 1:], B[i + 1:], D[i + 1:]
        lj = norm[i + 1:]
        # Parallel within tol: sin of the angle between directions.
        cross_dir = np.cross(np.broadcast_to(d, Dj.shape), Dj)
        cand = np.linalg.norm(cross_dir, axis=1) <= tol * li * np.where(lj > 0, lj, 1.0)
        if not cand.any():
            continue
        scale = np.maximum(li, lj)
        # Same line: both endpoints of the other segment sit on line(A_i, d).
        off_a = np.linalg.norm(np.cross(np.broadcast_to(d, Dj.shape), Aj - A[i]), axis=1)
        off_b = np.linalg.norm(np.cross(np.broadcast_to(d, Dj.shape), Bj - A[i]), axis=1)
        cand &= (off_a <= tol * li * scale) & (off_b <= tol * li * scale)
        if not cand.any():
            continue
        for off in np.flatnonzero(cand):
            j = i + 1 + int(off)
            if any(np.array_equal(p, q)
                   for p in (A[i], B[i]) for q in (A[j], B[j])):
                continue
            t0 = float((A[j] - A[i]) @ d) / float(d @ d)
            t1 = float((B[j] - A[i]) @ d) / float(d @ d)
            lo, hi = min(t0, t1), max(t0, t1)
            if min(1.0, hi) - max(0.0, lo) > tol:
                bad.append((i, j))
    return bad


def compute_layout(graph: Metagraph, spec: Optional[FilterSpec] = None,
                   cycles: Optional[CycleReport] = None,
                   params: LayoutParams = LayoutParams()) -> CylinderScene:
    """Build the scene for the visible view under `spec` (default: active filter)."""
    L = graph.L
    n = graph.n
    cats = graph.categories
    marg = graph.edges.marg
    R = params.radius
    step = params.height_step

    angles = 2.0 * math.pi * np.arange(L) / L
    ax = R * np.cos(angles)
    az = R * np.sin(angles)
    axes = [{"index": int(j), "angle": float(angles[j])} for j in range(L)]

    if cycles is None:
        cycles = detect_cycles(graph, spec)
    idx = export_order(graph.edges, np.flatnonzero(graph.visible_mask(spec)))
    raw = graph.edges.raw_residual(idx)
    max_raw = float(np.abs(raw).max()) if idx.size else 0.0
    es = graph.edges

    def build(heights: np.ndarray) -> tuple[list[dict], list[dict]]:
        glyphs = []
        for j in range(L):
            for c in np.flatnonzero(marg[j]):
                glyphs.append({
                    "j": int(j), "cat": cats[c],
                    "x": float(ax[j]), "y": float(heights[c]), "z": float(az[j]),
                    "r": float(params.glyph_scale * math.sqrt(marg[j, c] / n)),
                })
        edges = []
        for row, i in enumerate(idx):
            j, k = int(es.j[i]), int(es.k[i])
            cj, ck = int(es.cj[i]), int(es.ck[i])
            width = (0.5 * params.glyph_scale * abs(raw[row]) / max_raw
                     if max_raw > 0 else 0.0)
            cid = cycles.label(j, k)
            edges.append({
                "key": edge_key(j, cats[cj], k, cats[ck]),
                "x1": float(ax[j]), "y1": float(heights[cj]), "z1": float(az[j]),
                "x2": float(ax[k]), "y2": float(heights[ck]), "z2": float(az[k]),
                "width": float(width),
                "sign": int(np.sign(raw[row])),
                "cycle_id": cid if cid >= 0 else None,
            })
        return glyphs, edges

    # Category height levels, shared by every column.  Geometry forbids
    # shared-line overlaps between chords of distinct column pairs, but a
    # defensive check runs and spreads the levels by eps if one appears.
    heights = step * np.arange(len(cats), dtype=np.float64)
    eps = _EPS_FACTOR * step
    for _ in range(8):
        glyphs, edges = build(heights)
        if not colinear_overlaps(edges):
            break
        heights = heights + eps * np.arange(len(cats))
        eps *= 2.0
    else:
        raise RuntimeError("could not resolve colinear-overlapping edges")

    return CylinderScene(
        params={**params.to_dict(), "L": int(L), "n": int(n),
                "categories": list(cats)},
        axes=axes, glyphs=glyphs, edges=edges,
    )


def emit_scene(scene: CylinderScene) -> dict:
    return scene.to_document()

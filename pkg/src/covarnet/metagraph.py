"""Metagraph views over scanned edges: filtering, edits, cycles, round-trip.

Nodes are alignment columns, subnodes are categories with marginal support,
and edges are scanned subnode pairs.  A filter plus a replayable pin / remove
/ reset edit log determines the visible view; node-level cycles are the
biconnected components of the column projection of that view.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .alignment_io import Alphabet
from .contingency import EdgeSet, MarginalProfile, edges_to_csv, export_order

__all__ = [
    "FilterSpec",
    "SchemaViolation",
    "InconsistentInputs",
    "UnknownEdge",
    "Metagraph",
    "CycleReport",
    "build_graph",
    "detect_cycles",
    "edge_key",
    "parse_edge_key",
    "biconnected_components",
]

STATE_NORMAL, STATE_PINNED, STATE_REMOVED = 0, 1, 2
STATE_NAMES = ("normal", "pinned", "removed")
ACTIONS = {"pin": STATE_PINNED, "remove": STATE_REMOVED, "reset": STATE_NORMAL}

SIGNS = ("both", "positive", "negative")

_CHUNK = 4_000_000


class SchemaViolation(ValueError):
    """Malformed or internally inconsistent graph/model document."""


class InconsistentInputs(ValueError):
    """Edges and marginals disagree (e.g. edge on a zero-weight subnode)."""


class UnknownEdge(KeyError):
    """Edge key not present in the graph's edge universe."""


def edge_key(j: int, cat_j: str, k: int, cat_k: str) -> str:
    return f"{j}.{cat_j}.{k}.{cat_k}"


def parse_edge_key(key: str) -> tuple[int, str, int, str]:
    parts = key.split(".")
    if len(parts) != 4:
        raise UnknownEdge(f"bad edge key {key!r}")
    try:
        j, k = int(parts[0]), int(parts[2])
    except ValueError:
        raise UnknownEdge(f"bad edge key {key!r}") from None
    return j, parts[1], k, parts[3]


@dataclass(frozen=True)
class FilterSpec:
    """Visibility thresholds: |z| >= min_abs_std_residual, p <= max_p,
    |raw| >= min_abs_raw, and a residual sign constraint."""

    min_abs_std_residual: float = 0.0
    max_p: float = 1.0
    min_abs_raw: float = 0.0
    sign: str = "both"

    def __post_init__(self):
        if self.sign not in SIGNS:
            raise ValueError(f"sign must be one of {SIGNS}, got {self.sign!r}")
        for v in (self.min_abs_std_residual, self.max_p, self.min_abs_raw):
            if not np.isfinite(v):
                raise ValueError("thresholds must be finite")
        if self.min_abs_std_residual < 0 or self.min_abs_raw < 0:
            raise ValueError("residual thresholds must be non-negative")
        if not (0.0 < self.max_p <= 1.0):
            raise ValueError("max_p must lie in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "min_abs_std_residual": self.min_abs_std_residual,
            "max_p": self.max_p,
            "min_abs_raw": self.min_abs_raw,
            "sign": self.sign,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterSpec":
        try:
            return cls(
                min_abs_std_residual=float(d.get("min_abs_std_residual", 0.0)),
                max_p=float(d.get("max_p", 1.0)),
                min_abs_raw=float(d.get("min_abs_raw", 0.0)),
                sign=str(d.get("sign", "both")),
            )
        except (TypeError, ValueError) as exc:
            raise SchemaViolation(f"bad filter: {exc}") from exc


class Metagraph:
    """Edge universe + per-edge state + active filter.

    The visible view is: (passes filter OR pinned) AND NOT removed.  Edits are
    appended to a log that can be replayed onto a fresh graph of the same
    universe.  The alphabet is recovered from the edge set's category list
    (gap always last).
    """

    def __init__(self, edges: EdgeSet,
                 state: Optional[np.ndarray] = None,
                 edit_log: Optional[list] = None,
                 filter_spec: FilterSpec = FilterSpec()):
        self.edges = edges
        self.alphabet = Alphabet(tuple(edges.categories[:-1]), edges.categories[-1])
        self.state = (np.zeros(len(edges), dtype=np.int8) if state is None
                      else np.asarray(state, dtype=np.int8))
        if self.state.size != len(edges):
            raise SchemaViolation("state array length mismatch")
        self.edit_log: list[dict] = list(edit_log) if edit_log else []
        self.filter_spec = filter_spec

    @property
    def L(self) -> int:
        return self.edges.marg.shape[0]

    @property
    def n(self) -> int:
        return self.edges.n

    @property
    def categories(self) -> tuple[str, ...]:
        return self.edges.categories

    # --- visibility -------------------------------------------------------

    def visible_mask(self, spec: Optional[FilterSpec] = None) -> np.ndarray:
        spec = self.filter_spec if spec is None else spec
        E = len(self.edges)
        out = np.empty(E, dtype=bool)
        for start in range(0, E, _CHUNK):
            sl = slice(start, min(E, start + _CHUNK))
            p_ok = self.edges.p[sl] <= spec.max_p
            z = self.edges.std_residual(sl)
            ok = p_ok & (np.abs(z) >= spec.min_abs_std_residual)
            if spec.min_abs_raw > 0 or spec.sign != "both":
                raw = self.edges.raw_residual(sl)
                if spec.min_abs_raw > 0:
                    ok &= np.abs(raw) >= spec.min_abs_raw
                if spec.sign == "positive":
                    ok &= raw > 0
                elif spec.sign == "negative":
                    ok &= raw < 0
            out[sl] = ok
        out |= self.state == STATE_PINNED
        out &= self.state != STATE_REMOVED
        return out

    def apply_filter(self, spec: FilterSpec) -> np.ndarray:
        """Set the active filter; return visible edge indices."""
        self.filter_spec = spec
        return np.flatnonzero(self.visible_mask())

    def visible_indices(self) -> np.ndarray:
        return np.flatnonzero(self.visible_mask())

    # --- edits ------------------------------------------------------------

    def find_edge(self, key: str) -> int:
        j, cat_j, k, cat_k = parse_edge_key(key)
        cats = self.categories
        if cat_j not in cats or cat_k not in cats or not (0 <= j < self.L and 0 <= k < self.L):
            raise UnknownEdge(f"unknown edge {key!r}")
        i = self.edges.find(j, cat_j, k, cat_k)
        if i < 0:
            raise UnknownEdge(f"unknown edge {key!r}")
        return i

    def edit_edge(self, key: str, action: str) -> str:
        """Apply pin/remove/reset to one edge; returns the new state name."""
        if action not in ACTIONS:
            raise ValueError(f"action must be one of {sorted(ACTIONS)}, got {action!r}")
        i = self.find_edge(key)
        self.state[i] = ACTIONS[action]
        self.edit_log.append({"key": key, "action": action})
        return STATE_NAMES[self.state[i]]

    def edge_state(self, key: str) -> str:
        return STATE_NAMES[self.state[self.find_edge(key)]]

    def replay(self, log: Iterable[dict]) -> None:
        """Reset all states and re-apply an edit log in order."""
        self.state[:] = STATE_NORMAL
        self.edit_log = []
        for entry in log:
            self.edit_edge(entry["key"], entry["action"])

    # --- export / import --------------------------------------------------

    def node_documents(self) -> list[dict]:
        """Per-column subnode landscape; independent of any filter."""
        cats = self.categories
        marg = self.edges.marg
        nodes = []
        for j in range(self.L):
            subs = [{"cat": cats[c], "weight": float(marg[j, c] / self.n)}
                    for c in np.flatnonzero(marg[j])]
            nodes.append({"index": j, "subnodes": subs})
        return nodes

    def edge_documents(self, idx: np.ndarray) -> list[dict]:
        idx = export_order(self.edges, idx)
        cats = self.categories
        e = self.edges.expected(idx)
        raw = self.edges.raw_residual(idx)
        z = self.edges.std_residual(idx)
        docs = []
        for row, i in enumerate(idx):
            cj, ck = cats[self.edges.cj[i]], cats[self.edges.ck[i]]
            docs.append({
                "key": edge_key(int(self.edges.j[i]), cj, int(self.edges.k[i]), ck),
                "j": int(self.edges.j[i]), "cat_j": cj,
                "k": int(self.edges.k[i]), "cat_k": ck,
                "observed": int(self.edges.observed[i]),
                "expected": float(e[row]),
                "raw": float(raw[row]),
                "z": float(z[row]),
                "p": float(self.edges.p[i]),
                "state": STATE_NAMES[self.state[i]],
            })
        return docs

    def to_document(self) -> dict:
        """Lossless export: every scanned edge with its state, plus log/filter."""
        family = len(self.edges)
        return {
            "alphabet": "".join(self.alphabet.symbols),
            "gap": self.alphabet.gap,
            "n": self.n,
            "filter": self.filter_spec.to_dict(),
            "edit_log": list(self.edit_log),
            "nodes": self.node_documents(),
            "edges": self.edge_documents(np.arange(len(self.edges))),
            # Multiple-testing context, informational only: how many tests the
            # scan ran and what a Bonferroni-adjusted threshold would be.
            "family_size": family,
            "bonferroni_max_p": self.filter_spec.max_p / family if family else None,
        }

    def view_document(self, spec: Optional[FilterSpec] = None) -> dict:
        """Filtered view: visible edges only, with their cycle labels."""
        spec = self.filter_spec if spec is None else spec
        idx = export_order(self.edges, np.flatnonzero(self.visible_mask(spec)))
        cycles = detect_cycles(self, spec)
        docs = self.edge_documents(idx)
        for d in docs:
            cid = cycles.label(d["j"], d["k"])
            d["cycle_id"] = cid if cid >= 0 else None
        family = len(self.edges)
        return {
            "alphabet": "".join(self.alphabet.symbols),
            "gap": self.alphabet.gap,
            "n": self.n,
            "filter": spec.to_dict(),
            "nodes": self.node_documents(),
            "edges": docs,
            "cycles": cycles.to_document()["components"],
            "family_size": family,
            "bonferroni_max_p": spec.max_p / family if family else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        return edges_to_csv(self.edges, state=[STATE_NAMES[s] for s in self.state])

    @classmethod
    def from_document(cls, doc: dict) -> "Metagraph":
        try:
            alphabet = Alphabet.from_text(doc["alphabet"], doc.get("gap", "-"))
            n = int(doc["n"])
            nodes = doc["nodes"]
            edges = doc["edges"]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"malformed graph document: {exc}") from exc
        if n < 2:
            raise SchemaViolation("n must be >= 2")
        cats = alphabet.categories
        cat_idx = {c: i for i, c in enumerate(cats)}
        L = len(nodes)
        if L < 2:
            raise SchemaViolation("graph needs at least two columns")

        marg = np.zeros((L, alphabet.size), dtype=np.int64)
        seen_cols = set()
        for nd in nodes:
            try:
                j = int(nd["index"])
                subs = nd["subnodes"]
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaViolation(f"malformed node: {exc}") from exc
            if j in seen_cols or not (0 <= j < L):
                raise SchemaViolation(f"bad or duplicate node index {j}")
            seen_cols.add(j)
            for sub in subs:
                c = sub.get("cat")
                if c not in cat_idx:
                    raise SchemaViolation(f"unknown category {c!r} at node {j}")
                cnt = int(round(float(sub.get("weight", 0.0)) * n))
                if cnt <= 0:
                    raise SchemaViolation(f"subnode ({j}, {c!r}) needs positive weight")
                if marg[j, cat_idx[c]] != 0:
                    raise SchemaViolation(f"duplicate subnode ({j}, {c!r})")
                marg[j, cat_idx[c]] = cnt
        bad = np.flatnonzero(marg.sum(axis=1) != n)
        if bad.size:
            raise SchemaViolation(f"column {bad[0]} weights do not sum to 1")

        E = len(edges)
        ej = np.empty(E, dtype=np.int32)
        ek = np.empty(E, dtype=np.int32)
        ecj = np.empty(E, dtype=np.uint8)
        eck = np.empty(E, dtype=np.uint8)
        eo = np.empty(E, dtype=np.int32)
        ep = np.empty(E, dtype=np.float64)
        states = np.empty(E, dtype=np.int8)
        seen_keys = set()
        for i, ed in enumerate(edges):
            try:
                j, k = int(ed["j"]), int(ed["k"])
                cj, ck = ed["cat_j"], ed["cat_k"]
                o = int(ed["observed"])
                p = float(ed["p"])
                st = ed.get("state", "normal")
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaViolation(f"malformed edge: {exc}") from exc
            if not (0 <= j < k < L):
                raise SchemaViolation(f"edge columns must satisfy 0 <= j < k < L, got ({j}, {k})")
            if cj not in cat_idx or ck not in cat_idx:
                raise SchemaViolation(f"unknown edge category in ({cj!r}, {ck!r})")
            key = edge_key(j, cj, k, ck)
            if key in seen_keys:
                raise SchemaViolation(f"duplicate edge key {key}")
            seen_keys.add(key)
            if not (0.0 <= p <= 1.0):
                raise SchemaViolation(f"p-value out of range on {key}")
            if o < 0 or o > min(marg[j, cat_idx[cj]], marg[k, cat_idx[ck]]):
                raise SchemaViolation(f"observed count exceeds marginal support on {key}")
            if st not in STATE_NAMES:
                raise SchemaViolation(f"unknown state {st!r} on {key}")
            ej[i], ek[i] = j, k
            ecj[i], eck[i] = cat_idx[cj], cat_idx[ck]
            eo[i] = o
            ep[i] = p
            states[i] = STATE_NAMES.index(st)

        edge_set = EdgeSet(ej, ek, ecj, eck, eo, ep, marg, n, cats)
        return cls(edge_set, state=states,
                   edit_log=list(doc.get("edit_log", [])),
                   filter_spec=FilterSpec.from_dict(doc.get("filter", {})))

    @classmethod
    def from_json(cls, text: str) -> "Metagraph":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"not JSON: {exc}") from exc
        return cls.from_document(doc)


def build_graph(edges: EdgeSet, marg: Optional[MarginalProfile] = None,
                filter_spec: FilterSpec = FilterSpec()) -> Metagraph:
    """Wrap a scanned edge set in a pristine graph (permissive filter, no edits).

    A separately supplied marginal profile must agree with the one the edges
    were scanned against, and every edge must reference supported subnodes.
    """
    if marg is not None:
        if marg.n != edges.n or not np.array_equal(marg.counts, edges.marg):
            raise InconsistentInputs("marginal profile does not match edge set")
    E = len(edges)
    for start in range(0, E, _CHUNK):
        sl = slice(start, min(E, start + _CHUNK))
        ok = ((edges.marg[edges.j[sl], edges.cj[sl]] > 0)
              & (edges.marg[edges.k[sl], edges.ck[sl]] > 0))
        if not ok.all():
            raise InconsistentInputs("edge references a zero-weight subnode")
    return Metagraph(edges, filter_spec=filter_spec)


# --- cycle detection -------------------------------------------------------

def biconnected_components(num_nodes: int,
                           edges: Sequence[tuple[int, int]]) -> list[list[int]]:
    """Edge-partitioning biconnected components of a simple undirected graph.

    Returns lists of edge indices, one per component (bridges come out as
    singleton components).  Iterative so deep paths cannot blow the stack.
    """
    adj: list[list[tuple[int, int]]] = [[] for _ in range(num_nodes)]
    for eid, (u, v) in enumerate(edges):
        adj[u].append((v, eid))
        adj[v].append((u, eid))

    disc = [-1] * num_nodes
    low = [0] * num_nodes
    comps: list[list[int]] = []
    estack: list[int] = []
    timer = 0

    for root in range(num_nodes):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = timer
        timer += 1
        frames: list[tuple[int, int, Iterable]] = [(root, -1, iter(adj[root]))]
        while frames:
            u, pe, it = frames[-1]
            descended = False
            for v, eid in it:
                if eid == pe:
                    continue
                if disc[v] == -1:
                    estack.append(eid)
                    disc[v] = low[v] = timer
                    timer += 1
                    frames.append((v, eid, iter(adj[v])))
                    descended = True
                    break
                if disc[v] < disc[u]:
                    estack.append(eid)
                    if disc[v] < low[u]:
                        low[u] = disc[v]
            if descended:
                continue
            frames.pop()
            if frames:
                pu = frames[-1][0]
                if low[u] < low[pu]:
                    low[pu] = low[u]
                if low[u] >= disc[pu]:
                    members = []
                    while True:
                        eid = estack.pop()
                        members.append(eid)
                        if eid == pe:
                            break
                    comps.append(members)
    return comps


@dataclass(frozen=True)
class CycleReport:
    """Cyclic blocks of the column projection of the visible view."""

    components: tuple[tuple[int, ...], ...]          # member columns, ascending
    pair_labels: dict                                # (j, k) -> component id

    def label(self, j: int, k: int) -> int:
        return self.pair_labels.get((j, k), -1)

    def to_document(self) -> dict:
        return {
            "components": [list(c) for c in self.components],
            "pair_labels": [{"j": j, "k": k, "cycle_id": cid}
                            for (j, k), cid in sorted(self.pair_labels.items())],
        }


def detect_cycles(graph: Metagraph, spec: Optional[FilterSpec] = None) -> CycleReport:
    """Biconnected components with >= 2 projected edges are cycles.

    Every visible subnode edge projects onto its column pair; a column pair
    inside a cyclic block gets that block's id, bridges get none.
    """
    idx = np.flatnonzero(graph.visible_mask(spec))
    if idx.size == 0:
        return CycleReport((), {})
    pid = graph.edges.j[idx].astype(np.int64) * graph.L + graph.edges.k[idx]
    upairs = np.unique(pid)
    pj = (upairs // graph.L).astype(int)
    pk = (upairs % graph.L).astype(int)
    cols = np.unique(np.concatenate([pj, pk]))
    col_id = {int(c): i for i, c in enumerate(cols)}
    elist = [(col_id[int(a)], col_id[int(b)]) for a, b in zip(pj, pk)]

    comps = biconnected_components(len(cols), elist)
    cyclic = [c for c in comps if len(c) >= 2]
    # Deterministic ids: order blocks by their smallest member column.
    keyed = []
    for members in cyclic:
        cset = sorted({int(cols[x]) for eid in members for x in elist[eid]})
        keyed.append((cset[0], tuple(cset), members))
    keyed.sort(key=lambda t: (t[0], t[1]))

    components = []
    pair_labels: dict = {}
    for cid, (_, cset, members) in enumerate(keyed):
        components.append(cset)
        for eid in members:
            pair_labels[(int(pj[eid]), int(pk[eid]))] = cid
    return CycleReport(tuple(components), pair_labels)

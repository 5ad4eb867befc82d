"""Closed-form log-linear sequence scoring from metagraph edge selections.

Node potentials are smoothed log column frequencies; edge potentials are
smoothed log observed/expected ratios for the selected subnode pairs.  A pair
that is in the model but observed with a category combination outside the
selection contributes a fixed floor penalty, so breaking a modelled
dependency costs roughly the gap between the floor and a satisfied term.
Everything is a plain table lookup: no inference, no normalization constant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .alignment_io import Alphabet
from .contingency import MarginalProfile
from .metagraph import (Metagraph, SchemaViolation, STATE_PINNED, edge_key)

__all__ = [
    "EmptySelection",
    "CrfModel",
    "ScoreReport",
    "build_crf",
    "pssm_score",
    "rank_variants",
    "DEFAULT_KAPPA",
]

DEFAULT_KAPPA = 0.5  # Jeffreys-style half count


class EmptySelection(ValueError):
    """A visible/pinned selection resolved to zero edges."""


def _node_terms(marg: np.ndarray, n: int, kappa: float) -> np.ndarray:
    K = marg.shape[1]
    return np.log((marg + kappa) / (n + kappa * K))


@dataclass(frozen=True)
class ScoreReport:
    """Itemized decomposition of one sequence's score."""

    id: Optional[str]
    total_log_score: float
    node_contribution: tuple[float, ...]
    edge_contribution: tuple[dict, ...]    # one entry per modelled column pair
    violated_edges: tuple[str, ...]        # selected edges half-matched by the row

    def to_document(self) -> dict:
        return {
            "id": self.id,
            "total_log_score": self.total_log_score,
            "node_contribution": list(self.node_contribution),
            "edge_contribution": [dict(e) for e in self.edge_contribution],
            "violated_edges": list(self.violated_edges),
        }


class CrfModel:
    """Frozen scoring tables: node terms, selected edge terms, floor penalty."""

    def __init__(self, alphabet: Alphabet, training_n: int, kappa: float,
                 node_terms: np.ndarray, edge_terms: list[dict],
                 selection_mode: str):
        self.alphabet = alphabet
        self.training_n = int(training_n)
        self.kappa = float(kappa)
        self.node_terms = np.asarray(node_terms, dtype=np.float64)
        self.selection_mode = selection_mode
        self.edge_terms = edge_terms      # dicts: key/j/cat_j/k/cat_k/observed/expected/term
        cats = alphabet.categories
        cat_idx = {c: i for i, c in enumerate(cats)}
        self._pair_terms: dict[tuple[int, int], dict[tuple[int, int], tuple[str, float]]] = {}
        for ed in edge_terms:
            pair = (ed["j"], ed["k"])
            combo = (cat_idx[ed["cat_j"]], cat_idx[ed["cat_k"]])
            bucket = self._pair_terms.setdefault(pair, {})
            if combo in bucket:
                raise SchemaViolation(f"duplicate edge {ed['key']} in model")
            bucket[combo] = (ed["key"], ed["term"])
        self.pairs = tuple(sorted(self._pair_terms))
        if edge_terms:
            self.e_min = min(ed["expected"] for ed in edge_terms)
            self.floor_term = math.log(kappa / (self.e_min + kappa))
        else:
            self.e_min = None
            self.floor_term = None

    @property
    def L(self) -> int:
        return self.node_terms.shape[0]

    @property
    def selected_keys(self) -> list[str]:
        return [ed["key"] for ed in self.edge_terms]

    # --- scoring ----------------------------------------------------------

    def _encode(self, row: str) -> np.ndarray:
        row = row.upper()
        if len(row) != self.L:
            raise ValueError(f"sequence length {len(row)} != model length {self.L}")
        return np.asarray([self.alphabet.code(c) for c in row], dtype=np.int64)

    def score(self, row: str, id: Optional[str] = None) -> ScoreReport:
        codes = self._encode(row)
        cats = self.alphabet.categories
        node_contr = self.node_terms[np.arange(self.L), codes]

        edge_contr = []
        violated = []
        total = float(node_contr.sum())
        for (j, k) in self.pairs:
            combo = (int(codes[j]), int(codes[k]))
            bucket = self._pair_terms[(j, k)]
            hit = bucket.get(combo)
            if hit is not None:
                key, term = hit
                floored = False
            else:
                key = edge_key(j, cats[combo[0]], k, cats[combo[1]])
                term = self.floor_term
                floored = True
            for (cj, ck), (ekey, _) in bucket.items():
                if (codes[j] == cj) != (codes[k] == ck):
                    violated.append(ekey)
            total += term
            edge_contr.append({"j": j, "k": k, "key": key, "term": term,
                               "floored": floored})
        return ScoreReport(
            id=id,
            total_log_score=total,
            node_contribution=tuple(float(x) for x in node_contr),
            edge_contribution=tuple(edge_contr),
            violated_edges=tuple(violated),
        )

    # --- serialization ----------------------------------------------------

    def to_document(self) -> dict:
        return {
            "alphabet": "".join(self.alphabet.symbols),
            "gap": self.alphabet.gap,
            "L": self.L,
            "kappa": self.kappa,
            "training_n": self.training_n,
            "node_terms": [[float(x) for x in row] for row in self.node_terms],
            "edge_terms": [dict(ed) for ed in self.edge_terms],
            "selection": {"mode": self.selection_mode, "keys": self.selected_keys},
            "e_min": self.e_min,
            "floor_term": self.floor_term,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_document(cls, doc: dict) -> "CrfModel":
        try:
            alphabet = Alphabet.from_text(doc["alphabet"], doc.get("gap", "-"))
            node_terms = np.asarray(doc["node_terms"], dtype=np.float64)
            edge_terms = [dict(ed) for ed in doc["edge_terms"]]
            mode = str(doc.get("selection", {}).get("mode", "explicit"))
            model = cls(alphabet, int(doc["training_n"]), float(doc["kappa"]),
                        node_terms, edge_terms, mode)
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise SchemaViolation(f"malformed model document: {exc}") from exc
        if node_terms.ndim != 2 or node_terms.shape[1] != alphabet.size:
            raise SchemaViolation("node_terms shape does not match alphabet")
        if "L" in doc and int(doc["L"]) != model.L:
            raise SchemaViolation("declared L does not match node_terms")
        for ed in edge_terms:
            if not (0 <= ed["j"] < ed["k"] < model.L):
                raise SchemaViolation(f"edge columns out of range: {ed['key']}")
        return model

    @classmethod
    def from_json(cls, text: str) -> "CrfModel":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"not JSON: {exc}") from exc
        return cls.from_document(doc)


def build_crf(graph: Metagraph,
              selection: Union[str, Sequence[str]] = "visible",
              kappa: float = DEFAULT_KAPPA) -> CrfModel:
    """Build a scoring model from a graph edge selection.

    ``selection`` is "visible" (current filter plus pins), "pinned-only", or
    an explicit list of edge keys.  The named modes raise EmptySelection when
    they resolve to nothing; an explicit empty list is allowed and yields a
    node-only model that ranks exactly like the PSSM baseline.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if isinstance(selection, str):
        if selection == "visible":
            idx = graph.visible_indices()
        elif selection in ("pinned-only", "pinned"):
            idx = np.flatnonzero(graph.state == STATE_PINNED)
            selection = "pinned-only"
        else:
            raise ValueError(f"unknown selection mode {selection!r}")
        if idx.size == 0:
            raise EmptySelection(f"selection {selection!r} matched no edges")
        mode = selection
    else:
        idx = np.asarray([graph.find_edge(k) for k in selection], dtype=np.int64)
        if np.unique(idx).size != idx.size:
            raise SchemaViolation("duplicate edge keys in explicit selection")
        mode = "explicit"

    cats = graph.categories
    es = graph.edges
    expected = es.expected(idx) if idx.size else np.empty(0)
    edge_terms = []
    for row, i in enumerate(idx):
        edge_terms.append({
            "key": edge_key(int(es.j[i]), cats[es.cj[i]], int(es.k[i]), cats[es.ck[i]]),
            "j": int(es.j[i]), "cat_j": cats[es.cj[i]],
            "k": int(es.k[i]), "cat_k": cats[es.ck[i]],
            "observed": int(es.observed[i]),
            "expected": float(expected[row]),
            "term": math.log((es.observed[i] + kappa) / (expected[row] + kappa)),
        })
    edge_terms.sort(key=lambda ed: (ed["j"], ed["k"], ed["cat_j"], ed["cat_k"]))
    node_terms = _node_terms(es.marg, es.n, kappa)
    return CrfModel(graph.alphabet, es.n, kappa, node_terms, edge_terms, mode)


def pssm_score(profile: MarginalProfile, row: str, kappa: float = DEFAULT_KAPPA) -> float:
    """Smoothed log-likelihood of a row under per-column frequencies alone."""
    row = row.upper()
    if len(row) != profile.L:
        raise ValueError(f"sequence length {len(row)} != profile length {profile.L}")
    cat_idx = {c: i for i, c in enumerate(profile.categories)}
    K = len(profile.categories)
    total = 0.0
    for j, c in enumerate(row):
        if c not in cat_idx:
            raise ValueError(f"symbol {c!r} not in profile categories")
        total += math.log((profile.counts[j, cat_idx[c]] + kappa) / (profile.n + kappa * K))
    return total


def rank_variants(model: CrfModel, rows: Sequence[str],
                  ids: Optional[Sequence[str]] = None,
                  reference: Optional[str] = None) -> list[dict]:
    """Score and sort variants (descending total; ties keep input order).

    log10_fold is each variant's score gap in decades to the designated
    reference sequence (by id), or to the top-ranked one when no reference is
    named -- the reference itself reads 0, i.e. relative activity 1.
    """
    if ids is None:
        ids = [f"seq{i}" for i in range(len(rows))]
    if len(ids) != len(rows):
        raise ValueError("ids and rows length mismatch")
    reports = [model.score(r, id=i) for r, i in zip(rows, ids)]
    order = sorted(range(len(rows)), key=lambda i: (-reports[i].total_log_score, i))
    if not order:
        return []
    if reference is None:
        ref_total = reports[order[0]].total_log_score
    else:
        matches = [r for r in reports if r.id == reference]
        if not matches:
            raise ValueError(f"reference id {reference!r} not among variants")
        ref_total = matches[0].total_log_score
    ranked = []
    for rank, i in enumerate(order):
        rep = reports[i]
        ranked.append({
            "rank": rank,
            "id": rep.id,
            "total_log_score": rep.total_log_score,
            "log10_fold": (rep.total_log_score - ref_total) / math.log(10),
            "violated_edges": list(rep.violated_edges),
            "report": rep.to_document(),
        })
    return ranked

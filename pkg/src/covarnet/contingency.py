"""Pairwise contingency statistics over alignment columns.

For every ordered column pair (j < k) and every category pair with nonzero
marginal support, we track observed co-occurrence counts, independence
expectations, raw and standardized residuals, and a two-sided Fisher exact
p-value on the presence/absence collapse of the full table.

The scan is built for large inputs (hundreds of columns, tens of categories)
on modest hardware: edge storage is columnar, only primitive columns are kept
(derived statistics are recomputed vectorized on demand), and Fisher p-values
are memoized per distinct (margin, margin, observed) triple.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .alignment_io import AlignmentMatrix

__all__ = [
    "MarginalProfile",
    "DependencyEdge",
    "EdgeSet",
    "marginal_counts",
    "marginal_profile",
    "joint_counts",
    "expected_counts",
    "standardized_residuals",
    "fisher_exact_p",
    "all_pairs_scan",
    "edges_to_csv",
    "export_order",
    "CSV_HEADER",
]

CSV_HEADER = "j,cat_j,k,cat_k,observed,expected,raw_residual,std_residual,p_value,state"

# Relative tolerance when deciding whether a hypergeometric point mass is
# "no larger than" the observed one (two-sided tail accumulation).
_TIE_LOG = math.log1p(1e-7)


# --- marginals and joints --------------------------------------------------

def marginal_counts(matrix: AlignmentMatrix) -> np.ndarray:
    """(L, K) per-column category counts, gap included as the last category."""
    K = matrix.alphabet.size
    out = np.zeros((matrix.L, K), dtype=np.int64)
    for j in range(matrix.L):
        out[j] = np.bincount(matrix.codes[:, j], minlength=K)
    return out


@dataclass(frozen=True)
class MarginalProfile:
    """Per-column category distribution (counts and frequencies) of a matrix."""

    counts: np.ndarray          # (L, K) int64
    n: int
    categories: tuple[str, ...]

    @property
    def freqs(self) -> np.ndarray:
        return self.counts / self.n

    @property
    def L(self) -> int:
        return self.counts.shape[0]


def marginal_profile(matrix: AlignmentMatrix) -> MarginalProfile:
    return MarginalProfile(marginal_counts(matrix), matrix.n, matrix.categories)


def joint_counts(matrix: AlignmentMatrix, j: int, k: int) -> np.ndarray:
    """(K, K) co-occurrence counts for columns j and k."""
    K = matrix.alphabet.size
    flat = matrix.codes[:, j].astype(np.int64) * K + matrix.codes[:, k]
    return np.bincount(flat, minlength=K * K).reshape(K, K)


def expected_counts(marg_j: np.ndarray, marg_k: np.ndarray, n: int) -> np.ndarray:
    """Independence expectations e = c_j c_k / n (outer product of margins)."""
    return np.outer(marg_j, marg_k) / n


def standardized_residuals(observed: np.ndarray, marg_j: np.ndarray,
                           marg_k: np.ndarray, n: int) -> np.ndarray:
    """Adjusted standardized Pearson residuals for a full joint table.

    z = (o - e) / sqrt(e (1 - p_j)(1 - p_k)); cells with zero denominator
    (a margin equal to n) have o == e exactly and are reported as 0.
    """
    e = expected_counts(marg_j, marg_k, n)
    pm = marg_j / n
    pn = marg_k / n
    denom2 = e * (1.0 - pm)[:, None] * (1.0 - pn)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (observed - e) / np.sqrt(denom2)
    return np.where(denom2 > 0, z, 0.0)


# --- Fisher exact test -----------------------------------------------------

_logfact = np.zeros(1)


def _logfact_table(upto: int) -> np.ndarray:
    """Grow-on-demand table of log(m!) for m in 0..upto."""
    global _logfact
    if upto >= _logfact.size:
        hi = max(upto + 1, 2 * _logfact.size)
        _logfact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, hi)))))
    return _logfact


def _log_fisher(n: int, r1: int, c1: int, a: int) -> float:
    """log of the two-sided Fisher p for a 2x2 table with margins (r1, c1), total n.

    All point masses within a 1e-7 relative factor of the observed one are
    included in the tail sum; everything stays in log space so the test is
    stable for totals of 10^4 and beyond.
    """
    lo = max(0, r1 + c1 - n)
    hi = min(r1, c1)
    if lo == hi:
        return 0.0
    lf = _logfact_table(n)
    x = np.arange(lo, hi + 1)
    lpmf = ((lf[r1] - lf[x] - lf[r1 - x])
            + (lf[n - r1] - lf[c1 - x] - lf[n - r1 - c1 + x])
            - (lf[n] - lf[c1] - lf[n - c1]))
    sel = lpmf <= lpmf[a - lo] + _TIE_LOG
    m = lpmf[sel].max()
    return min(0.0, m + math.log(np.exp(lpmf[sel] - m).sum()))


# Smallest positive double: p-values beyond float range clamp here so the
# result stays inside (0, 1) instead of collapsing to an exact zero.
_P_FLOOR = 5e-324


def _exp_clamped(log_p: float) -> float:
    p = math.exp(log_p)
    if p == 0.0:
        return _P_FLOOR
    return min(1.0, p)


@lru_cache(maxsize=1 << 18)
def _fisher_cached(n: int, r1: int, c1: int, a: int) -> float:
    return _exp_clamped(_log_fisher(n, r1, c1, a))


def fisher_exact_p(a: int, b: int, c: int, d: int) -> float:
    """Two-sided Fisher exact p-value for the 2x2 table [[a, b], [c, d]]."""
    for v in (a, b, c, d):
        if v < 0 or v != int(v):
            raise ValueError("table cells must be non-negative integers")
    a, b, c, d = int(a), int(b), int(c), int(d)
    n = a + b + c + d
    if n == 0:
        raise ValueError("table must contain at least one observation")
    r1, c1 = a + b, a + c
    if r1 == 0 or r1 == n or c1 == 0 or c1 == n:
        return 1.0  # degenerate margin: the observed table is the only one
    # Transpose symmetry keeps the cache key space small.
    if r1 < c1:
        r1, c1 = c1, r1
    return _fisher_cached(n, r1, c1, a)


# --- edge storage ----------------------------------------------------------

@dataclass(frozen=True)
class DependencyEdge:
    """One subnode pair (column j category M -- column k category N)."""

    j: int
    cat_j: str
    k: int
    cat_k: str
    observed: int
    expected: float
    raw_residual: float
    std_residual: float
    p_value: float


class EdgeSet:
    """Columnar store of all scanned subnode pairs for one matrix.

    Only primitive columns (indices, category codes, observed counts,
    p-values) are materialized; expected counts and residuals are derived
    from the marginal profile on demand, whole-array or per chunk, so an
    84M-edge scan of a 500-column, 26-symbol family fits in a few GB.
    """

    def __init__(self, j, k, cj, ck, observed, p,
                 marg: np.ndarray, n: int, categories: tuple[str, ...]):
        self.j = np.asarray(j, dtype=np.int32)
        self.k = np.asarray(k, dtype=np.int32)
        self.cj = np.asarray(cj, dtype=np.uint8)
        self.ck = np.asarray(ck, dtype=np.uint8)
        self.observed = np.asarray(observed, dtype=np.int32)
        self.p = np.asarray(p, dtype=np.float64)
        self.marg = marg
        self.n = int(n)
        self.categories = categories

    def __len__(self) -> int:
        return self.j.size

    # Derived statistics.  `idx` may be a slice, mask, or index array; None
    # means the whole set (avoid on very large scans -- chunk instead).

    def expected(self, idx=None) -> np.ndarray:
        idx = slice(None) if idx is None else idx
        j, k = self.j[idx], self.k[idx]
        return (self.marg[j, self.cj[idx]] * self.marg[k, self.ck[idx]]) / self.n

    def raw_residual(self, idx=None) -> np.ndarray:
        idx = slice(None) if idx is None else idx
        return self.observed[idx] - self.expected(idx)

    def std_residual(self, idx=None) -> np.ndarray:
        idx = slice(None) if idx is None else idx
        j, k = self.j[idx], self.k[idx]
        e = self.expected(idx)
        pm = self.marg[j, self.cj[idx]] / self.n
        pn = self.marg[k, self.ck[idx]] / self.n
        denom2 = e * (1.0 - pm) * (1.0 - pn)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (self.observed[idx] - e) / np.sqrt(denom2)
        return np.where(denom2 > 0, z, 0.0)

    def edge(self, i: int) -> DependencyEdge:
        idx = np.asarray([i])
        return DependencyEdge(
            j=int(self.j[i]), cat_j=self.categories[self.cj[i]],
            k=int(self.k[i]), cat_k=self.categories[self.ck[i]],
            observed=int(self.observed[i]),
            expected=float(self.expected(idx)[0]),
            raw_residual=float(self.raw_residual(idx)[0]),
            std_residual=float(self.std_residual(idx)[0]),
            p_value=float(self.p[i]),
        )

    def __iter__(self):
        return (self.edge(i) for i in range(len(self)))

    def subset(self, idx) -> "EdgeSet":
        return EdgeSet(self.j[idx], self.k[idx], self.cj[idx], self.ck[idx],
                       self.observed[idx], self.p[idx],
                       self.marg, self.n, self.categories)

    def pair_count(self) -> int:
        """Number of distinct column pairs represented."""
        if len(self) == 0:
            return 0
        pid = self.j.astype(np.int64) * (self.marg.shape[0]) + self.k
        return int(np.unique(pid).size)

    def find(self, j: int, cat_j: str, k: int, cat_k: str) -> int:
        """Index of one edge, or -1.  Columns are stored with j < k."""
        if j > k:
            j, k, cat_j, cat_k = k, j, cat_k, cat_j
        cj = self.categories.index(cat_j)
        ck = self.categories.index(cat_k)
        hits = np.flatnonzero((self.j == j) & (self.k == k)
                              & (self.cj == cj) & (self.ck == ck))
        return int(hits[0]) if hits.size else -1


# --- the scan --------------------------------------------------------------

def _pack_keys(m1: np.ndarray, m2: np.ndarray, a: np.ndarray) -> np.ndarray:
    hi = np.maximum(m1, m2).astype(np.int64)
    lo = np.minimum(m1, m2).astype(np.int64)
    return (hi << 42) | (lo << 21) | a.astype(np.int64)


def all_pairs_scan(matrix: AlignmentMatrix,
                   pairs: Optional[Iterable[tuple[int, int]]] = None) -> EdgeSet:
    """Scan column pairs (all j < k by default) into an EdgeSet.

    Cells whose row or column marginal is zero are omitted.  Joint tables are
    accumulated with one bincount per left column covering every partner at
    once; Fisher p-values are resolved through a per-scan memo keyed on the
    packed (margin, margin, observed) triple.
    """
    codes = matrix.codes
    n, L = codes.shape
    K = matrix.alphabet.size
    marg = marginal_counts(matrix)
    present = [np.flatnonzero(marg[j]).astype(np.int64) for j in range(L)]
    sizes = np.array([p.size for p in present])

    if pairs is None:
        by_left: dict[int, list[int]] = {j: list(range(j + 1, L)) for j in range(L - 1)}
    else:
        by_left = {}
        for a, b in pairs:
            if a == b:
                raise ValueError("column paired with itself")
            if a > b:
                a, b = b, a
            by_left.setdefault(a, []).append(b)

    total = sum(int(sizes[j]) * int(sizes[k]) for j, ks in by_left.items() for k in ks)
    out_j = np.empty(total, dtype=np.int32)
    out_k = np.empty(total, dtype=np.int32)
    out_cj = np.empty(total, dtype=np.uint8)
    out_ck = np.empty(total, dtype=np.uint8)
    out_o = np.empty(total, dtype=np.int32)
    out_p = np.empty(total, dtype=np.float64)

    fisher_memo: dict[int, float] = {}
    KK = K * K
    pos = 0
    for j in sorted(by_left):
        ks = sorted(by_left[j])
        if not ks:
            continue
        karr = np.asarray(ks, dtype=np.int64)
        B = karr.size
        flat = codes[:, karr].astype(np.int32)
        flat += codes[:, j].astype(np.int32)[:, None] * K
        flat += (np.arange(B, dtype=np.int32) * KK)[None, :]
        cnt = np.bincount(flat.ravel(), minlength=B * KK).reshape(B, K, K)

        batch_start = pos
        mj_all = marg[j]
        pj = present[j]
        mj = mj_all[pj]
        sj = pj.size
        for t, k in enumerate(ks):
            pk = present[k]
            sk = pk.size
            m = sj * sk
            o = cnt[t][np.ix_(pj, pk)].ravel()
            sl = slice(pos, pos + m)
            out_j[sl] = j
            out_k[sl] = k
            out_cj[sl] = np.repeat(pj, sk)
            out_ck[sl] = np.tile(pk, sj)
            out_o[sl] = o
            pos += m

        # Resolve Fisher p-values for this left column's whole batch.
        bsl = slice(batch_start, pos)
        m1 = marg[out_j[bsl], out_cj[bsl]]
        m2 = marg[out_k[bsl], out_ck[bsl]]
        keys = _pack_keys(m1, m2, out_o[bsl].astype(np.int64))
        uniq, inv = np.unique(keys, return_inverse=True)
        p_uniq = np.empty(uniq.size, dtype=np.float64)
        for i, key in enumerate(uniq):
            pv = fisher_memo.get(int(key))
            if pv is None:
                kk = int(key)
                a = kk & ((1 << 21) - 1)
                lo = (kk >> 21) & ((1 << 21) - 1)
                hi = kk >> 42
                if hi == 0 or hi == n or lo == 0 or lo == n:
                    pv = 1.0
                else:
                    pv = _exp_clamped(_log_fisher(n, hi, lo, a))
                fisher_memo[int(key)] = pv
            p_uniq[i] = pv
        out_p[bsl] = p_uniq[inv]

    assert pos == total
    return EdgeSet(out_j, out_k, out_cj, out_ck, out_o, out_p,
                   marg, n, matrix.categories)


# --- CSV export ------------------------------------------------------------

def _g10(x: float) -> str:
    return "%.10g" % x


def export_order(edges: EdgeSet, idx: Optional[np.ndarray] = None) -> np.ndarray:
    """Edge indices sorted by (j, k, M, N); categories rank in alphabet order."""
    if idx is None:
        idx = np.arange(len(edges))
    else:
        idx = np.asarray(idx)
    order = np.lexsort((edges.ck[idx], edges.cj[idx], edges.k[idx], edges.j[idx]))
    return idx[order]


def edges_to_csv(edges: EdgeSet, state: Optional[Sequence[str]] = None,
                 idx: Optional[np.ndarray] = None) -> str:
    """Render edges as CSV, sorted by (j, k, cat_j, cat_k), floats as %.10g.

    `state` supplies the per-edge state column (default "normal"); both it and
    `idx` are aligned with the underlying edge set indices.
    """
    idx = export_order(edges, idx)
    cats = edges.categories
    e = edges.expected(idx)
    raw = edges.raw_residual(idx)
    z = edges.std_residual(idx)
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for row, i in enumerate(idx):
        st = "normal" if state is None else state[i]
        buf.write(f"{edges.j[i]},{cats[edges.cj[i]]},{edges.k[i]},{cats[edges.ck[i]]},"
                  f"{edges.observed[i]},{_g10(e[row])},{_g10(raw[row])},"
                  f"{_g10(z[row])},{_g10(edges.p[i])}," + st + "\n")
    return buf.getvalue()

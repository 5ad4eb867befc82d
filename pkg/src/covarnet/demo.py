"""Bundled demo family: a 9-column nucleotide toy with two stem couplings.

Columns 0-8 mimic a hairpin: (0, 8) and (1, 7) carry complementary pairs,
column 4 is nearly conserved, the rest of the loop drifts.  Deterministic by
construction so exports are stable across runs.
"""

from __future__ import annotations

import numpy as np

from .alignment_io import AlignmentMatrix, from_rows

__all__ = ["demo_rows", "demo_matrix", "demo_shifted_rows", "demo_shifted_matrix"]

_COMPLEMENT = {"A": "T", "T": "A", "C": "G", "G": "C"}


def demo_rows(n: int = 48, seed: int = 7) -> list[str]:
    rng = np.random.RandomState(seed)
    bases = np.array(list("ACGT"))
    rows = []
    for _ in range(n):
        left = rng.choice(["G", "C"])
        left2 = rng.choice(["A", "T"])
        loop = rng.choice(bases, size=5)
        loop[2] = "T" if rng.rand() > 0.05 else loop[2]  # near-conserved center
        row = [left, left2, *loop, _COMPLEMENT[left2], _COMPLEMENT[left]]
        if rng.rand() < 0.06:  # occasional noisy cell breaks a stem pair
            row[rng.randint(9)] = rng.choice(bases)
        rows.append("".join(row))
    return rows


def demo_matrix(n: int = 48, seed: int = 7) -> AlignmentMatrix:
    return from_rows(demo_rows(n=n, seed=seed))


def demo_shifted_rows(n: int = 150, seed: int = 11) -> list[str]:
    """12-column family with a two-state coupled pair at (4, 6), where 40% of
    rows were pushed one column right -- realignment bait."""
    rng = np.random.RandomState(seed)
    bases = np.array(list("ACGT"))
    rows = []
    for _ in range(n):
        row = list(rng.choice(bases, size=12))
        if rng.rand() < 0.5:
            row[4], row[6] = "C", "G"
        else:
            row[4], row[6] = "A", "T"
        if rng.rand() < 0.03:  # small compliance break
            row[6] = rng.choice(bases)
        text = "".join(row)
        if rng.rand() < 0.4:
            text = "-" + text[:11]
        rows.append(text)
    return rows


def demo_shifted_matrix(n: int = 150, seed: int = 11) -> AlignmentMatrix:
    return from_rows(demo_shifted_rows(n=n, seed=seed))

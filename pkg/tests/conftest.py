import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from covarnet import AlignmentMatrix, Alphabet, from_rows  # noqa: E402


def random_rows(rng: np.random.RandomState, n: int, L: int, symbols: str,
                gap_prob: float = 0.0) -> list[str]:
    rows = []
    for _ in range(n):
        chars = [symbols[rng.randint(len(symbols))] for _ in range(L)]
        if gap_prob:
            for i in range(L):
                if rng.rand() < gap_prob:
                    chars[i] = "-"
        rows.append("".join(chars))
    return rows


def random_matrix(rng: np.random.RandomState, n: int, L: int, symbols: str,
                  gap_prob: float = 0.0) -> AlignmentMatrix:
    # Pin the alphabet so all-symbols-absent draws cannot shrink it.
    return from_rows(random_rows(rng, n, L, symbols, gap_prob),
                     alphabet=Alphabet.from_text(symbols))


@pytest.fixture
def rng() -> np.random.RandomState:
    return np.random.RandomState(1234)

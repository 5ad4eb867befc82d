"""Categorical alignment matrices: alphabets, parsing, validation, serialization.

A matrix is a rectangular block of single-character category symbols, one row
per sequence, one column per position.  The gap character is carried as an
extra pseudo-category so that downstream counting treats gapped cells like any
other category instead of silently dropping rows.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "AlignmentError",
    "EmptyInputError",
    "RaggedRowsError",
    "AlphabetOverflowError",
    "InvalidAlignmentError",
    "Alphabet",
    "AlignmentMatrix",
    "parse_alignment",
    "validate",
]

MAX_SYMBOLS = 26

# Symbols are restricted to characters that are safe inside edge keys and URLs.
_SYMBOL_RE = re.compile(r"[A-Z0-9]")


class AlignmentError(ValueError):
    """Base class for alignment construction failures."""


class EmptyInputError(AlignmentError):
    """No rows or no columns."""


class RaggedRowsError(AlignmentError):
    """Rows of unequal length."""


class AlphabetOverflowError(AlignmentError):
    """More than MAX_SYMBOLS distinct non-gap symbols."""


class InvalidAlignmentError(AlignmentError):
    """Anything else structurally wrong (bad symbol, too few rows/columns...)."""


@dataclass(frozen=True)
class Alphabet:
    """Ordered non-gap category symbols plus a distinguished gap character.

    The gap is modelled as a trailing pseudo-category: a matrix over S symbols
    has K = S + 1 category codes, with the gap always mapped to code S.
    """

    symbols: tuple[str, ...]
    gap: str = "-"

    def __post_init__(self):
        if not (1 <= len(self.symbols) <= MAX_SYMBOLS):
            raise AlphabetOverflowError(
                f"alphabet must have 1..{MAX_SYMBOLS} symbols, got {len(self.symbols)}"
            )
        if len(set(self.symbols)) != len(self.symbols):
            raise InvalidAlignmentError("duplicate symbols in alphabet")
        for s in self.symbols:
            if len(s) != 1 or not _SYMBOL_RE.fullmatch(s):
                raise InvalidAlignmentError(f"unsupported symbol {s!r} (want A-Z or 0-9)")
        if len(self.gap) != 1 or self.gap in self.symbols:
            raise InvalidAlignmentError(f"bad gap character {self.gap!r}")

    @property
    def categories(self) -> tuple[str, ...]:
        """All category symbols, gap last."""
        return self.symbols + (self.gap,)

    @property
    def size(self) -> int:
        """Number of categories including the gap pseudo-category."""
        return len(self.symbols) + 1

    @property
    def gap_code(self) -> int:
        return len(self.symbols)

    def code(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise InvalidAlignmentError(f"symbol {symbol!r} not in alphabet") from None

    @property
    def _index(self) -> dict:
        # Cached on first use; object.__setattr__ sidesteps frozen=True.
        idx = self.__dict__.get("_index_cache")
        if idx is None:
            idx = {s: i for i, s in enumerate(self.categories)}
            object.__setattr__(self, "_index_cache", idx)
        return idx

    @classmethod
    def from_text(cls, symbols: str, gap: str = "-") -> "Alphabet":
        return cls(tuple(symbols), gap)


@dataclass(frozen=True)
class AlignmentMatrix:
    """n x L rectangular matrix of category codes over a fixed alphabet.

    ``codes`` holds uint8 category codes (gap included); at least two rows and
    two columns are required since every downstream statistic is pairwise.
    """

    alphabet: Alphabet
    codes: np.ndarray
    row_ids: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.uint8)
        if codes.ndim != 2:
            raise InvalidAlignmentError("codes must be 2-D")
        n, L = codes.shape
        if n == 0 or L == 0:
            raise EmptyInputError("empty alignment")
        if n < 2 or L < 2:
            raise InvalidAlignmentError(
                f"alignment must be at least 2 x 2 for pairwise statistics, got {n} x {L}"
            )
        if codes.max(initial=0) >= self.alphabet.size:
            raise InvalidAlignmentError("category code out of range for alphabet")
        if self.row_ids is not None and len(self.row_ids) != n:
            raise InvalidAlignmentError("row_ids length does not match row count")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    @property
    def L(self) -> int:
        return self.codes.shape[1]

    @property
    def categories(self) -> tuple[str, ...]:
        return self.alphabet.categories

    def row_string(self, i: int) -> str:
        cats = self.categories
        return "".join(cats[c] for c in self.codes[i])

    def rows(self) -> list[str]:
        return [self.row_string(i) for i in range(self.n)]

    def with_codes(self, codes: np.ndarray) -> "AlignmentMatrix":
        """Same alphabet/ids, new code block (used by shift application)."""
        return AlignmentMatrix(self.alphabet, codes, self.row_ids)

    # --- serialization -----------------------------------------------------

    def to_document(self) -> dict:
        return {
            "alphabet": "".join(self.alphabet.symbols),
            "gap": self.alphabet.gap,
            "row_ids": list(self.row_ids) if self.row_ids is not None else None,
            "rows": self.rows(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_document(cls, doc: dict) -> "AlignmentMatrix":
        try:
            alphabet = Alphabet.from_text(doc["alphabet"], doc.get("gap", "-"))
            rows = doc["rows"]
            row_ids = doc.get("row_ids")
        except (KeyError, TypeError) as exc:
            raise InvalidAlignmentError(f"malformed alignment document: {exc}") from exc
        return from_rows(rows, alphabet=alphabet,
                         row_ids=tuple(row_ids) if row_ids else None)

    @classmethod
    def from_json(cls, text: str) -> "AlignmentMatrix":
        return cls.from_document(json.loads(text))


def from_rows(rows: Sequence[str], alphabet: Optional[Alphabet] = None,
              row_ids: Optional[tuple[str, ...]] = None, gap: str = "-") -> AlignmentMatrix:
    """Build a matrix from row strings, inferring a sorted alphabet if absent."""
    rows = [r.upper() for r in rows]
    if not rows:
        raise EmptyInputError("no rows")
    L = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != L:
            raise RaggedRowsError(f"row {i} has length {len(r)}, expected {L}")
    if L == 0:
        raise EmptyInputError("rows have zero length")

    if alphabet is None:
        seen = sorted(set("".join(rows)) - {gap})
        bad = [s for s in seen if not _SYMBOL_RE.fullmatch(s)]
        if bad:
            raise InvalidAlignmentError(f"unsupported symbols {bad!r} (want A-Z or 0-9)")
        if len(seen) > MAX_SYMBOLS:
            raise AlphabetOverflowError(
                f"{len(seen)} distinct symbols exceed the {MAX_SYMBOLS}-symbol limit"
            )
        if not seen:
            raise InvalidAlignmentError("alignment contains only gap characters")
        alphabet = Alphabet(tuple(seen), gap)

    lut = np.full(256, 255, dtype=np.uint8)
    for i, c in enumerate(alphabet.categories):
        lut[ord(c)] = i
    raw = np.frombuffer("".join(rows).encode("ascii", "replace"), dtype=np.uint8)
    codes = lut[raw].reshape(len(rows), L)
    if (codes == 255).any():
        i, j = np.argwhere(codes == 255)[0]
        raise InvalidAlignmentError(f"symbol {rows[i][j]!r} at row {i}, column {j} "
                                    "not in alphabet")
    return AlignmentMatrix(alphabet, codes, row_ids)


def parse_alignment(text: str, fmt: str = "auto",
                    alphabet: Optional[Alphabet] = None, gap: str = "-") -> AlignmentMatrix:
    """Parse plain row-per-line or FASTA-like text into a matrix.

    ``fmt`` is "plain", "fasta", or "auto" (FASTA iff the first non-blank
    character is '>').  Input is case-insensitive; symbols are upper-cased.
    """
    stripped = text.strip()
    if not stripped:
        raise EmptyInputError("empty input")
    if fmt == "auto":
        fmt = "fasta" if stripped.lstrip()[0] == ">" else "plain"

    if fmt == "plain":
        rows = [ln.strip() for ln in stripped.splitlines() if ln.strip()]
        return from_rows(rows, alphabet=alphabet, gap=gap)

    if fmt == "fasta":
        ids: list[str] = []
        rows: list[str] = []
        current: list[str] = []
        for ln in stripped.splitlines():
            ln = ln.strip()
            if not ln:
                continue
            if ln.startswith(">"):
                if ids:
                    rows.append("".join(current))
                ids.append(ln[1:].strip() or f"seq{len(ids)}")
                current = []
            else:
                if not ids:
                    raise InvalidAlignmentError("sequence data before first FASTA header")
                current.append(ln)
        if ids:
            rows.append("".join(current))
        if not rows:
            raise EmptyInputError("no FASTA records")
        return from_rows(rows, alphabet=alphabet, row_ids=tuple(ids), gap=gap)

    raise ValueError(f"unknown format {fmt!r}")


@dataclass(frozen=True)
class ColumnSummary:
    index: int
    counts: dict
    constant: bool
    all_gap: bool


@dataclass(frozen=True)
class ValidationReport:
    n: int
    L: int
    columns: tuple[ColumnSummary, ...]

    @property
    def constant_columns(self) -> list[int]:
        return [c.index for c in self.columns if c.constant]

    @property
    def all_gap_columns(self) -> list[int]:
        return [c.index for c in self.columns if c.all_gap]


def validate(matrix: AlignmentMatrix) -> ValidationReport:
    """Per-column category coverage plus constant / all-gap flags."""
    cats = matrix.categories
    cols = []
    for j in range(matrix.L):
        counts = np.bincount(matrix.codes[:, j], minlength=matrix.alphabet.size)
        present = {cats[c]: int(counts[c]) for c in np.nonzero(counts)[0]}
        cols.append(ColumnSummary(
            index=j,
            counts=present,
            constant=len(present) == 1,
            all_gap=present.keys() == {matrix.alphabet.gap},
        ))
    return ValidationReport(n=matrix.n, L=matrix.L, columns=tuple(cols))

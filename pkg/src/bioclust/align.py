"""Pairwise global alignment of re-coded log lines.

Gap runs follow the usual affine convention: a run of ``g`` gap columns costs
``gap_open + (g - 1) * gap_extend``.  Among equal-score alignments the
traceback prefers a diagonal step, then a gap in ``b``, then a gap in ``a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import ConfigError, DataError
from .recoder import BioSequence, EncodingMode, decode_full

__all__ = [
    "ScoringScheme",
    "UNIT",
    "EVAL",
    "PRESETS",
    "Alignment",
    "align",
    "similarity",
    "meets_threshold",
    "kmer_filter",
    "required_shared_kmers",
    "render_diff",
    "DiffRows",
    "SLACK",
]

# absorbs decimal representation error of thresholds such as 0.86
SLACK = 1e-9


@dataclass(frozen=True)
class ScoringScheme:
    match: int
    mismatch: int
    gap_open: int
    gap_extend: int

    def __post_init__(self):
        if not (self.match > 0 and self.mismatch < 0 and self.gap_open <= self.gap_extend < 0):
            raise ConfigError(
                "scoring scheme must satisfy match > 0, mismatch < 0, gap_open <= gap_extend < 0; "
                f"got {self}"
            )

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.match, self.mismatch, self.gap_open, self.gap_extend)

    @classmethod
    def parse(cls, value) -> "ScoringScheme":
        """Accept a preset name or ``"match,mismatch,open,extend"``."""
        if isinstance(value, cls):
            return value
        value = str(value).strip()
        if value in PRESETS:
            return PRESETS[value]
        try:
            parts = [int(p) for p in value.split(",")]
        except ValueError:
            raise ConfigError(f"unknown scoring scheme {value!r}") from None
        if len(parts) != 4:
            raise ConfigError(f"scoring scheme needs four integers, got {value!r}")
        return cls(*parts)

    def name(self) -> str:
        for key, preset in PRESETS.items():
            if preset == self:
                return key
        return ",".join(str(v) for v in self.as_tuple())


UNIT = ScoringScheme(1, -1, -1, -1)
EVAL = ScoringScheme(6, -5, -11, -1)
PRESETS = {"unit": UNIT, "eval": EVAL}


@dataclass(frozen=True)
class Alignment:
    aligned_a: str
    aligned_b: str
    score: int
    identical: int
    length: int
    gaps: int
    mode: EncodingMode | None = None

    @property
    def mismatches(self) -> int:
        return self.length - self.identical - self.gaps

    @property
    def similarity(self) -> float:
        return similarity(self)


def _codes(seq):
    if isinstance(seq, BioSequence):
        return seq.codes
    return seq


def align_stats(a: np.ndarray, b: np.ndarray, scheme: ScoringScheme, banded: bool = True):
    """``(score, identical, length, gaps)`` of the optimal alignment of two code arrays."""
    ops = np.empty(a.shape[0] + b.shape[0], dtype=np.uint8)
    return _kernels.gotoh(a, b, *scheme.as_tuple(), banded, ops)


def align(a: BioSequence, b: BioSequence, scheme: ScoringScheme = EVAL, banded: bool = True) -> Alignment:
    """Optimal global alignment of ``a`` and ``b`` under ``scheme``."""
    if len(a) == 0 or len(b) == 0:
        raise DataError("cannot align an empty sequence")
    if a.mode != b.mode:
        raise DataError("incomparable encodings")
    ca, cb = a.codes, b.codes
    ops = np.empty(ca.shape[0] + cb.shape[0], dtype=np.uint8)
    score, identical, length, gaps = _kernels.gotoh(ca, cb, *scheme.as_tuple(), banded, ops)
    row_a, row_b = [], []
    i = j = 0
    for op in ops[:length][::-1]:
        if op == _kernels.OP_DIAG:
            row_a.append(a.symbols[i])
            row_b.append(b.symbols[j])
            i += 1
            j += 1
        elif op == _kernels.OP_GAP_B:
            row_a.append(a.symbols[i])
            row_b.append("-")
            i += 1
        else:
            row_a.append("-")
            row_b.append(b.symbols[j])
            j += 1
    return Alignment("".join(row_a), "".join(row_b), int(score), int(identical), int(length), int(gaps), a.mode)


def similarity(alignment: Alignment) -> float:
    """Identical columns over alignment columns."""
    if alignment.length <= 0:
        raise DataError("similarity of an empty alignment is undefined")
    return alignment.identical / alignment.length


def exact_similarity(alignment: Alignment) -> Fraction:
    if alignment.length <= 0:
        raise DataError("similarity of an empty alignment is undefined")
    return Fraction(alignment.identical, alignment.length)


def meets_threshold(identical: int, length: int, threshold: float) -> bool:
    """``identical / length >= threshold`` with :data:`SLACK` tolerance."""
    return identical >= (threshold - SLACK) * length


def required_shared_kmers(length: int, threshold: float, k: int) -> int:
    """Fewest shared k-mers a sequence of ``length`` keeps at identity >= ``threshold``.

    At identity ``x`` at most ``u <= (1-x)L`` positions are non-identical and,
    from ``L - u >= x(L + g)``, at most ``g <= ((1-x)L - u)/x`` symbols are
    inserted against it.  Each non-identical position breaks at most ``k``
    words and each insertion at most ``k - 1``, so the number of broken words
    is bounded by ``(1-x) L max(k, (k-1)/x)``.
    """
    x = threshold - SLACK
    if x <= 0:
        return 0
    broken = math.floor((1.0 - x) * length * max(k, (k - 1) / x) + 1e-9)
    return (length - k + 1) - broken


def kmer_filter(a: BioSequence, b: BioSequence, k: int = 5, threshold: float = 0.9) -> bool:
    """False only when ``a`` and ``b`` cannot align at similarity >= ``threshold``."""
    if k < 1:
        raise ConfigError("word length k must be >= 1")
    ca, cb = _codes(a), _codes(b)
    if len(ca) < k or len(cb) < k:
        return True
    need = max(required_shared_kmers(len(ca), threshold, k), required_shared_kmers(len(cb), threshold, k))
    if need <= 0:
        return True
    shared = _kernels.shared_count(_kernels.kmer_codes(ca, k), _kernels.kmer_codes(cb, k))
    return shared >= need


@dataclass(frozen=True)
class DiffRows:
    query: str
    aligned: str
    subject: str
    diff: str


def _byte_columns(alignment: Alignment):
    """Project a symbol alignment of FULL-mode sequences onto byte columns.

    A byte of ``a`` is paired with a byte of ``b`` the first time any of their
    symbols share a column, provided the pairing keeps both byte orders
    monotone; unpaired bytes become gap columns.
    """
    pairs = []
    last_i = last_j = -1
    pa = pb = 0
    for sa, sb in zip(alignment.aligned_a, alignment.aligned_b):
        i = j = None
        if sa != "-":
            i = pa // 2
            pa += 1
        if sb != "-":
            j = pb // 2
            pb += 1
        if i is not None and j is not None and i > last_i and j > last_j:
            pairs.append((i, j))
            last_i, last_j = i, j
    n_a, n_b = pa // 2, pb // 2
    cols = []
    i = j = 0
    for pi, pj in pairs + [(n_a, n_b)]:
        while i < pi:
            cols.append((i, None))
            i += 1
        while j < pj:
            cols.append((None, j))
            j += 1
        if pi < n_a or pj < n_b:
            cols.append((pi, pj))
            i, j = pi + 1, pj + 1
    return cols


def render_diff(alignment: Alignment, a_text: bytes, b_text: bytes) -> DiffRows:
    """Aligned original lines with 'X' at substitutions and '-' at gaps."""
    if alignment.mode is not EncodingMode.FULL:
        raise DataError("diff rendering requires lossless mode")
    if decode_full(alignment.aligned_a.replace("-", "")) != a_text or \
            decode_full(alignment.aligned_b.replace("-", "")) != b_text:
        raise DataError("texts do not match the aligned sequences")
    q, al, s, d = [], [], [], []
    for i, j in _byte_columns(alignment):
        ca = chr(a_text[i]) if i is not None else "-"
        cb = chr(b_text[j]) if j is not None else "-"
        q.append(ca)
        s.append(cb)
        if i is None or j is None:
            al.append(" ")
            d.append("-")
        elif a_text[i] == b_text[j]:
            al.append(ca)
            d.append(" ")
        else:
            al.append("X")
            d.append("X")
    return DiffRows("".join(q), "".join(al), "".join(s), "".join(d))

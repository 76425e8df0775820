"""Similarity scores: floating and fixed-point Euclidean, Hamming, DTW.

All metrics are distances: lower means more similar. The fixed-point
Euclidean path performs no floating arithmetic anywhere, mirroring an
integer-only smart-contract implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bits import BitString
from .errors import (
    DimensionError,
    DomainError,
    EvalProtocolError,
    IntegerOverflowError,
    RangeError,
)
from .features import TimeSeriesTemplate

# Sums in the integer matching path must fit the simulated word width.
ONCHAIN_INT_BITS = 256
_ONCHAIN_INT_MAX = (1 << ONCHAIN_INT_BITS) - 1

METRICS = ("euclidean", "fixedpoint_euclidean", "hamming", "dtw")


@dataclass(frozen=True)
class FixedPointConfig:
    """Decimal scaling and root-iteration limits for integer matching."""

    scale: int = 100
    root_degree: int = 2
    max_iterations: int = 64

    def __post_init__(self):
        if self.scale < 1:
            raise RangeError("scale must be >= 1")
        if self.root_degree < 2:
            raise RangeError("root degree must be >= 2")
        if self.max_iterations < 1:
            raise RangeError("max_iterations must be >= 1")


DEFAULT_FIXED_POINT = FixedPointConfig()


@dataclass(frozen=True)
class MatchScore:
    """A distance score tagged with the metric that produced it."""

    value: float
    metric: str

    def __post_init__(self):
        if self.metric not in METRICS:
            raise RangeError(f"unknown metric {self.metric!r}")
        if self.value < 0:
            raise RangeError("scores are distances and must be >= 0")


def euclidean(a, b) -> float:
    """Euclidean distance between two equal-length real vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def newton_nth_root(d: int, n: int = 2, cfg: FixedPointConfig = DEFAULT_FIXED_POINT) -> int:
    """Floor of the nth root of a nonnegative integer, by integer Newton steps.

    The initial guess ``2**ceil(bits(d)/n)`` bounds the root from above, so
    the iterate decreases monotonically; iteration stops when it no longer
    decreases (or at the cap) and is then corrected so that
    ``result**n <= d < (result + 1)**n`` holds exactly.
    """
    d = int(d)
    if d < 0:
        raise DomainError("radicand must be nonnegative")
    if n < 2:
        raise RangeError("root degree must be >= 2")
    if d == 0:
        return 0

    x = 1 << -(-d.bit_length() // n)
    if n == 2:
        for _ in range(cfg.max_iterations):
            y = (x + d // x) >> 1
            if y >= x:
                break
            x = y
    else:
        for _ in range(cfg.max_iterations):
            y = ((n - 1) * x + d // x ** (n - 1)) // n
            if y >= x:
                break
            x = y
    while x ** n > d:
        x -= 1
    while (x + 1) ** n <= d:
        x += 1
    return x


def _as_int_vector(v):
    out = []
    for x in v:
        if isinstance(x, (int, np.integer)):
            out.append(int(x))
        elif isinstance(x, float) and x.is_integer():
            out.append(int(x))
        else:
            raise DomainError(f"fixed-point entries must be integers, got {x!r}")
    return out


def scale_to_fixed(values, cfg: FixedPointConfig = DEFAULT_FIXED_POINT):
    """Round reals onto the integer grid: value * scale, nearest integer."""
    return [int(round(float(v) * cfg.scale)) for v in values]


def fixedpoint_euclidean(a_scaled, b_scaled, cfg: FixedPointConfig = DEFAULT_FIXED_POINT) -> int:
    """Integer Euclidean distance on pre-scaled vectors.

    Equals ``floor(scale * euclidean(a, b))`` up to input rounding; the whole
    computation stays in integer arithmetic.
    """
    a = _as_int_vector(a_scaled)
    b = _as_int_vector(b_scaled)
    if len(a) != len(b):
        raise DimensionError(f"length mismatch: {len(a)} vs {len(b)}")
    ssq = 0
    for ai, bi in zip(a, b):
        diff = ai - bi
        ssq += diff * diff
    if ssq > _ONCHAIN_INT_MAX:
        raise IntegerOverflowError(
            f"squared sum needs {ssq.bit_length()} bits, width is {ONCHAIN_INT_BITS}"
        )
    return newton_nth_root(ssq, 2, cfg)


def popcount(word: int) -> int:
    """Set-bit count by repeatedly clearing the lowest set bit.

    Loop iterations equal the returned count.
    """
    word = int(word)
    if word < 0:
        raise DomainError("popcount operates on unsigned integers")
    count = 0
    while word:
        word &= word - 1
        count += 1
    return count


def hamming(h1: BitString, h2: BitString) -> int:
    """Hamming distance between equal-length bit strings, word by word."""
    if h1.length != h2.length:
        raise DimensionError(f"bit lengths differ: {h1.length} vs {h2.length}")
    return sum(popcount(w1 ^ w2) for w1, w2 in zip(h1.words, h2.words))


def _frame_costs(a: TimeSeriesTemplate, b: TimeSeriesTemplate) -> np.ndarray:
    diff = a.channels.T[:, None, :] - b.channels.T[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def dtw(a: TimeSeriesTemplate, b: TimeSeriesTemplate) -> float:
    """Dynamic time warping distance, normalized by the optimal path length.

    Per-frame cost is the Euclidean distance over channel values; steps are
    (i-1,j), (i,j-1), (i-1,j-1), anchored at both ends. Among paths of equal
    total cost the shorter one defines the normalization.
    """
    if a.n_channels != b.n_channels:
        raise DimensionError(f"channel counts differ: {a.n_channels} vs {b.n_channels}")
    cost = _frame_costs(a, b)
    ta, tb = cost.shape

    # DP over (total cost, cells on path) pairs, compared lexicographically.
    prev = [None] * tb
    for i in range(ta):
        cur = [None] * tb
        ci = cost[i]
        for j in range(tb):
            if i == 0 and j == 0:
                best = (0.0, 0)
            elif i == 0:
                best = cur[j - 1]
            elif j == 0:
                best = prev[j]
            else:
                best = min(prev[j], cur[j - 1], prev[j - 1])
            cur[j] = (best[0] + ci[j], best[1] + 1)
        prev = cur
    total, cells = prev[tb - 1]
    return total / cells


def signature_score(references, probe: TimeSeriesTemplate) -> float:
    """Mean DTW distance of the probe against exactly five reference templates."""
    references = list(references)
    if len(references) != 5:
        raise EvalProtocolError(f"expected exactly 5 references, got {len(references)}")
    return sum(dtw(r, probe) for r in references) / 5.0

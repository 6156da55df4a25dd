"""Chi-squared(1) numerics, Holm adjustment and the portable random generator.

The generator is xorshift64* (Vigna, 2016) seeded through splitmix64:

    state ^= state >> 12
    state ^= state << 25
    state ^= state >> 27
    output = state * 0x2545F4914F6CDD1D          (mod 2**64)

Uniform doubles take the top 53 bits of ``output``; normals come from the
Box-Muller transform; permutations from a Fisher-Yates shuffle that draws the
swap index as ``floor(u * (i + 1))``. Independent streams for replicated runs
use ``seed = base_seed + replicate_index``.
"""
from __future__ import annotations

import math

import numba
import numpy as np

__all__ = [
    "chi2_1_cdf",
    "chi2_1_sf",
    "chi2_1_quantile",
    "holm_adjust",
    "Rng",
    "random_permutation",
]

_MASK64 = (1 << 64) - 1


def chi2_1_cdf(x: float) -> float:
    """Distribution function of the chi-squared law with one degree of freedom."""
    if x < 0 or math.isnan(x):
        raise ValueError(f"chi2_1_cdf is defined for x >= 0, got {x!r}")
    if math.isinf(x):
        return 1.0
    return math.erf(math.sqrt(x / 2.0))


def chi2_1_sf(x: float) -> float:
    """Upper tail ``1 - chi2_1_cdf(x)``, accurate far into the tail."""
    if x < 0 or math.isnan(x):
        raise ValueError(f"chi2_1_sf is defined for x >= 0, got {x!r}")
    if math.isinf(x):
        return 0.0
    return math.erfc(math.sqrt(x / 2.0))


def chi2_1_quantile(p: float) -> float:
    """Inverse of :func:`chi2_1_cdf` for ``p`` in ``[0, 1)``.

    Bracketed Newton iteration; falls back to bisection whenever a Newton
    step leaves the bracket. Absolute error is below 1e-9.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"chi2_1_quantile needs 0 <= p < 1, got {p!r}")
    if p == 0.0:
        return 0.0
    q = 1.0 - p
    lo, hi = 0.0, 1.0
    while chi2_1_cdf(hi) < p:
        lo, hi = hi, 2.0 * hi

    # residual in whichever tail is better conditioned
    def resid(x):
        if p < 0.5:
            return chi2_1_cdf(x) - p
        return q - chi2_1_sf(x)

    x = 0.5 * (lo + hi)
    for _ in range(200):
        r = resid(x)
        if r == 0.0:
            return x
        if r < 0:
            lo = x
        else:
            hi = x
        dens = math.exp(-x / 2.0) / math.sqrt(2.0 * math.pi * x)
        step = x - r / dens if dens > 0 else None
        x_new = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
        # relative stop: tiny p gives quantiles far below 1
        if abs(x_new - x) <= 1e-15 * x or hi - lo <= 1e-15 * hi:
            return x_new
        x = x_new
    return x


def holm_adjust(p_values) -> list[float]:
    """Holm step-down adjusted p-values, returned in input order.

    >>> holm_adjust([0.01, 0.04, 0.03])
    [0.03, 0.06, 0.06]
    """
    p = [float(v) for v in p_values]
    for v in p:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"p-values must lie in [0, 1], got {v!r}")
    k = len(p)
    order = sorted(range(k), key=lambda i: p[i])
    adjusted = [0.0] * k
    running = 0.0
    for rank, i in enumerate(order):
        running = max(running, min(1.0, (k - rank) * p[i]))
        adjusted[i] = running
    return adjusted


# -- random generator ------------------------------------------------------

def _splitmix64(seed: int) -> int:
    z = (seed + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


_S12 = np.uint64(12)
_S25 = np.uint64(25)
_S27 = np.uint64(27)
_S11 = np.uint64(11)
_MULT = np.uint64(0x2545F4914F6CDD1D)
_INV53 = 1.0 / 9007199254740992.0


@numba.njit(cache=True, nogil=True)
def _next_u64(state):
    x = state[0]
    x ^= x >> _S12
    x ^= x << _S25
    x ^= x >> _S27
    state[0] = x
    return x * _MULT


@numba.njit(cache=True, nogil=True)
def _next_double(state):
    return np.float64(_next_u64(state) >> _S11) * _INV53


@numba.njit(cache=True, nogil=True)
def _fill_uniform(state, out):
    for i in range(out.size):
        out[i] = _next_double(state)


@numba.njit(cache=True, nogil=True)
def _fill_normal(state, out):
    n = out.size
    i = 0
    while i < n:
        u1 = 1.0 - _next_double(state)  # (0, 1]
        u2 = _next_double(state)
        r = math.sqrt(-2.0 * math.log(u1))
        out[i] = r * math.cos(2.0 * math.pi * u2)
        if i + 1 < n:
            out[i + 1] = r * math.sin(2.0 * math.pi * u2)
        i += 2


@numba.njit(cache=True, nogil=True)
def _fill_permutations(state, out):
    # out has shape (count, N); each row becomes an independent permutation
    count, size = out.shape
    for r in range(count):
        for i in range(size):
            out[r, i] = i
        for i in range(size - 1, 0, -1):
            j = int(_next_double(state) * (i + 1))
            tmp = out[r, i]
            out[r, i] = out[r, j]
            out[r, j] = tmp


class Rng:
    """Seeded xorshift64* stream. Single owner; not thread safe.

    Parameters
    ----------
    seed : int
        Any integer; reduced modulo 2**64.
    """

    algorithm = "xorshift64*/splitmix64"

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & _MASK64
        s = _splitmix64(self.seed) or 0x9E3779B97F4A7C15
        self._state = np.array([s], dtype=np.uint64)

    def __repr__(self):
        return f"Rng(seed={self.seed})"

    def spawn(self, index: int) -> "Rng":
        """Independent stream for replicate ``index`` (seed + index)."""
        return Rng(self.seed + int(index))

    def next_u64(self) -> int:
        return int(_next_u64(self._state))

    def uniform(self, size=None):
        out = np.empty(1 if size is None else size, dtype=np.float64)
        _fill_uniform(self._state, out.reshape(-1))
        return float(out[0]) if size is None else out

    def normal(self, size=None):
        out = np.empty(1 if size is None else size, dtype=np.float64)
        _fill_normal(self._state, out.reshape(-1))
        return float(out[0]) if size is None else out

    def cauchy(self, size):
        return np.tan(np.pi * (self.uniform(size) - 0.5))

    def bernoulli(self, size, p: float = 0.5):
        return (self.uniform(size) < p).astype(np.float64)

    def integers(self, high: int, size):
        """Uniform integers in ``[0, high)``."""
        return np.floor(self.uniform(size) * high).astype(np.int64)

    def permutation(self, n: int):
        out = np.empty((1, n), dtype=np.int64)
        _fill_permutations(self._state, out)
        return out[0]

    def permutations(self, count: int, n: int):
        """``count`` independent permutations of ``range(n)`` as rows."""
        out = np.empty((count, n), dtype=np.int64)
        _fill_permutations(self._state, out)
        return out


def random_permutation(rng: Rng, n: int):
    """Uniform permutation of ``0..n-1`` drawn by Fisher-Yates on ``rng``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return rng.permutation(n)

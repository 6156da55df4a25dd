"""Sample multivariance and its variants.

All measures are averages over sample pairs ``(j, k)`` of polynomials in the
entries ``A_i[j, k]``. One compiled pass accumulates, with compensated sums,

* ``prod  = prod_i A_i``              (multivariance)
* ``prod1 = prod_i (1 + A_i)``        (total multivariance)
* ``prodl = prod_i (lam + A_i)``      (lambda-total multivariance)
* ``e2``, ``e3``                      (elementary symmetric polynomials of
  the ``A_i``, giving 2- and 3-multivariance from power sums)

over the upper triangle of the matrices, doubling off-diagonal pairs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .centering import CenteredMatrix, Dataset, MatrixCache
from .psi import EUCLID, PsiSpec

__all__ = [
    "MeasureValue",
    "multivariance",
    "total_multivariance",
    "m_multivariance",
    "total_m_multivariance",
    "lambda_total",
    "multicorrelation",
    "mcor2",
    "total_mcor_lower_bound",
    "pair_sums",
    "streaming_sums",
    "measure",
    "KINDS",
]

KINDS = ("multivariance", "total", "m_multi", "total_m", "lambda_total",
         "multicorrelation", "mcor2", "tot_mcor_lb")

# slots of the accumulator vector
PROD, PROD1, PRODL, E2, E3 = range(5)


@numba.njit(cache=True, nogil=True)
def _kahan_add(acc, comp, k, x):
    y = x - comp[k]
    t = acc[k] + y
    comp[k] = (t - acc[k]) - y
    acc[k] = t


@numba.njit(cache=True, nogil=True)
def _pair_sums_kernel(stack, perms, lam, out):
    # stack: (n, N, N) symmetric matrices; perms: (n, N) row/column relabelling
    n, size, _ = stack.shape
    acc = np.zeros(5)
    comp = np.zeros(5)
    for j in range(size):
        for k in range(j, size):
            w = 1.0 if j == k else 2.0
            p = 1.0
            p1 = 1.0
            pl = 1.0
            s1 = 0.0
            s2 = 0.0
            s3 = 0.0
            for i in range(n):
                a = stack[i, perms[i, j], perms[i, k]]
                p *= a
                p1 *= 1.0 + a
                pl *= lam + a
                a2 = a * a
                s1 += a
                s2 += a2
                s3 += a2 * a
            e2 = 0.5 * (s1 * s1 - s2)
            e3 = (s1 * s1 * s1 - 3.0 * s1 * s2 + 2.0 * s3) / 6.0
            _kahan_add(acc, comp, 0, w * p)
            _kahan_add(acc, comp, 1, w * p1)
            _kahan_add(acc, comp, 2, w * pl)
            _kahan_add(acc, comp, 3, w * e2)
            _kahan_add(acc, comp, 4, w * e3)
    nn = float(size) * float(size)
    for s in range(5):
        out[s] = acc[s] / nn


@numba.njit(cache=True, nogil=True)
def _batch_pair_sums(stack, perms_batch, lam, out):
    # perms_batch: (L, n, N); out: (L, 5)
    for r in range(perms_batch.shape[0]):
        _pair_sums_kernel(stack, perms_batch[r], lam, out[r])


def _as_stack(mats) -> np.ndarray:
    arrs = [m.entries if isinstance(m, CenteredMatrix) else np.asarray(m, dtype=np.float64)
            for m in mats]
    if len(arrs) == 0:
        raise ValueError("need at least one matrix")
    size = arrs[0].shape[0]
    for a in arrs:
        if a.shape != (size, size):
            raise ValueError("all matrices must be N x N with the same N")
    return np.ascontiguousarray(np.stack(arrs))


def _identity_perms(n: int, size: int) -> np.ndarray:
    return np.ascontiguousarray(np.broadcast_to(np.arange(size, dtype=np.int64), (n, size)))


def pair_sums(mats, lam: float = 1.0, perms=None) -> np.ndarray:
    """Return ``[prod, prod1, prodl, e2, e3]`` averaged over all pairs."""
    stack = mats if isinstance(mats, np.ndarray) and mats.ndim == 3 else _as_stack(mats)
    n, size = stack.shape[0], stack.shape[1]
    if perms is None:
        perms = _identity_perms(n, size)
    out = np.empty(5)
    _pair_sums_kernel(stack, np.ascontiguousarray(perms, dtype=np.int64), float(lam), out)
    return out


def _check_n(mats, low: int = 2) -> int:
    n = len(mats)
    if n < low:
        raise ValueError(f"need at least {low} variables, got {n}")
    return n


def multivariance(mats: Sequence) -> float:
    """``N**-2 * sum_jk prod_i A_i[j, k]`` (squared sample multivariance)."""
    _check_n(mats)
    return float(pair_sums(mats)[PROD])


def total_multivariance(mats: Sequence, normalized_divisor: bool = False) -> float:
    """``N**-2 * sum_jk prod_i (1 + A_i[j, k]) - 1``, optionally over ``2**n - n - 1``."""
    n = _check_n(mats)
    v = float(pair_sums(mats)[PROD1]) - 1.0
    return v / (2 ** n - n - 1) if normalized_divisor else v


def _naive_m(stack: np.ndarray, m: int) -> float:
    total = 0.0
    for sub in itertools.combinations(range(stack.shape[0]), m):
        total += float(np.prod(stack[list(sub)], axis=0).mean())
    return total


def m_multivariance(mats: Sequence, m: int, method: str | None = None,
                    normalized_divisor: bool = False) -> float:
    """Sum of multivariances over all ``m``-subsets of the variables.

    ``method='fast'`` (default for ``m`` in {2, 3}) uses power sums of the
    entries; ``'naive'`` enumerates the subsets.
    """
    n = _check_n(mats)
    if not 2 <= m <= n:
        raise ValueError(f"m must satisfy 2 <= m <= n={n}, got {m}")
    if method is None:
        method = "fast" if m in (2, 3) else "naive"
    if method == "fast":
        if m not in (2, 3):
            raise ValueError("the fast method covers m = 2 and m = 3 only")
        v = float(pair_sums(mats)[E2 if m == 2 else E3])
    elif method == "naive":
        v = _naive_m(_as_stack(mats), m)
    else:
        raise ValueError(f"unknown method {method!r}")
    return v / math.comb(n, m) if normalized_divisor else v


def total_m_multivariance(mats: Sequence, m: int) -> float:
    """Sum of the ``l``-multivariances for ``l = 2..m``."""
    n = _check_n(mats)
    if not 2 <= m <= n:
        raise ValueError(f"m must satisfy 2 <= m <= n={n}, got {m}")
    if m == n:
        return total_multivariance(mats)
    s = pair_sums(mats)
    total = float(s[E2])
    if m >= 3:
        total += float(s[E3])
    if m >= 4:
        stack = _as_stack(mats)
        total += sum(_naive_m(stack, l) for l in range(4, m + 1))
    return total


def lambda_total(mats: Sequence, lam: float) -> float:
    """``N**-2 * sum_jk prod_i (lam + A_i[j, k]) - lam**n``."""
    n = _check_n(mats)
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    return float(pair_sums(mats, lam)[PRODL]) - float(lam) ** n


def _cache(data, psi) -> MatrixCache:
    if isinstance(data, MatrixCache):
        return data
    return MatrixCache(data, psi)


def _any_degenerate(mats) -> bool:
    return any(m.degenerate for m in mats)


def multicorrelation(data: Dataset | MatrixCache, psi: PsiSpec | Sequence = EUCLID,
                     variant: str = "r_scaled") -> float:
    """Square root of the multivariance of ``variant``-scaled matrices."""
    cache = _cache(data, psi)
    n = _check_n(range(cache.data.n))
    mats = cache.matrices(variant, n)
    if _any_degenerate(mats):
        return 0.0
    return math.sqrt(max(multivariance(mats), 0.0))


def mcor2(data: Dataset | MatrixCache, psi: PsiSpec | Sequence = EUCLID) -> float:
    """2-multicorrelation: root of the averaged pairwise squared multicorrelations."""
    cache = _cache(data, psi)
    _check_n(range(cache.data.n))
    mats = cache.matrices("r_scaled", 2)
    v = m_multivariance(mats, 2, "fast", normalized_divisor=True)
    return math.sqrt(max(v, 0.0))


def total_mcor_lower_bound(data: Dataset | MatrixCache, psi: PsiSpec | Sequence = EUCLID) -> float:
    """Lower bound of total multicorrelation from ``r_scaled(n)`` matrices."""
    cache = _cache(data, psi)
    n = _check_n(range(cache.data.n))
    mats = cache.matrices("r_scaled", n)
    return total_multivariance(mats, normalized_divisor=True)


# -- streaming evaluation for many variables ---------------------------------

@numba.njit(cache=True, nogil=True)
def _row_distances(xt, a, b, j, code, alpha, delta, out):
    # out[t] = psi(x_j - x_{j+t}) for the group occupying rows a..b-1 of xt
    size = xt.shape[1]
    m = size - j
    if b - a == 1:
        xj = xt[a, j]
        for t in range(m):
            out[t] = abs(xj - xt[a, j + t])
    else:
        for t in range(m):
            out[t] = 0.0
        for c in range(a, b):
            xj = xt[c, j]
            for t in range(m):
                d = xj - xt[c, j + t]
                out[t] += d * d
        for t in range(m):
            out[t] = math.sqrt(out[t])
    if code == 0:
        if alpha == 2.0:
            for t in range(m):
                out[t] = out[t] * out[t]
        elif alpha != 1.0:
            for t in range(m):
                out[t] = out[t] ** alpha
    elif code == 1:
        for t in range(m):
            out[t] = -math.expm1(-delta * out[t] ** alpha)
    else:
        for t in range(m):
            out[t] = math.log1p(0.5 * out[t] * out[t])


@numba.njit(cache=True, nogil=True)
def _streaming_kernel(xt, starts, stops, codes, alphas, deltas, normalize, lam, out):
    # xt: (D, N) column-major copy of the data, so each group row is contiguous
    size = xt.shape[1]
    n = starts.shape[0]
    buf = np.empty(size)
    rowsum = np.zeros((n, size))
    for i in range(n):
        for j in range(size):
            _row_distances(xt, starts[i], stops[i], j, codes[i], alphas[i], deltas[i], buf)
            m = size - j
            acc = 0.0
            for t in range(1, m):
                acc += buf[t]
                rowsum[i, j + t] += buf[t]
            rowsum[i, j] += acc
    rowmean = rowsum / size
    grand = np.zeros(n)
    scale = np.ones(n)
    for i in range(n):
        grand[i] = rowmean[i].mean()
        if normalize:
            scale[i] = 0.0 if grand[i] == 0.0 else 1.0 / grand[i]
    p = np.empty(size)
    p1 = np.empty(size)
    pl = np.empty(size)
    s1 = np.empty(size)
    s2 = np.empty(size)
    s3 = np.empty(size)
    acc5 = np.zeros(5)
    comp = np.zeros(5)
    for j in range(size):
        m = size - j
        for t in range(m):
            p[t] = 1.0
            p1[t] = 1.0
            pl[t] = 1.0
            s1[t] = 0.0
            s2[t] = 0.0
            s3[t] = 0.0
        for i in range(n):
            _row_distances(xt, starts[i], stops[i], j, codes[i], alphas[i], deltas[i], buf)
            base = rowmean[i, j] - grand[i]
            sc = scale[i]
            rm = rowmean[i]
            for t in range(m):
                a = (base + rm[j + t] - buf[t]) * sc
                p[t] *= a
                p1[t] *= 1.0 + a
                pl[t] *= lam + a
                a2 = a * a
                s1[t] += a
                s2[t] += a2
                s3[t] += a2 * a
        for t in range(m):
            w = 1.0 if t == 0 else 2.0
            e2 = 0.5 * (s1[t] * s1[t] - s2[t])
            e3 = (s1[t] * s1[t] * s1[t] - 3.0 * s1[t] * s2[t] + 2.0 * s3[t]) / 6.0
            _kahan_add(acc5, comp, 0, w * p[t])
            _kahan_add(acc5, comp, 1, w * p1[t])
            _kahan_add(acc5, comp, 2, w * pl[t])
            _kahan_add(acc5, comp, 3, w * e2)
            _kahan_add(acc5, comp, 4, w * e3)
    nn = float(size) * float(size)
    for s in range(5):
        out[s] = acc5[s] / nn


def streaming_sums(data: Dataset, psi: PsiSpec | Sequence = EUCLID,
                   normalize: bool = True, lam: float = 1.0) -> np.ndarray:
    """Same accumulators as :func:`pair_sums`, straight from the data.

    Never stores an ``N x N`` matrix per variable, so memory stays
    ``O(n N)``; used when ``n * N**2`` is large.
    """
    psis = [psi] * data.n if isinstance(psi, PsiSpec) else list(psi)
    starts = np.array([a for a, _ in data.groups], dtype=np.int64)
    stops = np.array([b for _, b in data.groups], dtype=np.int64)
    codes = np.array([p.code for p in psis], dtype=np.int64)
    alphas = np.array([p.alpha for p in psis], dtype=np.float64)
    deltas = np.array([p.delta for p in psis], dtype=np.float64)
    out = np.empty(5)
    _streaming_kernel(np.ascontiguousarray(data.values.T), starts, stops, codes, alphas,
                      deltas, bool(normalize), float(lam), out)
    return out


# -- tagged results ----------------------------------------------------------

@dataclass
class MeasureValue:
    """A computed measure. ``statistic`` is ``N * max(squared_value, 0)``
    for kinds computed from normalized matrices and ``None`` otherwise."""

    kind: str
    squared_value: float
    statistic: float | None
    n: int
    N: int
    m: int | None = None
    lam: float | None = None
    scaling: str = "normalized"

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("kind", "squared_value", "statistic", "n", "N", "m", "lam", "scaling")}


def measure(data: Dataset | MatrixCache, psi: PsiSpec | Sequence = EUCLID, kind: str = "multivariance",
            m: int | None = None, lam: float | None = None,
            scaling: str = "normalized") -> MeasureValue:
    """Compute one measure by name.

    With ``scaling='normalized'`` the total and m-multivariance carry their
    summand-count divisors so that ``statistic`` is the test statistic.
    """
    cache = _cache(data, psi)
    n, size = cache.data.n, cache.data.N
    if kind not in KINDS:
        raise ValueError(f"unknown measure kind {kind!r}")
    norm = scaling == "normalized"
    if kind in ("multicorrelation", "mcor2", "tot_mcor_lb"):
        if kind == "multicorrelation":
            v = multicorrelation(cache, variant="r_scaled") ** 2
        elif kind == "mcor2":
            v = mcor2(cache) ** 2
        else:
            v = total_mcor_lower_bound(cache)
        return MeasureValue(kind, v, None, n, size, scaling="r_scaled")
    mats = cache.matrices(scaling)
    if kind == "multivariance":
        v = multivariance(mats)
    elif kind == "total":
        v = total_multivariance(mats, normalized_divisor=norm)
    elif kind == "m_multi":
        m = 2 if m is None else int(m)
        v = m_multivariance(mats, m, normalized_divisor=norm)
    elif kind == "total_m":
        m = n if m is None else int(m)
        v = total_m_multivariance(mats, m)
    else:
        lam = 1.0 if lam is None else float(lam)
        v = lambda_total(mats, lam)
    stat = size * max(v, 0.0) if norm else None
    return MeasureValue(kind, v, stat, n, size, m, lam, scaling)

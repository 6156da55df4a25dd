"""Independence tests built on normalized multivariance statistics.

Statistics are ``N`` times a normalized sample measure, clamped at zero:

========== ==========================================================
``multi``  multivariance of the normalized matrices
``total``  total multivariance divided by ``2**n - n - 1``
``m2``     2-multivariance divided by ``C(n, 2)``
``m3``     3-multivariance divided by ``C(n, 3)``
``m:k``    k-multivariance divided by ``C(n, k)``
``lambda:x`` lambda-total multivariance, no divisor
========== ==========================================================
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .centering import Dataset, MatrixCache
from .measures import (E2, E3, PROD, PROD1, PRODL, _as_stack, _batch_pair_sums,
                       _identity_perms, _naive_m, pair_sums, streaming_sums)
from .psi import EUCLID, PsiSpec
from .special import Rng, chi2_1_quantile, chi2_1_sf, holm_adjust

__all__ = [
    "UsageError",
    "StatKind",
    "TestOutcome",
    "CombinedOutcome",
    "statistic",
    "statistics",
    "conservative_test",
    "resampling_test",
    "monte_carlo_test",
    "consistent_test",
    "combined_test",
    "run_test",
    "empirical_rejection_level",
    "resampling_p_value",
    "MAX_CONSERVATIVE_ALPHA",
]

MAX_CONSERVATIVE_ALPHA = 0.215
# relative tolerance under which a replicate counts as tying the observed value
TIE_RTOL = 1e-12
# above this many matrix entries the statistic is computed without storing matrices
STREAMING_ENTRIES = 25_000_000
# replicates per work unit in resampling
CHUNK = 32


class UsageError(ValueError):
    """Invalid test configuration."""


@dataclass(frozen=True)
class StatKind:
    """Which statistic a test uses: ``multi``, ``total``, ``m`` (with ``m``)
    or ``lambda_total`` (with ``lam``)."""

    name: str = "multi"
    m: int | None = None
    lam: float | None = None

    @classmethod
    def parse(cls, text) -> "StatKind":
        if isinstance(text, StatKind):
            return text
        t = str(text).strip().lower()
        if t in ("multi", "multivariance"):
            return cls("multi")
        if t == "total":
            return cls("total")
        if t in ("m2", "m3"):
            return cls("m", m=int(t[1]))
        if t.startswith("m:"):
            return cls("m", m=int(t[2:]))
        if t.startswith("lambda:"):
            lam = float(t.split(":", 1)[1])
            if lam < 0:
                raise UsageError("lambda must be >= 0")
            return cls("lambda_total", lam=lam)
        raise UsageError(f"unknown statistic kind {text!r}")

    def check(self, n: int) -> None:
        if n < 2:
            raise UsageError(f"need at least 2 variables, got {n}")
        if self.name == "m" and not 2 <= (self.m or 0) <= n:
            raise UsageError(f"m must satisfy 2 <= m <= n={n}, got {self.m}")

    @property
    def label(self) -> str:
        if self.name == "m":
            return f"m{self.m}" if self.m in (2, 3) else f"m:{self.m}"
        if self.name == "lambda_total":
            return f"lambda:{self.lam:g}"
        return self.name

    def __str__(self):
        return self.label

    def from_sums(self, sums: np.ndarray, n: int, size: int) -> np.ndarray:
        """Statistic(s) from accumulator rows ``[prod, prod1, prodl, e2, e3]``."""
        sums = np.asarray(sums)
        if self.name == "multi":
            v = sums[..., PROD]
        elif self.name == "total":
            v = (sums[..., PROD1] - 1.0) / (2 ** n - n - 1)
        elif self.name == "m" and self.m in (2, 3):
            v = sums[..., E2 if self.m == 2 else E3] / math.comb(n, self.m)
        elif self.name == "lambda_total":
            v = sums[..., PRODL] - self.lam ** n
        else:
            raise UsageError(f"{self.label} cannot be read from the accumulators")
        return size * np.maximum(v, 0.0)

    @property
    def fast(self) -> bool:
        return not (self.name == "m" and self.m not in (2, 3))

    def notes(self, n: int) -> list[str]:
        if self.name == "multi" and n > 2:
            return ["consistent against all alternatives only under (n-1)-independence"]
        if self.name == "m" and self.m < n and self.m > 2:
            return [f"detects {self.m}-dependence; consistency requires {self.m - 1}-independence"]
        return []


@dataclass
class TestOutcome:
    __test__ = False  # not a pytest class

    kind: str
    method: str
    statistic: float
    rejection_level: float
    p_value: float | None
    reject: bool
    alpha: float | None
    notes: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("statistic", "rejection_level"):
            if math.isinf(d[k]):
                d[k] = "inf"
        return d


@dataclass
class CombinedOutcome:
    outcomes: list
    adjusted_p_values: list
    reject: bool
    alpha: float

    def to_dict(self) -> dict:
        return {"outcomes": [o.to_dict() for o in self.outcomes],
                "adjusted_p_values": self.adjusted_p_values,
                "reject": self.reject, "alpha": self.alpha}


# -- statistics --------------------------------------------------------------

def _cache(data, psi) -> MatrixCache:
    return data if isinstance(data, MatrixCache) else MatrixCache(data, psi)


def _normalized_stack(cache: MatrixCache, members=None) -> tuple[np.ndarray, bool]:
    mats = cache.matrices("normalized", members=members)
    return _as_stack(mats), all(m.degenerate for m in mats)


def _naive_stat(stack: np.ndarray, kind: StatKind, size: int) -> float:
    n = stack.shape[0]
    v = _naive_m(stack, kind.m) / math.comb(n, kind.m)
    return size * max(v, 0.0)


def statistic(data: Dataset | MatrixCache, psi: PsiSpec | Sequence = EUCLID,
              kind: StatKind | str = "multi") -> float:
    """``N`` times the normalized sample measure, clamped at 0."""
    kind = StatKind.parse(kind)
    cache = _cache(data, psi)
    n, size = cache.data.n, cache.data.N
    kind.check(n)
    lam = 1.0 if kind.lam is None else kind.lam
    if kind.fast and n * size * size > STREAMING_ENTRIES:
        return float(kind.from_sums(streaming_sums(cache.data, cache.psis, True, lam), n, size))
    stack, _ = _normalized_stack(cache)
    if not kind.fast:
        return _naive_stat(stack, kind, size)
    return float(kind.from_sums(pair_sums(stack, lam), n, size))


def statistics(data: Dataset | MatrixCache, psi: PsiSpec | Sequence = EUCLID,
               kinds: Sequence = ("multi", "total", "m2", "m3")) -> list[float]:
    """Several statistics from one accumulation pass (``m2``/``m3`` style kinds only)."""
    kinds = [StatKind.parse(k) for k in kinds]
    cache = _cache(data, psi)
    n, size = cache.data.n, cache.data.N
    lams = {k.lam for k in kinds if k.name == "lambda_total"}
    if len(lams) > 1 or not all(k.fast for k in kinds):
        return [statistic(cache, None, k) for k in kinds]
    for k in kinds:
        k.check(n)
    lam = lams.pop() if lams else 1.0
    if n * size * size > STREAMING_ENTRIES:
        sums = streaming_sums(cache.data, cache.psis, True, lam)
    else:
        sums = pair_sums(_normalized_stack(cache)[0], lam)
    return [float(k.from_sums(sums, n, size)) for k in kinds]


# -- rejection levels --------------------------------------------------------

def _tie_tol(s: float) -> float:
    return TIE_RTOL * max(1.0, abs(s))


def resampling_p_value(replicates, observed: float) -> float:
    """``(1 + #{replicates >= observed}) / (L + 1)``, ties within a relative 1e-12."""
    reps = np.asarray(replicates, dtype=np.float64)
    count = int(np.count_nonzero(reps >= observed - _tie_tol(observed)))
    return (1 + count) / (reps.size + 1)


def _level_above(r: float) -> float:
    # smallest s >= 0 region with s - tol(s) > r is s > this value
    if r + TIE_RTOL < 1.0:
        return r + TIE_RTOL
    return r / (1.0 - TIE_RTOL)


def empirical_rejection_level(replicates, alpha: float) -> float:
    """The ``(L + 1 - floor(alpha (L + 1)))``-th smallest replicate.

    Infinite when ``alpha (L + 1) < 1``: no replicate count can then give a
    p-value at or below ``alpha``. The returned level is nudged by the tie
    tolerance so that ``statistic > level`` exactly matches ``p <= alpha``.
    """
    reps = np.sort(np.asarray(replicates, dtype=np.float64))
    size = reps.size
    if size < 1:
        raise UsageError("need at least one replicate")
    k = size + 1 - math.floor(alpha * (size + 1))
    if k > size:
        return math.inf
    return _level_above(float(reps[k - 1]))


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise UsageError(f"alpha must lie in (0, 1), got {alpha}")


def conservative_test(statistic: float, alpha: float = 0.05, kind="multi") -> TestOutcome:
    """Distribution-free test with level ``chi2_1_quantile(1 - alpha)``."""
    if not 0.0 < alpha <= MAX_CONSERVATIVE_ALPHA:
        raise UsageError(
            f"the conservative test is valid only for 0 < alpha <= {MAX_CONSERVATIVE_ALPHA}, "
            f"got {alpha}")
    level = chi2_1_quantile(1.0 - alpha)
    stat = float(statistic)
    return TestOutcome(str(kind), "conservative", stat, level, chi2_1_sf(max(stat, 0.0)),
                       stat > level, alpha,
                       ["conservative: p-value is an upper bound"])


def consistent_test(statistic: float, N: int, beta: float = 0.5, C: float = 2.0,
                    kind="multi") -> TestOutcome:
    """Threshold ``N**(1 - beta) * C``; no p-value."""
    if not 0.0 < beta < 1.0:
        raise UsageError(f"beta must lie in (0, 1), got {beta}")
    if not C > 0:
        raise UsageError(f"C must be positive, got {C}")
    level = float(N) ** (1.0 - beta) * C
    stat = float(statistic)
    single = chi2_1_sf(level)
    return TestOutcome(str(kind), "consistent", stat, level, None, stat > level, None,
                       [f"type I error per test approximately <= {single:.3g}"],
                       {"beta": beta, "C": C})


def _resampled_sums(stack: np.ndarray, L: int, rng: Rng, lam: float, workers: int) -> np.ndarray:
    n, size = stack.shape[0], stack.shape[1]
    # permutations are drawn sequentially so results do not depend on workers
    chunks = []
    for start in range(0, L, CHUNK):
        cnt = min(CHUNK, L - start)
        chunks.append(rng.permutations(cnt * n, size).reshape(cnt, n, size))
    out = np.empty((L, 5))

    def run(idx):
        start = idx * CHUNK
        perms = chunks[idx]
        _batch_pair_sums(stack, perms, lam, out[start:start + perms.shape[0]])

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(run, range(len(chunks))))
    else:
        for i in range(len(chunks)):
            run(i)
    return out


def _resampled_naive(stack: np.ndarray, kind: StatKind, L: int, rng: Rng) -> np.ndarray:
    n, size = stack.shape[0], stack.shape[1]
    reps = np.empty(L)
    for r in range(L):
        perms = rng.permutations(n, size)
        perm_stack = np.stack([stack[i][np.ix_(perms[i], perms[i])] for i in range(n)])
        reps[r] = _naive_stat(perm_stack, kind, size)
    return reps


def _outcome_from_replicates(kind: StatKind, method: str, observed: float, reps,
                             alpha: float, notes, params) -> TestOutcome:
    level = empirical_rejection_level(reps, alpha)
    p = resampling_p_value(reps, observed)
    reject = observed > level
    return TestOutcome(kind.label, method, float(observed), level, p, bool(reject), alpha,
                       list(notes), dict(params))


def resampling_replicates(data: Dataset | MatrixCache, psi, kinds: Sequence[StatKind],
                          L: int, rng: Rng, workers: int = 1, members=None):
    """Observed statistics and ``L`` permutation replicates for each kind.

    All kinds share one set of permutations. Returns ``(observed, reps)``
    with ``reps[i]`` the replicate array of ``kinds[i]``.
    """
    cache = _cache(data, psi)
    stack, _ = _normalized_stack(cache, members)
    n, size = stack.shape[0], stack.shape[1]
    lams = {k.lam for k in kinds if k.name == "lambda_total"}
    if len(lams) > 1:
        raise UsageError("one lambda per replicate set")
    lam = lams.pop() if lams else 1.0
    ident = _identity_perms(n, size)
    obs_sums = pair_sums(stack, lam, ident)
    observed, reps = [], []
    fast = [k for k in kinds if k.fast]
    sums = _resampled_sums(stack, L, rng, lam, workers) if fast else None
    for k in kinds:
        if k.fast:
            observed.append(float(k.from_sums(obs_sums, n, size)))
            reps.append(k.from_sums(sums, n, size))
        else:
            observed.append(_naive_stat(stack, k, size))
            reps.append(_resampled_naive(stack, k, L, rng))
    return observed, reps


def resampling_test(data: Dataset | MatrixCache, psi: PsiSpec | Sequence = EUCLID,
                    kind: StatKind | str = "multi", L: int = 300, alpha: float = 0.05,
                    rng: Rng | None = None, workers: int = 1) -> TestOutcome:
    """Permutation test: each group's samples are permuted independently."""
    kind = StatKind.parse(kind)
    _check_alpha(alpha)
    if L < 1:
        raise UsageError("L must be at least 1")
    cache = _cache(data, psi)
    kind.check(cache.data.n)
    rng = Rng(0) if rng is None else rng
    observed, reps = resampling_replicates(cache, None, [kind], L, rng, workers)
    return _outcome_from_replicates(kind, "resampling", observed[0], reps[0], alpha,
                                    kind.notes(cache.data.n), {"L": L})


def monte_carlo_test(generator: Callable | Sequence[Callable], data: Dataset,
                     psi: PsiSpec | Sequence = EUCLID, kind: StatKind | str = "multi",
                     L: int = 300, alpha: float = 0.05, rng: Rng | None = None) -> TestOutcome:
    """Test against statistics of ``L`` fresh datasets with independent groups.

    ``generator`` is either one sampler per group, ``f(N, rng) -> array`` of
    shape ``(N, d_i)``, or a single callable ``f(N, rng) -> Dataset`` whose
    groups are independent.
    """
    kind = StatKind.parse(kind)
    _check_alpha(alpha)
    if L < 1:
        raise UsageError("L must be at least 1")
    kind.check(data.n)
    rng = Rng(0) if rng is None else rng
    psis = MatrixCache(data, psi).psis

    def fresh(r: Rng) -> Dataset:
        if callable(generator):
            d = generator(data.N, r)
        else:
            if len(generator) != data.n:
                raise UsageError(f"need {data.n} marginal samplers, got {len(generator)}")
            d = Dataset.from_blocks([g(data.N, r) for g in generator], data.names)
        if d.N != data.N or d.dims != data.dims:
            raise UsageError("generator output does not match the data's dimensions")
        return d

    observed = statistic(data, psis, kind)
    reps = np.array([statistic(fresh(rng.spawn(l)), psis, kind) for l in range(L)])
    return _outcome_from_replicates(kind, "montecarlo", observed, reps, alpha,
                                    kind.notes(data.n), {"L": L})


def combined_test(data: Dataset | MatrixCache, psi: PsiSpec | Sequence = EUCLID,
                  alpha: float = 0.05, method: str = "resampling", L: int = 300,
                  rng: Rng | None = None, workers: int = 1) -> CombinedOutcome:
    """Holm combination of the 2-, 3- and (for n > 3) total multivariance tests."""
    cache = _cache(data, psi)
    n = cache.data.n
    if n < 3:
        raise UsageError("the combined test needs at least 3 variables")
    kinds = [StatKind("m", 2), StatKind("m", 3)] + ([StatKind("total")] if n > 3 else [])
    if method == "conservative":
        outcomes = [conservative_test(statistic(cache, None, k), alpha, k.label) for k in kinds]
    elif method == "resampling":
        _check_alpha(alpha)
        rng = Rng(0) if rng is None else rng
        observed, reps = resampling_replicates(cache, None, kinds, L, rng, workers)
        outcomes = [_outcome_from_replicates(k, "resampling", o, r, alpha, k.notes(n), {"L": L})
                    for k, o, r in zip(kinds, observed, reps)]
    else:
        raise UsageError(f"the combined test needs p-values; method {method!r} has none")
    adjusted = holm_adjust([o.p_value for o in outcomes])
    return CombinedOutcome(outcomes, adjusted, any(p <= alpha for p in adjusted), alpha)


def run_test(data: Dataset | MatrixCache, psi: PsiSpec | Sequence = EUCLID, kind="multi",
             method: str = "resampling", alpha: float = 0.05, L: int = 300,
             beta: float = 0.5, C: float = 2.0, rng: Rng | None = None,
             workers: int = 1) -> TestOutcome | CombinedOutcome:
    """Dispatch on ``method``; ``kind='comb'`` runs the combined test."""
    if str(kind) == "comb":
        return combined_test(data, psi, alpha, method, L, rng, workers)
    kind = StatKind.parse(kind)
    cache = _cache(data, psi)
    if method == "conservative":
        if not 0.0 < alpha <= MAX_CONSERVATIVE_ALPHA:
            conservative_test(0.0, alpha)  # raises
        out = conservative_test(statistic(cache, None, kind), alpha, kind.label)
        out.notes += kind.notes(cache.data.n)
        return out
    if method == "resampling":
        return resampling_test(cache, None, kind, L, alpha, rng, workers)
    if method == "consistent":
        return consistent_test(statistic(cache, None, kind), cache.data.N, beta, C, kind.label)
    raise UsageError(f"unknown method {method!r}")

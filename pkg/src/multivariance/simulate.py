"""Benchmark scenarios and power/size studies.

Scenario strings
----------------
``tetrahedron``
    Three indicators of a uniform face ``U`` in 1..4: ``U in {1,4}``,
    ``U in {2,4}``, ``U in {3,4}``.
``coins:n``
    ``n`` fair 0/1 coins plus a column with the parity of their sum.
``pcoins:n:r[:normal|cauchy3]``
    ``coins:n`` with ``r * Z`` added to every column, ``Z`` standard normal
    or a cubed standard Cauchy variable.
``mvnormal:PATTERN:dim[:d1/d2/...]``
    Centered normal vector with covariance ``const(c)``, ``ar(c)``,
    ``band(c,w)`` or ``block(size,c)``; the optional layout groups columns.
``normal:n[:d]``
    ``n`` independent standard normal groups of dimension ``d``.
``K*ITEM``
    ``K`` independent realizations of ``ITEM`` side by side.
``copies:K:ITEM``
    ``K`` identical copies of one realization of ``ITEM``.
``A+B``
    Independent scenarios side by side.
``ITEM@arctan`` / ``ITEM@ln_square``
    Elementwise transform of the generated values.
"""
from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .centering import Dataset, MatrixCache
from .independence import (MAX_CONSERVATIVE_ALPHA, StatKind, UsageError,
                           resampling_p_value, resampling_replicates, statistic)
from .psi import EUCLID, ConfigurationError, PsiSpec
from .special import Rng, chi2_1_quantile

__all__ = [
    "Scenario",
    "parse_scenario",
    "generate",
    "covariance",
    "TestConfig",
    "power_study",
]

PATTERNS = ("const", "ar", "band", "block")
TRANSFORMS = ("ln_square", "arctan")


@dataclass
class Scenario:
    kind: str
    params: dict = field(default_factory=dict)
    transform: str | None = None
    layout: tuple | None = None
    children: list = field(default_factory=list)

    def __str__(self):
        return self.params.get("text", self.kind)


def covariance(pattern: str, params: Sequence[float], dim: int) -> np.ndarray:
    """Covariance matrix of one of the structured patterns."""
    idx = np.arange(dim)
    lag = np.abs(idx[:, None] - idx[None, :])
    if pattern == "const":
        (c,) = params
        sigma = np.full((dim, dim), float(c))
    elif pattern == "ar":
        (c,) = params
        sigma = float(c) ** lag
    elif pattern == "band":
        c, w = params
        sigma = np.where((lag > 0) & (lag < w), float(c), 0.0)
    elif pattern == "block":
        size, c = params
        size = int(size)
        if size < 1:
            raise ConfigurationError("block size must be positive")
        sigma = np.zeros((dim, dim))
        # remainder columns past the last full block stay independent
        for b in range(dim // size):
            sl = slice(b * size, (b + 1) * size)
            sigma[sl, sl] = float(c)
    else:
        raise ConfigurationError(f"unknown covariance pattern {pattern!r}")
    np.fill_diagonal(sigma, 1.0)
    return sigma


def _cholesky(sigma: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise ConfigurationError("covariance matrix is not positive definite") from None


def _split_top(text: str, sep: str) -> list[str]:
    parts, depth, cur = [], 0, ""
    for ch in text:
        depth += ch == "("
        depth -= ch == ")"
        if ch == sep and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    parts.append(cur)
    return parts


def _num(s: str, what: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise ConfigurationError(f"bad {what} {s!r}") from None


def _int(s: str, what: str, low: int = 1) -> int:
    try:
        v = int(s)
    except ValueError:
        raise ConfigurationError(f"bad {what} {s!r}") from None
    if v < low:
        raise ConfigurationError(f"{what} must be at least {low}, got {v}")
    return v


def parse_scenario(text: str) -> Scenario:
    """Parse a scenario string (see the module docstring)."""
    text = text.strip()
    if not text:
        raise ConfigurationError("empty scenario")
    parts = _split_top(text, "+")
    if len(parts) > 1:
        return Scenario("concat", {"text": text}, children=[parse_scenario(p) for p in parts])
    transform = None
    if "@" in text:
        text, transform = text.rsplit("@", 1)
        if transform not in TRANSFORMS:
            raise ConfigurationError(f"unknown transform {transform!r}")
    m = re.fullmatch(r"(\d+)\*(.+)", text)
    if m:
        child = parse_scenario(m.group(2))
        return Scenario("repeat", {"text": text, "times": _int(m.group(1), "repeat count")},
                        transform, children=[child])
    if text.startswith("copies:"):
        _, k, rest = text.split(":", 2)
        return Scenario("copies", {"text": text, "times": _int(k, "copy count")}, transform,
                        children=[parse_scenario(rest)])
    fields = _split_top(text, ":")
    head, args = fields[0].lower(), fields[1:]
    sc = None
    if head == "tetrahedron" and not args:
        sc = Scenario("tetrahedron")
    elif head == "coins" and len(args) == 1:
        sc = Scenario("coins", {"n": _int(args[0], "coin count")})
    elif head == "pcoins" and len(args) in (2, 3):
        noise = args[2] if len(args) == 3 else "normal"
        if noise not in ("normal", "cauchy3"):
            raise ConfigurationError(f"unknown noise {noise!r}")
        sc = Scenario("perturbed_coins", {"n": _int(args[0], "coin count"),
                                          "r": _num(args[1], "noise scale"), "noise": noise})
    elif head == "normal" and len(args) in (1, 2):
        d = _int(args[1], "dimension") if len(args) == 2 else 1
        sc = Scenario("normal", {"n": _int(args[0], "variable count"), "d": d})
    elif head == "mvnormal" and len(args) in (2, 3):
        pm = re.fullmatch(r"(\w+)\(([^)]*)\)", args[0].strip())
        if not pm or pm.group(1) not in PATTERNS:
            raise ConfigurationError(f"bad covariance pattern {args[0]!r}")
        nums = [_num(v, "pattern parameter") for v in pm.group(2).split(",")]
        want = {"const": 1, "ar": 1, "band": 2, "block": 2}[pm.group(1)]
        if len(nums) != want:
            raise ConfigurationError(f"{pm.group(1)} takes {want} parameter(s)")
        dim = _int(args[1], "dimension")
        layout = None
        if len(args) == 3:
            layout = tuple(_int(v, "group dimension") for v in args[2].split("/"))
            if sum(layout) != dim:
                raise ConfigurationError(f"layout {args[2]} does not sum to {dim}")
        sigma = covariance(pm.group(1), nums, dim)
        _cholesky(sigma)
        sc = Scenario("mvnormal", {"pattern": pm.group(1), "args": nums, "dim": dim},
                      layout=layout)
    if sc is None:
        raise ConfigurationError(f"cannot parse scenario {text!r}")
    sc.transform = transform
    sc.params["text"] = text if transform is None else f"{text}@{transform}"
    return sc


def _blocks(sc: Scenario, N: int, rng: Rng) -> list[np.ndarray]:
    """Generate a list of group blocks, each ``(N, d)``."""
    k = sc.kind
    if k == "tetrahedron":
        u = np.floor(rng.uniform(N) * 4).astype(int) + 1
        blocks = [np.isin(u, [1, 4]), np.isin(u, [2, 4]), np.isin(u, [3, 4])]
        blocks = [b.astype(np.float64)[:, None] for b in blocks]
    elif k in ("coins", "perturbed_coins"):
        n = sc.params["n"]
        y = rng.bernoulli((N, n))
        y = np.hstack([y, (y.sum(axis=1) % 2)[:, None]])
        if k == "perturbed_coins":
            if sc.params["noise"] == "normal":
                z = rng.normal((N, n + 1))
            else:
                z = rng.cauchy((N, n + 1)) ** 3
            y = y + sc.params["r"] * z
        blocks = [y[:, [j]] for j in range(n + 1)]
    elif k == "normal":
        d = sc.params["d"]
        x = rng.normal((N, sc.params["n"] * d))
        blocks = [x[:, i * d:(i + 1) * d] for i in range(sc.params["n"])]
    elif k == "mvnormal":
        dim = sc.params["dim"]
        chol = _cholesky(covariance(sc.params["pattern"], sc.params["args"], dim))
        x = rng.normal((N, dim)) @ chol.T
        layout = sc.layout or (1,) * dim
        cuts = np.cumsum((0,) + tuple(layout))
        blocks = [x[:, a:b] for a, b in zip(cuts[:-1], cuts[1:])]
    elif k == "repeat":
        blocks = []
        for _ in range(sc.params["times"]):
            blocks += _blocks(sc.children[0], N, rng)
    elif k == "copies":
        once = _blocks(sc.children[0], N, rng)
        blocks = [b.copy() for _ in range(sc.params["times"]) for b in once]
    elif k == "concat":
        blocks = []
        for child in sc.children:
            blocks += _blocks(child, N, rng)
    else:
        raise ConfigurationError(f"unknown scenario kind {k!r}")
    if sc.transform == "arctan":
        blocks = [np.arctan(b) for b in blocks]
    elif sc.transform == "ln_square":
        with np.errstate(divide="ignore"):
            blocks = [np.log(b * b) for b in blocks]
    return blocks


def generate(scenario: Scenario | str, N: int, rng: Rng | int = 0) -> Dataset:
    """``N`` samples of a scenario as a :class:`Dataset`."""
    if isinstance(scenario, str):
        scenario = parse_scenario(scenario)
    if isinstance(rng, (int, np.integer)):
        rng = Rng(int(rng))
    if N < 2:
        raise ConfigurationError("N must be at least 2")
    return Dataset.from_blocks(_blocks(scenario, N, rng))


# -- power studies -------------------------------------------------------------

@dataclass
class TestConfig:
    """Statistics and decision rules evaluated on every simulated sample."""

    __test__ = False  # not a pytest class

    kinds: tuple = ("multi",)
    methods: tuple = ("resampling",)
    alpha: float = 0.05
    L: int = 300
    beta: float = 0.5
    C: float = 2.0
    psi: PsiSpec | Sequence = EUCLID

    def __post_init__(self):
        if isinstance(self.kinds, str):
            self.kinds = (self.kinds,)
        if isinstance(self.methods, str):
            self.methods = (self.methods,)
        self.kinds = tuple(StatKind.parse(k) for k in self.kinds)
        for meth in self.methods:
            if meth not in ("conservative", "resampling", "consistent"):
                raise UsageError(f"unknown method {meth!r}")
        if "conservative" in self.methods and not 0 < self.alpha <= MAX_CONSERVATIVE_ALPHA:
            raise UsageError(f"conservative decisions need 0 < alpha <= {MAX_CONSERVATIVE_ALPHA}")
        if not 0 < self.alpha < 1:
            raise UsageError("alpha must lie in (0, 1)")


def _one_run(scenario: Scenario, N: int, cfg: TestConfig, seed: int, null=None):
    """Statistics and rejections of one simulated sample."""
    rng = Rng(seed)
    data = generate(scenario, N, rng)
    cache = MatrixCache(data, cfg.psi)
    stats, rejects = {}, {}
    if "resampling" in cfg.methods and null is None:
        observed, reps = resampling_replicates(cache, None, cfg.kinds, cfg.L, rng)
    else:
        observed = [statistic(cache, None, k) for k in cfg.kinds]
        reps = null
    for i, k in enumerate(cfg.kinds):
        s = observed[i]
        stats[k.label] = s
        for meth in cfg.methods:
            if meth == "conservative":
                hit = s > chi2_1_quantile(1.0 - cfg.alpha)
            elif meth == "consistent":
                hit = s > float(N) ** (1.0 - cfg.beta) * cfg.C
            else:
                hit = resampling_p_value(reps[i], s) <= cfg.alpha
            rejects[(k.label, meth)] = bool(hit)
    return stats, rejects, reps


def power_study(scenario: Scenario | str, config: TestConfig | None = None,
                Ns: Sequence[int] = (100,), runs: int = 1000, seed: int = 0,
                shared_null: bool = False, workers: int = 1) -> list[dict]:
    """Empirical rejection rates over ``runs`` seeded samples per ``N``.

    Run ``r`` at sample size ``N`` uses seed ``seed + r``. With
    ``shared_null`` the resampling distribution of the first run is reused
    for every run at that ``N``. Each row carries the rate, a 95% binomial
    half-width and the mean statistic.
    """
    if isinstance(scenario, str):
        scenario = parse_scenario(scenario)
    config = config or TestConfig()
    if runs < 1:
        raise UsageError("runs must be at least 1")
    rows = []
    for N in Ns:
        null = None
        first = None
        if shared_null and "resampling" in config.methods:
            first = _one_run(scenario, N, config, seed)
            null = first[2]
        todo = range(1 if first else 0, runs)

        def job(r, N=N, null=null):
            return _one_run(scenario, N, config, seed + r, null)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                results = list(ex.map(job, todo))
        else:
            results = [job(r) for r in todo]
        if first:
            results.insert(0, first)
        for k in config.kinds:
            mean_stat = float(np.mean([res[0][k.label] for res in results]))
            for meth in config.methods:
                hits = sum(res[1][(k.label, meth)] for res in results)
                rate = hits / runs
                rows.append({
                    "scenario": str(scenario), "N": int(N), "kind": k.label, "method": meth,
                    "alpha": config.alpha if meth != "consistent" else None,
                    "runs": runs, "rejections": int(hits), "rate": rate,
                    "half_width": 1.96 * math.sqrt(rate * (1.0 - rate) / runs),
                    "mean_statistic": mean_stat,
                })
    return rows

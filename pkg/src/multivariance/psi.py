"""Distance functions psi used to build the per-variable distance matrices.

Every supported psi is radial, ``psi(y) = g(|y|)``, so pairwise evaluation
reduces to Euclidean distances followed by an elementwise map.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PsiSpec",
    "ConfigurationError",
    "psi_eval",
    "psi_radial",
    "pairwise_psi",
    "parse_psi",
    "parse_psi_list",
    "EUCLID",
]

FAMILIES = ("euclid_power", "bounded_exp", "log_type")
FAMILY_CODE = {name: i for i, name in enumerate(FAMILIES)}


class ConfigurationError(ValueError):
    """Invalid parameters for a distance function or scenario."""


@dataclass(frozen=True)
class PsiSpec:
    """Descriptor of a distance function.

    ``euclid_power``: ``|y|**alpha`` with ``0 < alpha <= 2``.
    ``bounded_exp``: ``1 - exp(-delta * |y|**alpha)`` with ``0 < alpha < 2``.
    ``log_type``: ``log(1 + |y|**2 / 2)``.
    """

    family: str = "euclid_power"
    alpha: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown psi family {self.family!r}")
        a, d = float(self.alpha), float(self.delta)
        if self.family == "euclid_power" and not 0.0 < a <= 2.0:
            raise ConfigurationError(f"euclid_power needs 0 < alpha <= 2, got {a}")
        if self.family == "bounded_exp":
            if not 0.0 < a < 2.0:
                raise ConfigurationError(f"bounded_exp needs 0 < alpha < 2, got {a}")
            if not d > 0.0:
                raise ConfigurationError(f"bounded_exp needs delta > 0, got {d}")

    @property
    def characterizing(self) -> bool:
        """False for ``|y|**2``, whose zero does not imply independence."""
        return not (self.family == "euclid_power" and self.alpha == 2.0)

    @property
    def code(self) -> int:
        return FAMILY_CODE[self.family]

    def to_string(self) -> str:
        if self.family == "euclid_power":
            return f"euclid:{self.alpha:g}"
        if self.family == "bounded_exp":
            return f"expbnd:{self.alpha:g}:{self.delta:g}"
        return "log"

    def __str__(self):
        return self.to_string()


EUCLID = PsiSpec()


def psi_radial(spec: PsiSpec, r):
    """Apply psi to Euclidean norms ``r`` (scalar or array)."""
    r = np.asarray(r, dtype=np.float64)
    if spec.family == "euclid_power":
        if spec.alpha == 1.0:
            return r.copy()
        if spec.alpha == 2.0:
            return r * r
        return r ** spec.alpha
    if spec.family == "bounded_exp":
        return -np.expm1(-spec.delta * r ** spec.alpha)
    return np.log1p(0.5 * r * r)


def psi_eval(spec: PsiSpec, y) -> float:
    """psi of a single vector ``y``.

    >>> psi_eval(PsiSpec("euclid_power", 1.0), [3.0, 4.0])
    5.0
    """
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if not np.all(np.isfinite(y)):
        raise ValueError("psi_eval needs a finite vector")
    return float(psi_radial(spec, math.hypot(*y) if y.size > 1 else abs(y[0])))


def pairwise_psi(spec: PsiSpec, x) -> np.ndarray:
    """Matrix ``B[j, k] = psi(x[j] - x[k])`` for samples in the rows of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] == 1:
        r = np.abs(x[:, 0][:, None] - x[:, 0][None, :])
    else:
        diff = x[:, None, :] - x[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    b = psi_radial(spec, r)
    np.fill_diagonal(b, 0.0)
    return b


def parse_psi(text: str) -> PsiSpec:
    """Parse ``euclid:1.0``, ``expbnd:alpha:delta`` or ``log``."""
    parts = text.strip().split(":")
    head = parts[0].lower()
    try:
        if head == "euclid" and len(parts) <= 2:
            return PsiSpec("euclid_power", float(parts[1]) if len(parts) == 2 else 1.0)
        if head == "expbnd" and len(parts) in (1, 2, 3):
            alpha = float(parts[1]) if len(parts) > 1 else 1.0
            delta = float(parts[2]) if len(parts) > 2 else 1.0
            return PsiSpec("bounded_exp", alpha, delta)
        if head == "log" and len(parts) == 1:
            return PsiSpec("log_type")
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"cannot parse psi {text!r}: {exc}") from None
    raise ConfigurationError(f"cannot parse psi {text!r}")


def parse_psi_list(text: str, n_groups: int) -> list[PsiSpec]:
    """One spec for all groups, or a comma list with one entry per group."""
    items = [s for s in text.split(",") if s.strip()]
    specs = [parse_psi(s) for s in items]
    if len(specs) == 1:
        return specs * n_groups
    if len(specs) != n_groups:
        raise ConfigurationError(
            f"got {len(specs)} psi specs for {n_groups} groups")
    return specs


def warn_if_noncharacterizing(specs) -> None:
    if any(not s.characterizing for s in specs):
        warnings.warn("psi = |y|^2 does not characterize independence; a zero "
                      "value only indicates zero covariance", stacklevel=3)

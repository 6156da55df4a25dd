"""Datasets, distance matrices and doubly centered matrices."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .psi import EUCLID, PsiSpec, pairwise_psi

__all__ = [
    "Dataset",
    "CenteredMatrix",
    "DataError",
    "distance_matrix",
    "double_center",
    "scale_matrix",
    "MatrixCache",
    "SCALINGS",
]

SCALINGS = ("raw", "normalized", "r_scaled", "mcor_scaled")


class DataError(ValueError):
    """Malformed input data."""


@dataclass
class Dataset:
    """``N`` samples of ``n`` variable groups.

    ``groups`` holds half-open column ranges ``(start, stop)`` that must be
    disjoint and cover every column of ``values``.
    """

    values: np.ndarray
    groups: list = None
    names: list = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise DataError("values must be a 2-d array")
        if v.shape[0] < 2:
            raise DataError(f"need at least 2 samples, got {v.shape[0]}")
        if v.shape[1] < 1:
            raise DataError("need at least one column")
        if not np.all(np.isfinite(v)):
            bad = np.argwhere(~np.isfinite(v))[0]
            raise DataError(f"non-finite value at row {bad[0] + 1}, column {bad[1] + 1}")
        self.values = v
        if self.groups is None:
            self.groups = [(j, j + 1) for j in range(v.shape[1])]
        self.groups = [(int(a), int(b)) for a, b in self.groups]
        covered = np.zeros(v.shape[1], dtype=int)
        for a, b in self.groups:
            if not 0 <= a < b <= v.shape[1]:
                raise DataError(f"group range {a + 1}-{b} outside 1-{v.shape[1]}")
            covered[a:b] += 1
        if np.any(covered != 1):
            raise DataError("groups must be disjoint and cover every column")
        if self.names is None:
            self.names = [f"X{i + 1}" for i in range(len(self.groups))]
        if len(self.names) != len(self.groups):
            raise DataError("one name per group is required")
        self.names = [str(s) for s in self.names]

    @classmethod
    def from_blocks(cls, blocks: Sequence, names=None) -> "Dataset":
        """Build from a list of per-group arrays (1-d or 2-d)."""
        arrs = [np.asarray(b, dtype=np.float64) for b in blocks]
        arrs = [a[:, None] if a.ndim == 1 else a for a in arrs]
        groups, start = [], 0
        for a in arrs:
            groups.append((start, start + a.shape[1]))
            start += a.shape[1]
        return cls(np.hstack(arrs), groups, names)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return len(self.groups)

    @property
    def dims(self) -> list[int]:
        return [b - a for a, b in self.groups]

    def group(self, i: int) -> np.ndarray:
        a, b = self.groups[i]
        return self.values[:, a:b]

    def columns(self, members) -> np.ndarray:
        """Concatenated columns of several groups."""
        return np.hstack([self.group(i) for i in members])

    def take(self, rows) -> "Dataset":
        return Dataset(self.values[rows], list(self.groups), list(self.names))


@dataclass
class CenteredMatrix:
    """Symmetric doubly centered ``N x N`` matrix with its scaling tag."""

    entries: np.ndarray
    scaling: str = "raw"
    n: int | None = None
    degenerate: bool = False
    flags: list = field(default_factory=list)

    @property
    def N(self) -> int:
        return self.entries.shape[0]


def distance_matrix(data: Dataset, group: int, psi: PsiSpec = EUCLID) -> np.ndarray:
    """``B[j, k] = psi(x_j - x_k)`` on the columns of one group."""
    return pairwise_psi(psi, data.group(group))


def _center(b: np.ndarray) -> np.ndarray:
    row = b.mean(axis=1)
    col = b.mean(axis=0)
    grand = row.mean()
    return -b + row[:, None] + col[None, :] - grand


def double_center(b) -> CenteredMatrix:
    """``A = -C B C`` via row, column and grand means."""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError("distance matrix must be square")
    return CenteredMatrix(_center(b))


def _signed_root(x: float, n: int) -> float:
    return float(np.sign(x) * abs(x) ** (1.0 / n))


def scale_matrix(a: CenteredMatrix, b, variant: str, n: int | None = None) -> CenteredMatrix:
    """Divide a raw centered matrix by the denominator of ``variant``.

    ``normalized`` uses the grand mean of ``b``; ``r_scaled`` the ``n``-th
    root of the mean of ``|A|**n``; ``mcor_scaled`` the signed real ``n``-th
    root of the mean of ``A**n``. A zero denominator yields a zero matrix
    marked degenerate.
    """
    if a.scaling != "raw":
        raise ValueError("scale_matrix expects a raw centered matrix")
    ent = a.entries
    flags = []
    if variant == "raw":
        return CenteredMatrix(ent, "raw")
    if variant == "normalized":
        denom = float(np.mean(b))
        n = None
    elif variant in ("r_scaled", "mcor_scaled"):
        if n is None or n < 2:
            raise ValueError(f"{variant} needs n >= 2")
        if variant == "r_scaled" or n % 2 == 0:
            denom = float(np.mean(np.abs(ent) ** n)) ** (1.0 / n)
        else:
            m = float(np.mean(ent ** n))
            denom = _signed_root(m, n)
            if m < 0:
                flags.append("negative radicand, signed root taken")
    else:
        raise ValueError(f"unknown scaling {variant!r}")
    if denom == 0.0:
        return CenteredMatrix(np.zeros_like(ent), variant, n, True, flags)
    return CenteredMatrix(ent / denom, variant, n, False, flags)


class MatrixCache:
    """Centered matrices per ``(group, scaling, n)``, computed once.

    ``psis`` is one spec per group. Matrices for arbitrary group tuples
    (concatenated columns) are cached by the tuple of member indices, using
    the psi of the lowest-index member.
    """

    def __init__(self, data: Dataset, psis: Sequence[PsiSpec] | PsiSpec = EUCLID):
        self.data = data
        if isinstance(psis, PsiSpec):
            psis = [psis] * data.n
        if len(psis) != data.n:
            raise ValueError(f"got {len(psis)} psi specs for {data.n} groups")
        self.psis = list(psis)
        self._dist: dict = {}
        self._raw: dict = {}
        self._scaled: dict = {}

    @staticmethod
    def _key(members) -> tuple:
        if isinstance(members, (int, np.integer)):
            return (int(members),)
        return tuple(sorted(int(i) for i in members))

    def distance(self, members) -> np.ndarray:
        key = self._key(members)
        if key not in self._dist:
            x = self.data.columns(key)
            self._dist[key] = pairwise_psi(self.psis[key[0]], x)
        return self._dist[key]

    def raw(self, members) -> CenteredMatrix:
        key = self._key(members)
        if key not in self._raw:
            self._raw[key] = double_center(self.distance(key))
        return self._raw[key]

    def get(self, members, scaling: str = "normalized", n: int | None = None) -> CenteredMatrix:
        key = self._key(members)
        if scaling == "raw":
            return self.raw(key)
        if scaling == "normalized":
            n = None
        ck = (key, scaling, n)
        if ck not in self._scaled:
            self._scaled[ck] = scale_matrix(self.raw(key), self.distance(key), scaling, n)
        return self._scaled[ck]

    def matrices(self, scaling: str = "normalized", n: int | None = None, members=None):
        """List of matrices for each single group (or for ``members``)."""
        if members is None:
            members = range(self.data.n)
        return [self.get(i, scaling, n) for i in members]

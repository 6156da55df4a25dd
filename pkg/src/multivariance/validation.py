"""Input validation shared by the estimators and the command line."""
from __future__ import annotations

import re
from typing import Sequence

import numpy as np
from sklearn.utils.validation import check_array

from .centering import DataError, Dataset
from .psi import PsiSpec, parse_psi_list

__all__ = ["parse_group_spec", "check_data", "check_psi"]

_ITEM = re.compile(r"^\s*(?:([^:,]+):)?\s*(\d+)\s*(?:-\s*(\d+))?\s*$")


def parse_group_spec(spec: str | None, width: int):
    """Parse ``name:first-last`` items (1-based, inclusive) into ranges.

    Returns ``(groups, names)`` with half-open 0-based column ranges.
    ``None`` or an empty string gives one group per column.

    >>> parse_group_spec("x:1-2,y:3", 3)
    ([(0, 2), (2, 3)], ['x', 'y'])
    """
    if spec is None or not spec.strip():
        return [(j, j + 1) for j in range(width)], None
    groups, names, used = [], [], np.zeros(width, dtype=bool)
    for pos, item in enumerate(spec.split(",")):
        m = _ITEM.match(item)
        if not m:
            raise DataError(f"bad group item {item!r}; expected name:first-last")
        first = int(m.group(2))
        last = int(m.group(3)) if m.group(3) else first
        if not 1 <= first <= last <= width:
            raise DataError(f"group {item.strip()!r} is outside columns 1-{width}")
        if used[first - 1:last].any():
            raise DataError(f"group {item.strip()!r} overlaps an earlier group")
        used[first - 1:last] = True
        groups.append((first - 1, last))
        names.append(m.group(1).strip() if m.group(1) else f"X{pos + 1}")
    if not used.all():
        missing = [str(j + 1) for j in np.flatnonzero(~used)]
        raise DataError(f"columns {', '.join(missing)} belong to no group")
    return groups, names


def check_data(X, groups=None, names=None) -> Dataset:
    """Validate an array and attach a grouping.

    ``groups`` may be a :class:`Dataset` grouping (list of ranges), a list
    of group dimensions, or a group spec string.
    """
    if isinstance(X, Dataset):
        return X
    arr = check_array(X, dtype=np.float64, ensure_min_samples=2, ensure_2d=False)
    if arr.ndim == 1:
        arr = arr[:, None]
    width = arr.shape[1]
    if isinstance(groups, str):
        groups, parsed = parse_group_spec(groups, width)
        names = names if names is not None else parsed
    elif groups is not None and all(isinstance(g, (int, np.integer)) for g in groups):
        cuts = np.cumsum([0] + [int(g) for g in groups])
        if cuts[-1] != width:
            raise DataError(f"group dimensions sum to {cuts[-1]}, data has {width} columns")
        groups = list(zip(cuts[:-1].tolist(), cuts[1:].tolist()))
    return Dataset(arr, groups, names)


def check_psi(psi, n: int) -> list[PsiSpec]:
    """One :class:`PsiSpec` per group from a spec, a string, or a list."""
    if isinstance(psi, PsiSpec):
        return [psi] * n
    if isinstance(psi, str):
        return parse_psi_list(psi, n)
    specs: Sequence = list(psi)
    specs = [p if isinstance(p, PsiSpec) else parse_psi_list(p, 1)[0] for p in specs]
    if len(specs) == 1:
        return specs * n
    if len(specs) != n:
        raise ValueError(f"got {len(specs)} psi specs for {n} groups")
    return specs

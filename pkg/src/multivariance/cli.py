"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .centering import DataError, Dataset, MatrixCache
from .independence import UsageError, run_test
from .measures import measure
from .psi import ConfigurationError, parse_psi_list
from .simulate import TestConfig, generate, parse_scenario, power_study
from .special import Rng
from .structure import DetectionOptions, detect, to_dot, to_json
from .validation import parse_group_spec

__all__ = ["main", "ingest_csv", "SEED_ENV"]

SEED_ENV = "MULTIVARIANCE_SEED"

# compute --kind spellings
_MEASURES = {"multi": "multivariance", "multivariance": "multivariance", "total": "total",
             "mcor": "multicorrelation", "mcor2": "mcor2", "totmcor": "tot_mcor_lb"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def ingest_csv(path, group_spec: str | None = None) -> Dataset:
    """Read a CSV with a header row into a :class:`Dataset`.

    Errors name the 1-based data row (header excluded) and column.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    width = len(header)
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    values = np.empty((len(body), width))
    for i, row in enumerate(body, start=1):
        if len(row) != width:
            raise DataError(f"data row {i}: expected {width} columns, got {len(row)}")
        for j, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"data row {i}, column {j}: cannot parse {cell.strip()!r} "
                                "as a number") from None
            if not math.isfinite(v):
                raise DataError(f"data row {i}, column {j}: value {cell.strip()!r} is not finite")
            values[i - 1, j - 1] = v
    groups, names = parse_group_spec(group_spec, width)
    if names is None:
        names = header if len(set(header)) == width and all(header) else None
    return Dataset(values, groups, names)


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _common(p: argparse.ArgumentParser, data: bool = True) -> None:
    if data:
        p.add_argument("data", help="CSV file with a header row")
        p.add_argument("--groups", default=None,
                       help="column groups as name:first-last,... (1-based, inclusive)")
        p.add_argument("--psi", default="euclid:1",
                       help="euclid:ALPHA, expbnd:ALPHA:DELTA or log; one or one per group")
    p.add_argument("--seed", type=int, default=None,
                   help=f"random seed (default ${SEED_ENV} or 0)")
    p.add_argument("--workers", type=int, default=1, help="worker threads (default 1)")


def _decision_flags(p, alpha_default=0.05):
    p.add_argument("--alpha", type=float, default=alpha_default)
    p.add_argument("--L", type=int, default=300, help="resampling replicates")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--C", type=float, default=2.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="multivariance", description="Distance multivariance toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("compute", help="compute a dependence measure")
    _common(p)
    p.add_argument("--kind", default="multi",
                   help="multi, total, m2, m3, m:K, total_m:K, lambda:X, mcor, mcor2, totmcor")
    p.add_argument("--scaling", choices=["normalized", "raw"], default="normalized")

    p = sub.add_parser("test", help="test independence of the groups")
    _common(p)
    p.add_argument("--kind", default="multi", help="multi, total, m2, m3, comb, m:K, lambda:X")
    p.add_argument("--method", choices=["conservative", "resampling", "consistent"],
                   default="resampling")
    _decision_flags(p)

    p = sub.add_parser("structure", help="detect the dependence structure")
    _common(p)
    p.add_argument("--mode", choices=["full", "clustered"], default="full")
    p.add_argument("--decision", choices=["conservative", "resampling", "consistent"],
                   default="conservative")
    p.add_argument("--label", choices=["statistic", "order", "p_value"], default="statistic")
    _decision_flags(p)
    p.add_argument("--out", default=None, help="graph.dot or graph.json (default JSON on stdout)")

    p = sub.add_parser("simulate", help="sample a benchmark scenario")
    _common(p, data=False)
    p.add_argument("--scenario", required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")

    p = sub.add_parser("power", help="empirical power or size of tests")
    _common(p, data=False)
    p.add_argument("--scenario", required=True)
    p.add_argument("--test", default="multi", help="comma list of statistic kinds")
    p.add_argument("--method", default="resampling", help="comma list of methods")
    p.add_argument("--psi", default="euclid:1")
    _decision_flags(p)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--Ns", default="100", help="comma list of sample sizes")
    p.add_argument("--shared-null", action="store_true",
                   help="reuse one resampling distribution per sample size")
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    return parser


def _meta(seed, psis, data: Dataset | None) -> dict:
    meta = {"tool_version": __version__, "seed": seed,
            "psi": [str(p) for p in psis] if psis is not None else None, "groups": None}
    if data is not None:
        meta["groups"] = [{"name": nm, "columns": [a + 1, b]}
                          for nm, (a, b) in zip(data.names, data.groups)]
    return meta


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _dump(doc: dict) -> str:
    return json.dumps(_jsonable(doc), indent=2) + "\n"


def _load(args):
    data = ingest_csv(args.data, args.groups)
    psis = parse_psi_list(args.psi, data.n)
    return data, psis


def _cmd_compute(args, seed):
    data, psis = _load(args)
    kind, m, lam = args.kind, None, None
    if kind in ("m2", "m3"):
        kind, m = "m_multi", int(kind[1])
    elif kind.startswith("m:"):
        kind, m = "m_multi", _as_int(kind[2:])
    elif kind.startswith("total_m:"):
        kind, m = "total_m", _as_int(kind[8:])
    elif kind.startswith("lambda:"):
        kind, lam = "lambda_total", float(kind[7:])
    elif kind in _MEASURES:
        kind = _MEASURES[kind]
    else:
        raise UsageError(f"unknown measure kind {args.kind!r}")
    if data.n < 2:
        raise UsageError("need at least 2 variable groups")
    if m is not None and not 2 <= m <= data.n:
        raise UsageError(f"m must satisfy 2 <= m <= {data.n}")
    if lam is not None and lam < 0:
        raise UsageError("lambda must be >= 0")
    mv = measure(MatrixCache(data, psis), kind=kind, m=m, lam=lam, scaling=args.scaling)
    return _dump({**_meta(seed, psis, data), "result": mv.to_dict(),
                  "statistic": mv.statistic})


def _as_int(s: str) -> int:
    try:
        return int(s)
    except ValueError:
        raise UsageError(f"expected an integer, got {s!r}") from None


def _cmd_test(args, seed):
    data, psis = _load(args)
    if data.n < 2:
        raise UsageError("need at least 2 variable groups")
    out = run_test(MatrixCache(data, psis), None, args.kind, args.method, args.alpha, args.L,
                   args.beta, args.C, Rng(seed), args.workers)
    return _dump({**_meta(seed, psis, data), "result": out.to_dict()})


def _cmd_structure(args, seed):
    data, psis = _load(args)
    if data.n < 2:
        raise UsageError("need at least 2 variable groups")
    opts = DetectionOptions(args.mode, args.decision, args.alpha, args.L, args.beta, args.C,
                            args.label)
    graph = detect(data, psis, opts, Rng(seed), seed)
    meta = _meta(seed, psis, data)
    if args.out and args.out.lower().endswith(".dot"):
        _emit(to_dot(graph), args.out)
        return None
    text = to_json(graph, tool_version=meta["tool_version"], groups=meta["groups"]) + "\n"
    _emit(text, args.out)
    return None


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _cmd_simulate(args, seed):
    if args.N < 2:
        raise UsageError("--N must be at least 2")
    data = generate(parse_scenario(args.scenario), args.N, Rng(seed))
    header = []
    for name, d in zip(data.names, data.dims):
        header += [name] if d == 1 else [f"{name}_{k + 1}" for k in range(d)]
    rows = [[repr(float(v)) for v in row] for row in data.values]
    _emit(_csv_text(header, rows), args.out)
    return None


def _cmd_power(args, seed):
    try:
        Ns = [int(s) for s in args.Ns.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad --Ns {args.Ns!r}") from None
    if not Ns or min(Ns) < 2:
        raise UsageError("--Ns needs sample sizes of at least 2")
    sc = parse_scenario(args.scenario)
    n = generate(sc, 2, Rng(seed)).n
    psis = parse_psi_list(args.psi, n)
    cfg = TestConfig(tuple(k for k in args.test.split(",") if k),
                     tuple(m for m in args.method.split(",") if m),
                     args.alpha, args.L, args.beta, args.C, psis)
    for k in cfg.kinds:
        k.check(n)
    rows = power_study(sc, cfg, Ns, args.runs, seed, args.shared_null, args.workers)
    cols = ["scenario", "N", "kind", "method", "alpha", "runs", "rejections", "rate",
            "half_width", "mean_statistic"]
    body = [["" if r[c] is None else r[c] for c in cols] for r in rows]
    _emit(_csv_text(cols, body), args.out)
    return None


_COMMANDS = {"compute": _cmd_compute, "test": _cmd_test, "structure": _cmd_structure,
             "simulate": _cmd_simulate, "power": _cmd_power}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "workers", 1) < 1:
            raise UsageError("--workers must be at least 1")
        seed = args.seed if args.seed is not None else _default_seed()
        text = _COMMANDS[args.command](args, seed)
        if text is not None:
            sys.stdout.write(text)
        return 0
    except (UsageError, ConfigurationError) as exc:
        print(f"multivariance: usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"multivariance: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

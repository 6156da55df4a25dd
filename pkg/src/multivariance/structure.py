"""Dependence structure detection and graph export.

Graphs contain three node kinds. ``variable`` nodes (ids ``v1..vn``) are the
input groups, ``dependency`` nodes (``d1, d2, ...``) mark a detected
dependence among the nodes they connect to, and ``cluster`` nodes
(``c1, ...``, clustered mode only) stand for a merged group of variables
when that group takes part in a further detection. Member sets are 1-based
variable indices.
"""
from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .centering import Dataset, MatrixCache
from .independence import MAX_CONSERVATIVE_ALPHA, UsageError, resampling_p_value
from .measures import PROD, _as_stack, _batch_pair_sums, pair_sums
from .psi import EUCLID, PsiSpec
from .special import Rng, chi2_1_sf, holm_adjust

__all__ = [
    "DetectionOptions",
    "Node",
    "DependencyGraph",
    "detect_full",
    "detect_clustered",
    "detect",
    "type_i_bound",
    "to_dot",
    "to_json",
    "from_json",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1
DECISIONS = ("conservative", "resampling", "consistent")
LABELS = ("statistic", "order", "p_value")


@dataclass
class DetectionOptions:
    mode: str = "full"
    decision: str = "conservative"
    alpha: float = 0.05
    L: int = 300
    beta: float = 0.5
    C: float = 2.0
    label: str = "statistic"

    def __post_init__(self):
        if self.mode not in ("full", "clustered"):
            raise UsageError(f"unknown mode {self.mode!r}")
        if self.decision not in DECISIONS:
            raise UsageError(f"unknown decision {self.decision!r}")
        if self.label not in LABELS:
            raise UsageError(f"unknown label {self.label!r}")
        if self.decision == "conservative" and not 0.0 < self.alpha <= MAX_CONSERVATIVE_ALPHA:
            raise UsageError(f"conservative decisions need 0 < alpha <= {MAX_CONSERVATIVE_ALPHA}")
        if self.decision == "resampling" and not 0.0 < self.alpha < 1.0:
            raise UsageError("alpha must lie in (0, 1)")
        if self.decision == "resampling" and self.L < 1:
            raise UsageError("L must be at least 1")
        if self.decision == "consistent" and not (0.0 < self.beta < 1.0 and self.C > 0):
            raise UsageError("consistent decisions need 0 < beta < 1 and C > 0")

    def to_dict(self) -> dict:
        d = {"mode": self.mode, "decision": self.decision, "label": self.label}
        if self.decision == "consistent":
            d.update(beta=self.beta, C=self.C)
        else:
            d["alpha"] = self.alpha
        if self.decision == "resampling":
            d["L"] = self.L
        return d


@dataclass
class Node:
    id: str
    kind: str
    label: str
    members: tuple
    order: int | None = None
    statistic: float | None = None
    p_value: float | None = None

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": self.kind, "label": self.label,
                "members": list(self.members), "order": self.order,
                "statistic": self.statistic, "p_value": self.p_value}


@dataclass
class DependencyGraph:
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @classmethod
    def with_variables(cls, names: Sequence[str]) -> "DependencyGraph":
        g = cls()
        for i, name in enumerate(names):
            g.nodes.append(Node(f"v{i + 1}", "variable", name, (i + 1,)))
        return g

    def node(self, node_id: str) -> Node:
        for nd in self.nodes:
            if nd.id == node_id:
                return nd
        raise KeyError(node_id)

    @property
    def dependency_nodes(self) -> list:
        return [nd for nd in self.nodes if nd.kind == "dependency"]

    @property
    def cluster_nodes(self) -> list:
        return [nd for nd in self.nodes if nd.kind == "cluster"]

    def neighbours(self, node_id: str) -> list:
        return [b if a == node_id else a for a, b in self.edges if node_id in (a, b)]

    def structure(self) -> set:
        """Set of ``(order, frozenset(members))`` of the dependency nodes."""
        return {(nd.order, frozenset(nd.members)) for nd in self.dependency_nodes}

    def __eq__(self, other):
        if not isinstance(other, DependencyGraph):
            return NotImplemented
        return (sorted((n.to_dict() for n in self.nodes), key=lambda d: d["id"])
                == sorted((n.to_dict() for n in other.nodes), key=lambda d: d["id"])
                and sorted(map(tuple, self.edges)) == sorted(map(tuple, other.edges)))


def type_i_bound(k: int, N: int, beta: float, C: float) -> float:
    """``1 - F(N**(1 - beta) * C)**k`` with ``F`` the chi-squared(1) cdf.

    Approximate chance of at least one false detection among ``k`` tests
    at the consistent threshold.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return 0.0
    tail = chi2_1_sf(float(N) ** (1.0 - beta) * C)
    return -math.expm1(k * math.log1p(-tail)) if tail < 1.0 else 1.0


# -- tuple testing -------------------------------------------------------------

class _Tester:
    """Tests tuples of (possibly merged) variables with one decision rule."""

    def __init__(self, data: Dataset, psi, options: DetectionOptions, rng: Rng):
        self.cache = MatrixCache(data, psi)
        self.opt = options
        self.rng = rng
        self.N = data.N
        self.tests = 0
        self.batches = 0

    def _stat(self, stack: np.ndarray) -> float:
        return self.N * max(float(pair_sums(stack)[PROD]), 0.0)

    def test_batch(self, tuples: list) -> list:
        """Return ``(stat, p, flagged)`` for each tuple of member tuples."""
        if not tuples:
            return []
        self.batches += 1
        self.tests += len(tuples)
        opt = self.opt
        stats, pvals = [], []
        for tup in tuples:
            stack = _as_stack([self.cache.get(mem, "normalized") for mem in tup])
            s = self._stat(stack)
            stats.append(s)
            if opt.decision == "conservative":
                pvals.append(chi2_1_sf(s))
            elif opt.decision == "resampling":
                n, size = stack.shape[0], stack.shape[1]
                perms = self.rng.permutations(opt.L * n, size).reshape(opt.L, n, size)
                sums = np.empty((opt.L, 5))
                _batch_pair_sums(stack, perms, 1.0, sums)
                reps = size * np.maximum(sums[:, PROD], 0.0)
                pvals.append(resampling_p_value(reps, s))
            else:
                pvals.append(None)
        if opt.decision == "consistent":
            level = float(self.N) ** (1.0 - opt.beta) * opt.C
            return [(s, None, s > level) for s in stats]
        adj = holm_adjust(pvals)
        return [(s, p, a <= opt.alpha) for s, p, a in zip(stats, pvals, adj)]


def _label(options: DetectionOptions, stat: float, order: int, p) -> str:
    if options.label == "order":
        return str(order)
    if options.label == "p_value" and p is not None:
        return f"{p:.3g}"
    return f"{stat:.1f}"


def _finish(graph: DependencyGraph, data: Dataset, tester: _Tester,
            options: DetectionOptions, seed) -> DependencyGraph:
    if options.decision == "consistent":
        bound = type_i_bound(tester.tests, data.N, options.beta, options.C)
    else:
        bound = 1.0 - (1.0 - options.alpha) ** tester.batches
    graph.metadata = {
        "options": options.to_dict(),
        "N": data.N,
        "n": data.n,
        "seed": seed,
        "psi": [str(p) for p in tester.cache.psis],
        "tests_performed": tester.tests,
        "batches": tester.batches,
        "type_i_bound": bound,
    }
    return graph


def detect_full(data: Dataset, psi: PsiSpec | Sequence = EUCLID,
                options: DetectionOptions | None = None, rng: Rng | None = None,
                seed: int | None = None) -> DependencyGraph:
    """Test all m-tuples, m ascending, whose proper sub-tuples were not flagged."""
    options = options or DetectionOptions()
    n = data.n
    if n < 2:
        raise UsageError("need at least 2 variables")
    if n > 15:
        warnings.warn(f"full detection on {n} variables tests up to 2**{n} tuples",
                      stacklevel=2)
    rng = rng or Rng(0 if seed is None else seed)
    tester = _Tester(data, psi, options, rng)
    graph = DependencyGraph.with_variables(data.names)
    flagged: list[frozenset] = []
    for m in range(2, n + 1):
        cands = [c for c in itertools.combinations(range(n), m)
                 if not any(f < frozenset(c) for f in flagged)]
        results = tester.test_batch([tuple((i,) for i in c) for c in cands])
        for c, (s, p, hit) in zip(cands, results):
            if not hit:
                continue
            flagged.append(frozenset(c))
            nid = f"d{len(graph.dependency_nodes) + 1}"
            graph.nodes.append(Node(nid, "dependency", _label(options, s, m, p),
                                    tuple(i + 1 for i in c), m, s, p))
            graph.edges.extend((f"v{i + 1}", nid) for i in c)
    return _finish(graph, data, tester, options, seed)


def detect_clustered(data: Dataset, psi: PsiSpec | Sequence = EUCLID,
                     options: DetectionOptions | None = None, rng: Rng | None = None,
                     seed: int | None = None) -> DependencyGraph:
    """Merge detected dependencies into clusters and retest at the cluster level.

    A cluster is tested as one multivariate variable (its columns
    concatenated, distance function of its lowest-index member). After any
    detection the clusters are rebuilt and testing restarts at ``m = 2``;
    tuples of unchanged clusters are never retested.
    """
    options = options or DetectionOptions(mode="clustered")
    n = data.n
    if n < 2:
        raise UsageError("need at least 2 variables")
    rng = rng or Rng(0 if seed is None else seed)
    tester = _Tester(data, psi, options, rng)
    graph = DependencyGraph.with_variables(data.names)
    clusters = [frozenset([i]) for i in range(n)]
    tested: set = set()
    # graph node standing for each multi-variable cluster, and nodes without a parent
    cluster_node: dict = {}
    parent: dict = {}

    def attach(cl: frozenset) -> str:
        if len(cl) == 1:
            return f"v{next(iter(cl)) + 1}"
        if cl not in cluster_node:
            cid = f"c{len(cluster_node) + 1}"
            cluster_node[cl] = cid
            graph.nodes.append(Node(cid, "cluster", ",".join(data.names[i] for i in sorted(cl)),
                                    tuple(i + 1 for i in sorted(cl))))
            for nd in list(graph.nodes):
                if (nd.kind in ("dependency", "cluster") and nd.id != cid
                        and nd.id not in parent and {i - 1 for i in nd.members} <= cl):
                    parent[nd.id] = cid
                    graph.edges.append((cid, nd.id))
        return cluster_node[cl]

    m = 2
    while m <= len(clusters):
        cands = []
        for combo in itertools.combinations(clusters, m):
            key = frozenset(combo)
            if key not in tested:
                tested.add(key)
                cands.append(sorted(combo, key=min))
        results = tester.test_batch([tuple(tuple(sorted(c)) for c in combo) for combo in cands])
        hits = [(combo, r) for combo, r in zip(cands, results) if r[2]]
        if not hits:
            m += 1
            continue
        for combo, (s, p, _) in hits:
            nid = f"d{len(graph.dependency_nodes) + 1}"
            members = tuple(sorted(i + 1 for c in combo for i in c))
            ends = [attach(c) for c in combo]
            graph.nodes.append(Node(nid, "dependency", _label(options, s, m, p),
                                    members, m, s, p))
            graph.edges.extend((e, nid) for e in ends)
        # union of clusters joined by a detection
        merged = list(clusters)
        for combo, _ in hits:
            union = frozenset().union(*combo)
            touching = [c for c in merged if c & union]
            merged = [c for c in merged if not c & union] + [frozenset().union(*touching)]
        clusters = sorted(merged, key=min)
        m = 2
    return _finish(graph, data, tester, options, seed)


def detect(data: Dataset, psi: PsiSpec | Sequence = EUCLID,
           options: DetectionOptions | None = None, rng: Rng | None = None,
           seed: int | None = None) -> DependencyGraph:
    options = options or DetectionOptions()
    fn = detect_full if options.mode == "full" else detect_clustered
    return fn(data, psi, options, rng, seed)


# -- export ----------------------------------------------------------------------

def _quote(s: str) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(graph: DependencyGraph) -> str:
    """Graphviz source: circles for variables, bare labels for dependencies."""
    lines = ["graph dependence {"]
    for nd in graph.nodes:
        if nd.kind == "variable":
            attrs = f"shape=circle, label={_quote(nd.label)}"
        elif nd.kind == "cluster":
            attrs = f"shape=box, style=dashed, label={_quote(nd.label)}"
        else:
            attrs = f"shape=none, label={_quote(nd.label)}"
        lines.append(f"  {nd.id} [{attrs}];")
    for a, b in graph.edges:
        lines.append(f"  {a} -- {b};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json(graph: DependencyGraph, **extra) -> str:
    """Serialize as ``{"schema_version", "nodes", "edges", "metadata"}``."""
    meta = dict(graph.metadata)
    meta.update(extra)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "nodes": [nd.to_dict() for nd in graph.nodes],
        "edges": [{"from": a, "to": b} for a, b in graph.edges],
        "metadata": meta,
    }
    return json.dumps(doc, indent=2, sort_keys=False)


def from_json(text: str) -> DependencyGraph:
    doc = json.loads(text)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported graph schema {doc.get('schema_version')!r}")
    nodes = [Node(d["id"], d["kind"], d["label"], tuple(d["members"]), d.get("order"),
                  d.get("statistic"), d.get("p_value")) for d in doc["nodes"]]
    edges = [(e["from"], e["to"]) for e in doc["edges"]]
    return DependencyGraph(nodes, edges, doc.get("metadata", {}))

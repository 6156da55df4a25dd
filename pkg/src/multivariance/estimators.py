"""Estimator-style wrappers following the scikit-learn conventions."""
from __future__ import annotations

from sklearn.base import BaseEstimator

from .centering import MatrixCache
from .independence import run_test
from .measures import measure
from .special import Rng
from .structure import DetectionOptions, detect
from .validation import check_data, check_psi

__all__ = ["DistanceMultivariance", "MultivarianceTest", "DependenceStructure"]


def _prepare(X, groups, psi):
    data = check_data(X, groups)
    return data, check_psi(psi, data.n)


class DistanceMultivariance(BaseEstimator):
    """Compute one sample dependence measure.

    Parameters
    ----------
    kind : str
        ``multivariance``, ``total``, ``m_multi``, ``total_m``,
        ``lambda_total``, ``multicorrelation``, ``mcor2`` or ``tot_mcor_lb``.
    psi : str or PsiSpec or list
        Distance function(s), e.g. ``"euclid:1"`` or ``"euclid:1,log"``.
    groups : str or list, optional
        Column grouping; default one group per column.

    Attributes
    ----------
    value_ : float
        Squared sample measure.
    statistic_ : float or None
        ``N * value_`` for normalized kinds.
    """

    def __init__(self, kind="multivariance", psi="euclid:1", m=None, lam=None,
                 scaling="normalized", groups=None):
        self.kind = kind
        self.psi = psi
        self.m = m
        self.lam = lam
        self.scaling = scaling
        self.groups = groups

    def fit(self, X, y=None):
        data, psis = _prepare(X, self.groups, self.psi)
        self.measure_ = measure(MatrixCache(data, psis), kind=self.kind, m=self.m,
                                lam=self.lam, scaling=self.scaling)
        self.value_ = self.measure_.squared_value
        self.statistic_ = self.measure_.statistic
        self.n_features_in_ = data.values.shape[1]
        return self


class MultivarianceTest(BaseEstimator):
    """Independence test of the column groups of ``X``.

    Attributes
    ----------
    outcome_ : TestOutcome or CombinedOutcome
    statistic_, p_value_, rejection_level_, reject_
        Copied from the outcome (the combined test reports adjusted
        p-values and its global decision only).
    """

    def __init__(self, kind="multi", method="resampling", alpha=0.05, L=300, beta=0.5,
                 C=2.0, psi="euclid:1", groups=None, random_state=0, workers=1):
        self.kind = kind
        self.method = method
        self.alpha = alpha
        self.L = L
        self.beta = beta
        self.C = C
        self.psi = psi
        self.groups = groups
        self.random_state = random_state
        self.workers = workers

    def fit(self, X, y=None):
        data, psis = _prepare(X, self.groups, self.psi)
        out = run_test(MatrixCache(data, psis), None, self.kind, self.method, self.alpha,
                       self.L, self.beta, self.C, Rng(self.random_state), self.workers)
        self.outcome_ = out
        self.reject_ = out.reject
        if hasattr(out, "statistic"):
            self.statistic_ = out.statistic
            self.p_value_ = out.p_value
            self.rejection_level_ = out.rejection_level
        else:
            self.statistic_ = None
            self.p_value_ = min(out.adjusted_p_values)
            self.rejection_level_ = None
        self.n_features_in_ = data.values.shape[1]
        return self


class DependenceStructure(BaseEstimator):
    """Detect the dependence structure among the column groups of ``X``.

    Attributes
    ----------
    graph_ : DependencyGraph
    """

    def __init__(self, mode="full", decision="conservative", alpha=0.05, L=300, beta=0.5,
                 C=2.0, label="statistic", psi="euclid:1", groups=None, random_state=0):
        self.mode = mode
        self.decision = decision
        self.alpha = alpha
        self.L = L
        self.beta = beta
        self.C = C
        self.label = label
        self.psi = psi
        self.groups = groups
        self.random_state = random_state

    def fit(self, X, y=None):
        data, psis = _prepare(X, self.groups, self.psi)
        opts = DetectionOptions(self.mode, self.decision, self.alpha, self.L, self.beta,
                                self.C, self.label)
        self.graph_ = detect(data, psis, opts, Rng(self.random_state), self.random_state)
        self.n_features_in_ = data.values.shape[1]
        return self

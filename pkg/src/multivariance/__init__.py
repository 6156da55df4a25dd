"""Distance multivariance: dependence measures, independence tests and
dependence structure detection for several random vectors."""

__version__ = "0.1.0"

from .centering import CenteredMatrix, Dataset, MatrixCache, double_center, distance_matrix, scale_matrix
from .estimators import DependenceStructure, DistanceMultivariance, MultivarianceTest
from .independence import (StatKind, TestOutcome, combined_test, conservative_test, consistent_test,
                           monte_carlo_test, resampling_test, statistic, statistics)
from .measures import (lambda_total, m_multivariance, mcor2, multicorrelation, multivariance,
                       total_m_multivariance, total_mcor_lower_bound, total_multivariance)
from .psi import PsiSpec, parse_psi, psi_eval
from .simulate import generate, parse_scenario, power_study
from .structure import (DetectionOptions, DependencyGraph, detect, detect_clustered, detect_full,
                        from_json, to_dot, to_json)

__all__ = [
    "__version__",
    "CenteredMatrix", "Dataset", "MatrixCache", "double_center", "distance_matrix", "scale_matrix",
    "DependenceStructure", "DistanceMultivariance", "MultivarianceTest",
    "StatKind", "TestOutcome", "combined_test", "conservative_test", "consistent_test",
    "monte_carlo_test", "resampling_test", "statistic", "statistics",
    "lambda_total", "m_multivariance", "mcor2", "multicorrelation", "multivariance",
    "total_m_multivariance", "total_mcor_lower_bound", "total_multivariance",
    "PsiSpec", "parse_psi", "psi_eval",
    "generate", "parse_scenario", "power_study",
    "DetectionOptions", "DependencyGraph", "detect", "detect_clustered", "detect_full",
    "from_json", "to_dot", "to_json",
]

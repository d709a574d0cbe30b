"""Corpus-level covariance diagonals of embedding means and uncertainties."""

from dataclasses import dataclass
from typing import Dict, Mapping

import numpy as np

from .errors import EstimationError
from .plda import class_scatter
from .propagation import UncertainEmbedding

QUANTITIES = ("within", "between", "total", "avg_uncertainty")


@dataclass(frozen=True)
class CovarianceReport:
    within_diag: np.ndarray
    between_diag: np.ndarray
    total_diag: np.ndarray
    avg_uncertainty_diag: np.ndarray
    n_utts: int
    n_speakers: int

    @property
    def dim(self):
        return self.total_diag.size

    def diag(self, name):
        return getattr(self, f"{name}_diag")


@dataclass(frozen=True)
class FiveNumber:
    min: float
    q1: float
    median: float
    q3: float
    max: float

    def as_tuple(self):
        return (self.min, self.q1, self.median, self.q3, self.max)


def estimate_covariances(embeddings: Mapping[str, UncertainEmbedding],
                         labels: Mapping[str, str]) -> CovarianceReport:
    """Within/between/total scatter of embedding means plus mean uncertainty.

    Divisors are N-K (within), K-1 (between) and N-1 (total).  Only diagonals
    are computed.  The result does not depend on utterance order.
    """
    if not embeddings:
        raise EstimationError("no embeddings")
    missing = [i for i in embeddings if i not in labels]
    if missing:
        raise EstimationError(f"no speaker label for {len(missing)} utterance(s), e.g. {missing[0]}")
    # canonical order so the report is independent of input order
    ids = sorted(embeddings)
    X = np.array([embeddings[i].phi for i in ids])
    U = np.array([embeddings[i].sigma_u_diag for i in ids])
    _, within, between, total, k = class_scatter(X, [labels[i] for i in ids])
    return CovarianceReport(
        within_diag=within,
        between_diag=between,
        total_diag=total,
        avg_uncertainty_diag=U.mean(axis=0),
        n_utts=len(ids),
        n_speakers=k,
    )


def five_number(v) -> FiveNumber:
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise EstimationError("empty vector")
    q = np.percentile(v, [0, 25, 50, 75, 100])
    return FiveNumber(*(float(x) for x in q))


def summarize_boxplot(report: CovarianceReport) -> Dict[str, FiveNumber]:
    """Min, quartiles (linear interpolation) and max of each diagonal."""
    return {name: five_number(report.diag(name)) for name in QUANTITIES}

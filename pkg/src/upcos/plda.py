"""Diagonal two-covariance PLDA and its uncertainty-propagated variant.

Model: ``phi = mu + y + eps`` with speaker variable ``y ~ N(0, B)`` and
residual ``eps ~ N(0, W)``, both diagonal.  A trial is scored by the
log-likelihood ratio of the same-speaker and different-speaker hypotheses.
Dimensions are independent, so the LLR is a sum of 2x2 Gaussian terms.

For UP-PLDA the residual covariance of each side is inflated by that side's
embedding uncertainty: ``W_e = W + Sigma_Ue`` and ``W_t = W + Sigma_Ut``.
"""

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DimensionError, EstimationError, SingularCovarianceError
from .propagation import UncertainEmbedding

W_FLOOR_REL = 1e-6


@dataclass(frozen=True)
class PldaModel:
    mu: np.ndarray
    b_diag: np.ndarray
    w_diag: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(getattr(self, k), dtype=np.float64) for k in ("mu", "b_diag", "w_diag")]
        if any(a.ndim != 1 or a.shape != arrs[0].shape for a in arrs):
            raise DimensionError("PLDA parameters must be vectors of equal length")
        if np.any(arrs[1] < 0):
            raise SingularCovarianceError("between-speaker variances must be >= 0")
        if not np.all(arrs[2] > 0):
            raise SingularCovarianceError("within-speaker variances must be > 0")
        for k, a in zip(("mu", "b_diag", "w_diag"), arrs):
            object.__setattr__(self, k, a)

    @property
    def dim(self):
        return self.mu.size


def class_scatter(X, labels):
    """Within, between and total scatter diagonals of the rows of ``X``.

    Returns:
      (grand_mean, within, between, total, n_classes) with unbiased divisors
      N-K, K-1 and N-1.  A divisor that would be zero is replaced by 1, which
      yields a zero vector since the matching scatter is zero as well.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    n = X.shape[0]
    classes, inv = np.unique(labels, return_inverse=True)
    k = classes.size
    counts = np.bincount(inv, minlength=k).astype(np.float64)
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, inv, X)
    means = sums / counts[:, None]
    grand = X.mean(axis=0)
    within = ((X - means[inv]) ** 2).sum(axis=0) / max(n - k, 1)
    between = ((means - grand) ** 2).sum(axis=0) / max(k - 1, 1)
    total = ((X - grand) ** 2).sum(axis=0) / max(n - 1, 1)
    return grand, within, between, total, k


def plda_fit(embeddings: Mapping[str, UncertainEmbedding], labels: Mapping[str, str]) -> PldaModel:
    """Moment estimate of a diagonal two-covariance PLDA model.

    Args:
      embeddings: Embeddings keyed by utterance id.
      labels: Speaker id for every utterance id.

    Raises:
      EstimationError: fewer than two speakers, no speaker with two or more
        utterances, or all embeddings identical.
    """
    ids = list(embeddings)
    missing = [i for i in ids if i not in labels]
    if missing:
        raise EstimationError(f"no speaker label for {len(missing)} utterance(s), e.g. {missing[0]}")
    X = np.array([embeddings[i].phi for i in ids])
    spk = [labels[i] for i in ids]
    if len(set(spk)) < 2:
        raise EstimationError("PLDA needs at least two speakers")
    if len(set(spk)) == len(spk):
        raise EstimationError("PLDA needs a speaker with two or more utterances")
    grand, within, between, total, _ = class_scatter(X, spk)
    floor = W_FLOOR_REL * total.mean()
    if not floor > 0:
        raise EstimationError("all embeddings are identical")
    return PldaModel(mu=grand, b_diag=between, w_diag=np.maximum(within, floor))


def plda_llr_terms(xe, xt, b, we, wt):
    """Per-dimension LLR for centered observations (broadcasting)."""
    ve = b + we
    vt = b + wt
    det = ve * vt - b * b
    if not (np.all(det > 0) and np.all(ve > 0) and np.all(vt > 0)):
        raise SingularCovarianceError("PLDA covariance is singular")
    # difference of the two quadratic forms, rearranged so b = 0 gives exactly 0
    quad = b * (2.0 * xe * xt - b * (xe * xe / ve + xt * xt / vt)) / det
    return 0.5 * (quad - np.log1p(-b * b / (ve * vt)))


def plda_score_rows(phi_e, su_e, phi_t, su_t, model: PldaModel, use_uncertainty=False):
    phi_e = np.asarray(phi_e, dtype=np.float64)
    phi_t = np.asarray(phi_t, dtype=np.float64)
    if phi_e.shape[-1] != model.dim or phi_t.shape[-1] != model.dim:
        raise DimensionError(f"PLDA model has dim {model.dim}")
    we = wt = model.w_diag
    if use_uncertainty:
        we = model.w_diag + np.asarray(su_e, dtype=np.float64)
        wt = model.w_diag + np.asarray(su_t, dtype=np.float64)
    terms = plda_llr_terms(phi_e - model.mu, phi_t - model.mu, model.b_diag, we, wt)
    return terms.sum(axis=-1)


def plda_score(e: UncertainEmbedding, t: UncertainEmbedding, model: PldaModel,
               use_uncertainty=False) -> float:
    """Same-speaker vs different-speaker log-likelihood ratio for one trial."""
    s = plda_score_rows(e.phi[None, :], e.sigma_u_diag[None, :],
                        t.phi[None, :], t.sigma_u_diag[None, :], model, use_uncertainty)
    return float(s[0])


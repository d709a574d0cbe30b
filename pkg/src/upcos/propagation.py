"""Carry a pooled posterior through batch normalization and the first FC layer.

Mean and covariance follow the usual rules for an affine map ``y = A x + c``:
the mean goes to ``A m + c`` and the covariance to ``A S A^T``.  Inference-mode
batch normalization is a per-dimension affine map, so it only rescales the
variances.  After the FC layer the off-diagonal terms are dropped.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DimensionError,
    InvalidCovarianceError,
    NumericInputError,
    PropagationOverflowError,
)
from .pooling import PooledPosterior, posterior_covariance


@dataclass(frozen=True)
class BatchNormStats:
    mu: np.ndarray
    var: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    eps: float = 1e-5

    def __post_init__(self):
        arrs = [np.asarray(getattr(self, k), dtype=np.float64) for k in ("mu", "var", "gamma", "beta")]
        d = arrs[0].shape
        if any(a.ndim != 1 or a.shape != d for a in arrs):
            raise DimensionError("batch-norm vectors must be 1-D with equal length")
        if np.any(arrs[1] < 0):
            raise InvalidCovarianceError("batch-norm running variance must be >= 0")
        if not self.eps >= 0 or np.any(arrs[1] + self.eps <= 0):
            raise InvalidCovarianceError("batch-norm var + eps must be > 0")
        for k, a in zip(("mu", "var", "gamma", "beta"), arrs):
            object.__setattr__(self, k, a)

    @classmethod
    def identity(cls, d):
        """BN that leaves its input untouched (eps = 0)."""
        return cls(np.zeros(d), np.ones(d), np.ones(d), np.zeros(d), eps=0.0)

    @property
    def dim(self):
        return self.mu.size


@dataclass(frozen=True)
class AffineLayer:
    """Fully-connected layer ``y = W x + b`` with ``W`` of shape (d_out, d_in)."""

    W: np.ndarray
    b: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] < 1:
            raise DimensionError(f"W must be a (d_out, d_in) matrix, got shape {W.shape}")
        if not np.all(np.isfinite(W)):
            raise NumericInputError("W contains non-finite values")
        b = np.zeros(W.shape[0]) if self.b is None else np.asarray(self.b, dtype=np.float64)
        if b.shape != (W.shape[0],):
            raise DimensionError(f"bias length {b.size} does not match d_out={W.shape[0]}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def d_in(self):
        return self.W.shape[1]

    @property
    def d_out(self):
        return self.W.shape[0]


@dataclass(frozen=True)
class UncertainEmbedding:
    """Embedding mean ``phi`` with the diagonal of its uncertainty covariance."""

    id: str
    phi: np.ndarray
    sigma_u_diag: np.ndarray
    duration_s: Optional[float] = None

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.float64)
        su = np.asarray(self.sigma_u_diag, dtype=np.float64)
        if phi.ndim != 1 or su.shape != phi.shape:
            raise DimensionError(
                f"{self.id}: phi and sigma_u_diag must be vectors of equal length"
            )
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(su))):
            raise NumericInputError(f"{self.id}: non-finite values in embedding")
        if np.any(su < 0):
            raise InvalidCovarianceError(f"{self.id}: negative uncertainty variance")
        if self.duration_s is not None and not self.duration_s >= 0:
            raise NumericInputError(f"{self.id}: duration must be >= 0")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "sigma_u_diag", su)

    @property
    def dim(self):
        return self.phi.size


def batchnorm_apply(mean, cov_diag, bn: BatchNormStats):
    """Batch-normalize a Gaussian with diagonal covariance.

    Returns:
      (mean', cov_diag') where ``mean' = gamma (mean - mu) / sqrt(var + eps) + beta``
      and ``cov' = gamma^2 / (var + eps) * cov``.
    """
    mean = np.asarray(mean, dtype=np.float64)
    cov_diag = np.asarray(cov_diag, dtype=np.float64)
    if mean.shape != (bn.dim,) or cov_diag.shape != (bn.dim,):
        raise DimensionError(
            f"expected vectors of length {bn.dim}, got {mean.shape} and {cov_diag.shape}"
        )
    if np.any(cov_diag < 0):
        raise InvalidCovarianceError("input covariance has negative entries")
    scale = bn.gamma / np.sqrt(bn.var + bn.eps)
    return scale * (mean - bn.mu) + bn.beta, scale * scale * cov_diag


def affine_diag(layer: AffineLayer, mean, cov_diag):
    """Mean and retained covariance diagonal after the FC layer.

    The j-th output variance is ``sum_i W[j, i]^2 cov[i]``; the full
    ``W diag(cov) W^T`` is never formed.
    """
    if mean.shape != (layer.d_in,):
        raise DimensionError(f"layer expects input dim {layer.d_in}, got {mean.shape[0]}")
    W = layer.W
    phi = (W * mean).sum(axis=1) + layer.b
    sigma = (W * W * cov_diag).sum(axis=1)
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(sigma))):
        raise PropagationOverflowError("non-finite values after propagation")
    return phi, sigma


def propagate(p: PooledPosterior, bn: BatchNormStats, layer: AffineLayer,
              id: str = "", duration_s: Optional[float] = None) -> UncertainEmbedding:
    """Map a pooled posterior to an uncertain speaker embedding."""
    if bn.dim != p.dim:
        raise DimensionError(f"batch norm has dim {bn.dim}, posterior has {p.dim}")
    mean_bn, cov_bn = batchnorm_apply(p.mean, posterior_covariance(p), bn)
    phi, sigma = affine_diag(layer, mean_bn, cov_bn)
    return UncertainEmbedding(id=id, phi=phi, sigma_u_diag=sigma, duration_s=duration_s)

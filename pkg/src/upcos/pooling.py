"""Gaussian posterior-inference pooling of frame-level features.

Each frame contributes an observation ``z_t`` with diagonal precision ``L_t``
of a latent utterance-level vector that has a Gaussian prior.  The pooled
posterior is again Gaussian with

    L_s   = sum_t L_t + L_p
    phi_s = L_s^{-1} (sum_t L_t z_t + L_p z_p)

Only diagonal precisions are represented.
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, NumericInputError, SingularCovarianceError


def _as_vector(x, name):
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NumericInputError(f"{name} contains non-finite values")
    return v


@dataclass(frozen=True)
class FramePosterior:
    """Frame feature ``z`` and the diagonal of its precision."""

    z: np.ndarray
    L_diag: np.ndarray

    def __post_init__(self):
        z = _as_vector(self.z, "z")
        L = _as_vector(self.L_diag, "L_diag")
        if z.shape != L.shape:
            raise DimensionError(f"z has length {z.size} but L_diag has length {L.size}")
        if np.any(L < 0):
            raise SingularCovarianceError("frame precision must be >= 0")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "L_diag", L)


@dataclass(frozen=True)
class GaussianPrior:
    mean: np.ndarray
    prec_diag: np.ndarray

    def __post_init__(self):
        m = _as_vector(self.mean, "prior mean")
        p = _as_vector(self.prec_diag, "prior precision")
        if m.shape != p.shape:
            raise DimensionError(f"prior mean has length {m.size} but precision has length {p.size}")
        if np.any(p <= 0):
            raise SingularCovarianceError("prior precision must be > 0 (improper prior)")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "prec_diag", p)

    @property
    def dim(self):
        return self.mean.size


@dataclass(frozen=True)
class PooledPosterior:
    mean: np.ndarray
    prec_diag: np.ndarray

    @property
    def dim(self):
        return self.mean.size


def _exact_colsum(terms):
    """Correctly rounded column sums of a (T, d) array.

    The result does not depend on row order, and adding a nonnegative row
    never decreases a sum of nonnegative terms.
    """
    return np.array([math.fsum(col) for col in terms.T.tolist()])


def _sorted_colsum(terms):
    """Pairwise column sums after sorting each column; order independent."""
    return np.ascontiguousarray(np.sort(terms, axis=0).T).sum(axis=1)


def pool_arrays(z, prec, prior: GaussianPrior) -> PooledPosterior:
    """Pool frames given as arrays.

    Args:
      z: (T, d) frame features.  T may be 0.
      prec: (T, d) frame precision diagonals, or a (d,) vector shared by all
        frames.
      prior: Gaussian prior over the latent vector.

    Returns:
      PooledPosterior with mean and precision diagonal.
    """
    z = np.asarray(z, dtype=np.float64)
    prec = np.asarray(prec, dtype=np.float64)
    d = prior.dim
    if z.ndim != 2 or z.shape[1] != d:
        raise DimensionError(f"expected frames of shape (T, {d}), got {z.shape}")
    shared = prec.ndim == 1
    if prec.shape != (z.shape if not shared else (d,)):
        raise DimensionError(f"precision shape {prec.shape} does not match frames {z.shape}")
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(prec))):
        raise NumericInputError("frames contain non-finite values")
    if np.any(prec < 0):
        raise SingularCovarianceError("frame precision must be >= 0")
    n = z.shape[0]
    if n == 0:
        return PooledPosterior(mean=prior.mean.copy(), prec_diag=prior.prec_diag.copy())

    if shared:
        prec_s = n * prec + prior.prec_diag
        weighted = prec * _sorted_colsum(z) + prior.prec_diag * prior.mean
    else:
        prec_s = _exact_colsum(prec) + prior.prec_diag
        weighted = _exact_colsum(prec * z) + prior.prec_diag * prior.mean
    return PooledPosterior(mean=weighted / prec_s, prec_diag=prec_s)


def posterior_pool(frames: Sequence[FramePosterior], prior: GaussianPrior) -> PooledPosterior:
    """Fuse frame posteriors with the prior into one utterance posterior.

    With no frames the prior itself is returned.
    """
    d = prior.dim
    for i, f in enumerate(frames):
        if f.z.size != d:
            raise DimensionError(f"frame {i} has dimension {f.z.size}, prior has {d}")
    if len(frames) == 0:
        return PooledPosterior(mean=prior.mean.copy(), prec_diag=prior.prec_diag.copy())
    z = np.stack([f.z for f in frames])
    prec = np.stack([f.L_diag for f in frames])
    return pool_arrays(z, prec, prior)


def posterior_covariance(p: PooledPosterior) -> np.ndarray:
    """Diagonal of the posterior covariance, i.e. ``1 / prec_diag``."""
    prec = np.asarray(p.prec_diag, dtype=np.float64)
    if not np.all(prec > 0):
        raise SingularCovarianceError("posterior precision has entries <= 0")
    return 1.0 / prec

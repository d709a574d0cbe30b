"""Cosine and uncertainty-propagated cosine (UP-Cos) scoring.

UP-Cos keeps the cosine numerator but measures each embedding's length with
a Mahalanobis norm whose covariance carries the embedding uncertainty:

    s_up = <phi_e, phi_t> / (||phi_e||_{Sigma_e} ||phi_t||_{Sigma_t})
         = alpha_e * alpha_t * cos(phi_e, phi_t)

with ``alpha = ||phi|| / ||phi||_Sigma``.  The four variants differ only in how
``Sigma_e`` and ``Sigma_t`` are built (see :func:`build_sigma`).  Every
covariance here is a diagonal stored as a vector.

Batch routines work on (n, d) arrays, one trial per row.  Row reductions are
independent of how trials are chunked, so results do not depend on the
number of worker threads.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateEmbeddingError,
    DimensionError,
    MissingEmbeddingError,
    SingularCovarianceError,
)
from .propagation import UncertainEmbedding

THREADS_ENV = "UPCOS_THREADS"
CHUNK_SIZE = 4096


class ScoreVariant(str, Enum):
    """Scoring back-ends.  ``up1``..``up4`` are the four UP-Cos constructions."""

    COS = "cos"
    UP1 = "up1"
    UP2 = "up2"
    UP3 = "up3"
    UP4 = "up4"
    PLDA = "plda"
    UP_PLDA = "up-plda"

    @property
    def needs_total(self):
        return self in (ScoreVariant.UP2, ScoreVariant.UP4)

    @property
    def is_plda(self):
        return self in (ScoreVariant.PLDA, ScoreVariant.UP_PLDA)

    @property
    def is_up_cos(self):
        return self in (ScoreVariant.UP1, ScoreVariant.UP2, ScoreVariant.UP3, ScoreVariant.UP4)


UP_COS_VARIANTS = (ScoreVariant.UP1, ScoreVariant.UP2, ScoreVariant.UP3, ScoreVariant.UP4)


class SigmaPair(NamedTuple):
    sigma_e_diag: np.ndarray
    sigma_t_diag: np.ndarray


@dataclass(frozen=True)
class Trial:
    enrol: str
    test: str
    label: Optional[bool] = None  # True = target, False = nontarget, None = unknown


@dataclass(frozen=True)
class TrialScore:
    enrol_id: str
    test_id: str
    score: float
    alpha_e: Optional[float] = None
    alpha_t: Optional[float] = None
    label: Optional[bool] = None


def _vec(x):
    return np.asarray(x, dtype=np.float64)


def _rowsum(a):
    return a.sum(axis=-1)


def _joint_norm(sq_e, sq_t):
    # sqrt(a * b) keeps cos(x, x) == 1.0 exactly; fall back on overflow
    prod = sq_e * sq_t
    with np.errstate(over="ignore"):
        return np.where(np.isfinite(prod), np.sqrt(prod), np.sqrt(sq_e) * np.sqrt(sq_t))


def _check_pair(a, b):
    if a.shape != b.shape or a.shape[-1] == 0:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")


def _check_nonzero(sq, what="embedding"):
    if np.any(sq == 0):
        raise DegenerateEmbeddingError(f"zero-norm {what}")


def cosine(phi_e, phi_t) -> float:
    """Cosine similarity, clamped to [-1, 1]."""
    phi_e, phi_t = _vec(phi_e), _vec(phi_t)
    _check_pair(phi_e, phi_t)
    return float(cosine_rows(phi_e[None, :], phi_t[None, :])[0])


def cosine_rows(phi_e, phi_t):
    sq_e = _rowsum(phi_e * phi_e)
    sq_t = _rowsum(phi_t * phi_t)
    _check_nonzero(sq_e)
    _check_nonzero(sq_t)
    s = _rowsum(phi_e * phi_t) / _joint_norm(sq_e, sq_t)
    return np.clip(s, -1.0, 1.0)


def _check_sigma(sigma):
    if not np.all(sigma > 0):
        raise SingularCovarianceError("covariance diagonal has entries <= 0")


def mahalanobis_length(phi, sigma_diag) -> float:
    """Mahalanobis distance from the origin to ``phi`` under ``diag(sigma_diag)``."""
    phi, sigma = _vec(phi), _vec(sigma_diag)
    _check_pair(phi, sigma)
    _check_sigma(sigma)
    return float(np.sqrt(_rowsum(phi * phi / sigma)))


def alpha(phi, sigma_diag) -> float:
    """Ratio of the Euclidean to the Mahalanobis length of ``phi``."""
    phi, sigma = _vec(phi), _vec(sigma_diag)
    _check_pair(phi, sigma)
    _check_sigma(sigma)
    return float(_alpha_rows(phi[None, :], sigma[None, :])[0])


def _alpha_rows(phi, sigma):
    sq = _rowsum(phi * phi)
    _check_nonzero(sq)
    return np.sqrt(sq / _rowsum(phi * phi / sigma))


def build_sigma(variant, su_e_diag, su_t_diag, sigma_tot_diag=None, d=None) -> SigmaPair:
    """Enrol/test covariance diagonals for one UP-Cos variant.

    ====  ==========================  ==========================
    var   enrol                       test
    ====  ==========================  ==========================
    up1   Sue/d + 1                   Sut/d + 1
    up2   (Sue + Stot)/d              (Sut + Stot)/d
    up3   (Sue + Sut)/d + 1           same as enrol
    up4   (Sue + Sut + Stot)/d        same as enrol
    ====  ==========================  ==========================

    Inputs may be single vectors or (n, d) stacks of rows.
    """
    variant = ScoreVariant(variant)
    if not variant.is_up_cos:
        raise ConfigurationError(f"build_sigma is defined for up1..up4, not {variant.value}")
    su_e, su_t = _vec(su_e_diag), _vec(su_t_diag)
    _check_pair(su_e, su_t)
    dim = su_e.shape[-1]
    if d is not None and d != dim:
        raise DimensionError(f"d={d} does not match vector length {dim}")
    tot = None
    if variant.needs_total:
        if sigma_tot_diag is None:
            raise ConfigurationError(f"variant {variant.value} requires a total covariance")
        tot = _vec(sigma_tot_diag)
        if tot.shape[-1] != dim:
            raise DimensionError(f"total covariance has length {tot.shape[-1]}, expected {dim}")

    if variant is ScoreVariant.UP1:
        se, st = su_e / dim + 1.0, su_t / dim + 1.0
    elif variant is ScoreVariant.UP2:
        se, st = (su_e + tot) / dim, (su_t + tot) / dim
    elif variant is ScoreVariant.UP3:
        se = st = (su_e + su_t) / dim + 1.0
    else:
        se = st = (su_e + su_t + tot) / dim
    _check_sigma(se)
    _check_sigma(st)
    return SigmaPair(se, st)


def up_cos_rows(phi_e, su_e, phi_t, su_t, variant, sigma_tot_diag=None):
    """Score trials row by row.

    Returns:
      (scores, alpha_e, alpha_t) arrays of length n.  For ``cos`` the alphas
      are all 1.
    """
    variant = ScoreVariant(variant)
    phi_e, phi_t = _vec(phi_e), _vec(phi_t)
    _check_pair(phi_e, phi_t)
    if variant is ScoreVariant.COS:
        s = cosine_rows(phi_e, phi_t)
        ones = np.ones_like(s)
        return s, ones, ones.copy()
    if variant.is_plda:
        raise ConfigurationError("PLDA variants are scored by upcos.plda")

    se, st = build_sigma(variant, su_e, su_t, sigma_tot_diag)
    sq_e = _rowsum(phi_e * phi_e)
    sq_t = _rowsum(phi_t * phi_t)
    _check_nonzero(sq_e)
    _check_nonzero(sq_t)
    ml_e = _rowsum(phi_e * phi_e / se)
    ml_t = _rowsum(phi_t * phi_t / st)
    s = _rowsum(phi_e * phi_t) / _joint_norm(ml_e, ml_t)
    return s, np.sqrt(sq_e / ml_e), np.sqrt(sq_t / ml_t)


def up_cos_score(e: UncertainEmbedding, t: UncertainEmbedding, variant,
                 sigma_tot_diag=None) -> TrialScore:
    """Score one trial.  Unlike ``cos``, UP-Cos scores are never clamped."""
    if e.dim != t.dim:
        raise DimensionError(f"{e.id} has dim {e.dim} but {t.id} has dim {t.dim}")
    s, a_e, a_t = up_cos_rows(e.phi[None, :], e.sigma_u_diag[None, :],
                              t.phi[None, :], t.sigma_u_diag[None, :],
                              variant, sigma_tot_diag)
    return TrialScore(e.id, t.id, float(s[0]), float(a_e[0]), float(a_t[0]))


def resolve_workers(workers=None):
    if workers is None:
        workers = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, int(workers))


class EmbeddingTable:
    """Row-stacked embeddings with an id index, built once per scoring run."""

    def __init__(self, embeddings: Mapping[str, UncertainEmbedding]):
        self.index = {k: i for i, k in enumerate(embeddings)}
        items = list(embeddings.values())
        dims = {e.dim for e in items}
        if len(dims) > 1:
            raise DimensionError(f"embeddings have mixed dimensions {sorted(dims)}")
        d = dims.pop() if dims else 0
        self.phi = np.array([e.phi for e in items]).reshape(len(items), d)
        self.sigma = np.array([e.sigma_u_diag for e in items]).reshape(len(items), d)

    @property
    def dim(self):
        return self.phi.shape[1]

    def rows(self, ids):
        return np.fromiter((self.index[i] for i in ids), dtype=np.intp, count=len(ids))


def score_trials(trials: Sequence[Trial], embeddings: Mapping[str, UncertainEmbedding],
                 variant, sigma_tot_diag=None, plda_model=None, workers=None,
                 test_embeddings: Optional[Mapping[str, UncertainEmbedding]] = None):
    """Score a trial list, preserving input order.

    Args:
      trials: Trials to score.
      embeddings: Enrolment embeddings keyed by id (also used for the test side
        unless ``test_embeddings`` is given).
      variant: A :class:`ScoreVariant` or its string value.
      sigma_tot_diag: Total covariance diagonal (required for up2/up4).
      plda_model: Fitted :class:`upcos.plda.PldaModel` for plda/up-plda.
      workers: Thread count; defaults to ``$UPCOS_THREADS`` or 1.

    Returns:
      List of :class:`TrialScore` in the order of ``trials``.

    Raises:
      MissingEmbeddingError: listing every id that could not be resolved.
    """
    variant = ScoreVariant(variant)
    if variant.needs_total and sigma_tot_diag is None:
        raise ConfigurationError(f"variant {variant.value} requires a total covariance")
    if variant.is_plda and plda_model is None:
        raise ConfigurationError(f"variant {variant.value} requires a fitted PLDA model")
    if not trials:
        return []

    enrol_tab = EmbeddingTable(embeddings)
    test_tab = enrol_tab if test_embeddings is None else EmbeddingTable(test_embeddings)
    missing = {}
    for t in trials:
        if t.enrol not in enrol_tab.index:
            missing[t.enrol] = None
        if t.test not in test_tab.index:
            missing[t.test] = None
    if missing:
        raise MissingEmbeddingError(list(missing))
    ie = enrol_tab.rows([t.enrol for t in trials])
    it = test_tab.rows([t.test for t in trials])
    if enrol_tab.dim != test_tab.dim:
        raise DimensionError(f"enrol dim {enrol_tab.dim} != test dim {test_tab.dim}")

    def run(lo):
        e, t = ie[lo:lo + CHUNK_SIZE], it[lo:lo + CHUNK_SIZE]
        pe, se = enrol_tab.phi[e], enrol_tab.sigma[e]
        pt, st = test_tab.phi[t], test_tab.sigma[t]
        if variant.is_plda:
            from .plda import plda_score_rows
            s = plda_score_rows(pe, se, pt, st, plda_model,
                                use_uncertainty=variant is ScoreVariant.UP_PLDA)
            return s, None, None
        return up_cos_rows(pe, se, pt, st, variant, sigma_tot_diag)

    starts = range(0, len(trials), CHUNK_SIZE)
    n_workers = resolve_workers(workers)
    if n_workers == 1 or len(starts) == 1:
        parts = [run(lo) for lo in starts]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(run, starts))

    scores = np.concatenate([p[0] for p in parts])
    if variant.is_plda:
        a_e = a_t = [None] * len(trials)
    else:
        a_e = np.concatenate([p[1] for p in parts]).tolist()
        a_t = np.concatenate([p[2] for p in parts]).tolist()
    return [TrialScore(tr.enrol, tr.test, s, ae, at, tr.label)
            for tr, s, ae, at in zip(trials, scores.tolist(), a_e, a_t)]

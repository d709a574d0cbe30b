"""Uncertainty-aware cosine scoring back-end for speaker verification."""

from .errors import *  # noqa: F401,F403
from .metrics import DetMetrics, compute_eer, compute_min_dcf, evaluate, pearson
from .plda import PldaModel, plda_fit, plda_score
from .pooling import FramePosterior, GaussianPrior, PooledPosterior, posterior_covariance, posterior_pool
from .propagation import AffineLayer, BatchNormStats, UncertainEmbedding, batchnorm_apply, propagate
from .scoring import (
    ScoreVariant,
    Trial,
    TrialScore,
    alpha,
    build_sigma,
    cosine,
    mahalanobis_length,
    score_trials,
    up_cos_score,
)
from .stats import CovarianceReport, estimate_covariances, summarize_boxplot
from .synth import SynthConfig, generate_corpus, generate_trials

__version__ = "0.1.0"

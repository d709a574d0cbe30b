"""Detection metrics for verification scores.

Conventions, for a threshold ``theta``:

  * false acceptance rate  FAR(theta) = #{nontarget >= theta} / N_non
  * false rejection rate   FRR(theta) = #{target   <  theta} / N_tar

FAR and FRR only change at observed score values, so the sweep evaluates the
sorted unique scores plus ``+inf`` (reject everything).  The EER is where the
segment joining two consecutive sweep points crosses FAR = FRR.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import MetricError, UndefinedCorrelationError

DEFAULT_P_TARGET = 0.01
DEFAULT_C_MISS = 1.0
DEFAULT_C_FA = 1.0


@dataclass(frozen=True)
class DetMetrics:
    eer: float
    min_dcf: float
    threshold_eer: float
    threshold_dcf: float
    n_target: int
    n_nontarget: int
    dcf_params: Tuple[float, float, float]


@dataclass(frozen=True)
class Sweep:
    thresholds: np.ndarray
    far: np.ndarray
    frr: np.ndarray


def _scores(x, name):
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise MetricError(f"no {name} scores")
    if not np.all(np.isfinite(x)):
        raise MetricError(f"non-finite {name} scores")
    return x


def error_sweep(scores_target, scores_nontarget) -> Sweep:
    """FAR/FRR at every distinct score and at +inf, thresholds ascending."""
    tar = np.sort(_scores(scores_target, "target"))
    non = np.sort(_scores(scores_nontarget, "nontarget"))
    thr = np.append(np.unique(np.concatenate([tar, non])), np.inf)
    frr = np.searchsorted(tar, thr, side="left") / tar.size
    far = (non.size - np.searchsorted(non, thr, side="left")) / non.size
    return Sweep(thr, far, frr)


def eer_from_rates(far, frr):
    """Crossing of FAR and FRR along a sweep ordered by increasing threshold.

    Returns:
      (eer, index) where ``index`` is the first sweep point with FAR <= FRR.
    """
    diff = far - frr
    idx = int(np.argmax(diff <= 0))
    if diff[idx] == 0 or idx == 0:
        return float(far[idx]), idx
    d0, d1 = diff[idx - 1], diff[idx]
    w = d0 / (d0 - d1)
    return float(far[idx - 1] + w * (far[idx] - far[idx - 1])), idx


def compute_eer(scores_target, scores_nontarget):
    """Equal error rate, linearly interpolated on the ROC.

    Returns:
      (eer, threshold) where ``threshold`` is the smallest swept threshold at
      which FAR no longer exceeds FRR.
    """
    sw = error_sweep(scores_target, scores_nontarget)
    eer, idx = eer_from_rates(sw.far, sw.frr)
    return eer, float(sw.thresholds[idx])


def dcf_curve(far, frr, p_target, c_miss, c_fa):
    _check_dcf(p_target, c_miss, c_fa)
    c_def = min(c_miss * p_target, c_fa * (1.0 - p_target))
    return (c_miss * p_target * frr + c_fa * (1.0 - p_target) * far) / c_def


def _check_dcf(p_target, c_miss, c_fa):
    if not 0.0 < p_target < 1.0:
        raise MetricError(f"p_target must be in (0, 1), got {p_target}")
    if not (c_miss > 0 and c_fa > 0):
        raise MetricError("detection costs must be > 0")


def compute_min_dcf(scores_target, scores_nontarget, p_target=DEFAULT_P_TARGET,
                    c_miss=DEFAULT_C_MISS, c_fa=DEFAULT_C_FA):
    """Minimum normalized detection cost over all thresholds.

    Returns:
      (min_dcf, threshold)
    """
    _check_dcf(p_target, c_miss, c_fa)
    sw = error_sweep(scores_target, scores_nontarget)
    dcf = dcf_curve(sw.far, sw.frr, p_target, c_miss, c_fa)
    i = int(np.argmin(dcf))
    return float(dcf[i]), float(sw.thresholds[i])


def evaluate(scores_target, scores_nontarget, p_target=DEFAULT_P_TARGET,
             c_miss=DEFAULT_C_MISS, c_fa=DEFAULT_C_FA) -> DetMetrics:
    _check_dcf(p_target, c_miss, c_fa)
    sw = error_sweep(scores_target, scores_nontarget)
    eer, i_eer = eer_from_rates(sw.far, sw.frr)
    dcf = dcf_curve(sw.far, sw.frr, p_target, c_miss, c_fa)
    i_dcf = int(np.argmin(dcf))
    return DetMetrics(
        eer=eer,
        min_dcf=float(dcf[i_dcf]),
        threshold_eer=float(sw.thresholds[i_eer]),
        threshold_dcf=float(sw.thresholds[i_dcf]),
        n_target=len(np.ravel(scores_target)),
        n_nontarget=len(np.ravel(scores_nontarget)),
        dcf_params=(p_target, c_miss, c_fa),
    )


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise MetricError("pearson needs two equal-length 1-D sequences")
    if x.size < 2:
        raise UndefinedCorrelationError("pearson needs at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("zero variance; correlation undefined")
    r = float(np.dot(dx, dy)) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


def avg_uncertainty_scalar(e) -> float:
    """Mean of the uncertainty diagonal of one embedding."""
    return float(np.mean(e.sigma_u_diag))


def histogram(values, bins=50, value_range=None):
    """Counts and bin edges, e.g. for alpha_e * alpha_t products."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise MetricError("no values to histogram")
    return np.histogram(values, bins=bins, range=value_range)

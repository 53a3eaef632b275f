"""Penalty-weighted classification loss over depth-hypothesis distributions.

The per-pixel depth error is the negative log probability of the
hypothesis bin nearest to the ground-truth depth (one-hot target, ties
toward the lower bin).  Stage loss is the mean over supervised pixels of
penalty times error; the total is the weighted sum of the three stages.
"""

from dataclasses import dataclass

import numpy as np

from .penalty import PenaltyMap
from .reproject import DepthMap

__all__ = [
    "ProbabilityVolume",
    "StageWeights",
    "PROB_FLOOR",
    "cross_entropy_error",
    "stage_loss",
    "total_loss",
]

# Probabilities are floored here before the log so zero-probability bins
# yield a large finite loss instead of infinity.
PROB_FLOOR = 1e-12

_NORM_TOL = 1e-5


@dataclass
class ProbabilityVolume:
    """Per-pixel distribution over depth hypotheses.

    probs has shape (D, H, W); hypotheses is either a shared (D,) vector
    or a per-pixel (D, H, W) grid, strictly increasing along axis 0.
    """

    probs: np.ndarray
    hypotheses: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        hyp = np.asarray(self.hypotheses, dtype=np.float64)
        if probs.ndim != 3:
            raise ValueError(f"probs must be (D, H, W), got shape {probs.shape}")
        if hyp.ndim == 1:
            if hyp.shape[0] != probs.shape[0]:
                raise ValueError("hypothesis count does not match probs")
        elif hyp.shape != probs.shape:
            raise ValueError("per-pixel hypotheses must match probs shape")
        if np.any(probs < 0):
            raise ValueError("probabilities must be non-negative")
        if np.any(np.diff(hyp, axis=0) <= 0):
            raise ValueError("hypotheses must be strictly increasing")
        self.probs = probs
        self.hypotheses = hyp

    @property
    def num_hypotheses(self) -> int:
        return self.probs.shape[0]


@dataclass(frozen=True)
class StageWeights:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("stage weights must be non-negative")


def cross_entropy_error(vol: ProbabilityVolume, gt: DepthMap) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel depth error and the supervised-pixel mask.

    A pixel is supervised when the ground truth is valid and lies inside
    the hypothesis range; elsewhere the error is 0 and masked out.
    Raises if the distribution at any supervised pixel is not normalized.
    """
    probs = vol.probs
    hyp = vol.hypotheses
    if probs.shape[1:] != gt.shape:
        raise ValueError("probability volume does not match ground truth shape")
    if hyp.ndim == 1:
        hyp = hyp[:, None, None]
    lo = hyp[0] * np.ones(gt.shape)
    hi = hyp[-1] * np.ones(gt.shape)
    supervised = gt.valid & (gt.values >= lo) & (gt.values <= hi)
    sums = probs.sum(axis=0)
    if np.any(np.abs(sums[supervised] - 1.0) > _NORM_TOL):
        worst = float(np.abs(sums[supervised] - 1.0).max())
        raise ValueError(f"probability volume not normalized (max |sum - 1| = {worst:.3e})")
    bins = np.argmin(np.abs(hyp - gt.values[None, :, :]), axis=0)
    picked = np.take_along_axis(probs, bins[None, :, :], axis=0)[0]
    err = -np.log(np.maximum(picked, PROB_FLOOR))
    return np.where(supervised, err, 0.0), supervised


def stage_loss(penalty, error: np.ndarray, valid: np.ndarray) -> float:
    """Mean over valid pixels of penalty times per-pixel error."""
    weights = penalty.values if isinstance(penalty, PenaltyMap) else np.asarray(penalty, dtype=np.float64)
    error = np.asarray(error, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    if weights.shape != error.shape or valid.shape != error.shape:
        raise ValueError("penalty, error and mask shapes must match")
    if not valid.any():
        raise ValueError("no supervised pixels")
    return float(np.mean(weights[valid] * error[valid]))


def total_loss(stage_losses, w: StageWeights = StageWeights()) -> float:
    """Weighted sum of the three stage losses."""
    losses = [float(x) for x in stage_losses]
    if len(losses) != 3:
        raise ValueError("expected exactly three stage losses")
    if not all(np.isfinite(losses)):
        raise ValueError("stage losses must be finite")
    return w.alpha * losses[0] + w.beta * losses[1] + w.gamma * losses[2]

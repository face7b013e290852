"""Interval quality metrics: coverage, width, Winkler score, pinball loss."""

from typing import NamedTuple

import numpy as np

from .validation import check_alpha


class WidthSummary(NamedTuple):
    """Mean width over finite cells plus the count of infinite cells."""

    width: float
    infinite_count: int


def coverage(intervals, truth):
    """Fraction of cells whose truth lies inside [lower, upper]."""
    truth = _match(intervals, truth)
    hit = (intervals.lower <= truth) & (truth <= intervals.upper)
    return float(hit.mean())


def pi_width(intervals):
    """Mean interval width over finite cells; infinite cells counted apart.

    With no finite cells at all the width is reported as 0.
    """
    widths = intervals.upper - intervals.lower
    finite = np.isfinite(widths)
    infinite_count = int((~finite).sum())
    width = float(widths[finite].mean()) if finite.any() else 0.0
    return WidthSummary(width=width, infinite_count=infinite_count)


def winkler(intervals, truth, alpha=None):
    """Mean Winkler interval score.

    Width plus a 2/alpha-scaled penalty for each side the truth escapes;
    infinite widths propagate into the mean.
    """
    alpha = check_alpha(intervals.alpha if alpha is None else alpha)
    truth = _match(intervals, truth)
    lower, upper = intervals.lower, intervals.upper
    score = upper - lower
    below = truth < lower
    above = truth > upper
    score = score + (2.0 / alpha) * np.where(below, lower - truth, 0.0)
    score = score + (2.0 / alpha) * np.where(above, truth - upper, 0.0)
    return float(score.mean())


def pinball_loss(y, q, level):
    """Quantile (pinball) loss max{level*(y-q), (level-1)*(y-q)}."""
    diff = y - q
    return float(np.maximum(level * diff, (level - 1.0) * diff))


def _match(intervals, truth):
    truth = np.asarray(truth, dtype=float)
    if truth.ndim == 2:
        truth = truth[:, :, None]
    if truth.shape != intervals.lower.shape:
        raise ValueError(
            f"truth shape {truth.shape} does not match intervals {intervals.lower.shape}"
        )
    return truth

"""Conformal interval construction from residual streams.

All calibrators share the same conventions:

* residual streams are (T, n) matrices of truth minus prediction;
* quantiles follow the conservative rank rule: the ceil((M+1) * level)-th
  order statistic, +inf when that rank exceeds the sample size (infinite
  offsets are propagated, never clamped);
* two-sided intervals apply the rank rule symmetrically per tail, per node;
* online methods see test residuals as they are revealed (oracle online
  mode), never beyond the step being predicted.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .validation import as_matrix, as_vector, check_alpha
from .wavelets import split_series

METHODS = ("SCP", "SeqCP", "NexCP", "SpectralSCP", "SCALE")

# Guards against float fuzz when (M+1) * level lands exactly on an integer.
_RANK_EPS = 1e-9


@dataclass(frozen=True)
class ResidualSeries:
    """Per-node residuals over time (truth minus prediction)."""

    values: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        values = as_matrix(self.values, "values", min_rows=1)
        if not np.all(np.isfinite(values)):
            raise ValueError("residual values must be finite")
        timestamps = np.asarray(self.timestamps)
        if timestamps.shape[0] != values.shape[0]:
            raise ValueError("timestamps must match the number of rows")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "timestamps", timestamps)

    @property
    def n_nodes(self):
        return self.values.shape[1]

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class IntervalSeries:
    """Per-cell prediction intervals at miscoverage level alpha.

    Bounds may be infinite (propagated from overflowing quantile ranks)
    but never NaN, and lower <= upper holds everywhere.
    """

    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    horizon: int = 1

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 3:
            raise ValueError(
                f"lower/upper must share a (T, n, K) shape, got {lower.shape} and {upper.shape}"
            )
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise ValueError("interval bounds must not be NaN")
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        object.__setattr__(self, "horizon", int(lower.shape[2]))


@dataclass
class CalibrationConfig:
    """One interval method plus its hyperparameters."""

    alpha: float
    method: str
    window: int = 100
    rho: float = 0.99
    cutoff: int | None = None
    conformalize: bool = False

    def __post_init__(self):
        self.alpha = check_alpha(self.alpha)
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        self.window = int(self.window)
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        self.rho = float(self.rho)
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")


def empirical_quantile(scores, level):
    """Conservative empirical quantile via the (M+1) rank rule.

    Returns the order statistic at rank ceil((M+1) * level) of the
    ascending-sorted scores, or +inf when that rank exceeds M.
    """
    scores = as_vector(scores, "scores", min_len=1)
    level = float(level)
    m = scores.shape[0]
    rank = int(np.ceil((m + 1) * level - _RANK_EPS))
    if rank > m:
        return float("inf")
    if rank < 1:
        rank = 1
    return float(np.sort(scores)[rank - 1])


def weighted_quantile(scores, weights, level):
    """Weighted conservative quantile with the test point's mass at +inf.

    Returns the smallest score v with

        sum of weights of scores <= v
        ------------------------------  >= level,
        sum of all weights + w_test

    or +inf when no score qualifies. ``w_test`` is the weight of the
    newest observation (the last entry of ``weights``); under uniform
    weights this reduces exactly to ``empirical_quantile``.
    """
    scores = as_vector(scores, "scores", min_len=1)
    weights = as_vector(weights, "weights", min_len=1)
    if weights.shape != scores.shape:
        raise ValueError("scores and weights must have matching lengths")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    total = float(weights.sum())
    if total <= 0:
        raise ValueError("weights must not be all zero")
    w_test = float(weights[-1])
    level = float(level)
    order = np.argsort(scores, kind="stable")
    cumulative = np.cumsum(weights[order]) / (total + w_test)
    hit = np.nonzero(cumulative >= level - _RANK_EPS)[0]
    if hit.size == 0:
        return float("inf")
    return float(scores[order[hit[0]]])


def _column_rank_quantile(matrix, level):
    """Per-column empirical_quantile of a (M, n) matrix."""
    m = matrix.shape[0]
    rank = int(np.ceil((m + 1) * level - _RANK_EPS))
    if rank > m:
        return np.full(matrix.shape[1], np.inf)
    if rank < 1:
        rank = 1
    return np.sort(matrix, axis=0)[rank - 1]


def two_sided_offsets(residuals, alpha):
    """Per-node (lower, upper) offsets with the symmetric rank rule.

    The upper offset is the 1 - alpha/2 rank-rule quantile of the
    residuals; the lower offset applies the same rule to the negated
    residuals, so both tails are conservative.
    """
    residuals = as_matrix(residuals, "residuals", min_rows=1)
    level = 1.0 - alpha / 2.0
    upper = _column_rank_quantile(residuals, level)
    lower = -_column_rank_quantile(-residuals, level)
    return lower, upper


def _as_forecast_tensor(point_forecasts):
    forecasts = np.asarray(point_forecasts, dtype=float)
    if forecasts.ndim == 2:
        forecasts = forecasts[:, :, None]
    if forecasts.ndim != 3:
        raise ValueError(f"point forecasts must be (T, n) or (T, n, K), got {forecasts.shape}")
    return forecasts


def scp_intervals(calib, point_forecasts, alpha):
    """Split conformal intervals: fixed per-node offsets from pooled residuals."""
    alpha = check_alpha(alpha)
    forecasts = _as_forecast_tensor(point_forecasts)
    if calib.n_nodes != forecasts.shape[1]:
        raise ValueError("calibration and forecasts disagree on node count")
    lower_off, upper_off = two_sided_offsets(calib.values, alpha)
    lower = forecasts + lower_off[None, :, None]
    upper = forecasts + upper_off[None, :, None]
    return IntervalSeries(lower=lower, upper=upper, alpha=alpha)


def _online_history(stream_values, n_targets, step):
    """Rows of the stream available strictly before test step ``step``."""
    end = stream_values.shape[0] - n_targets + step
    return stream_values[:end]


def seqcp_intervals(stream, point_forecasts, alpha, window=100):
    """Sliding-window conformal intervals, recalibrated at every step.

    The last ``T'`` rows of ``stream`` align with the forecast targets;
    each step uses the most recent ``window`` residuals available strictly
    before it. With too little history the offsets are infinite.
    """
    alpha = check_alpha(alpha)
    window = int(window)
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    forecasts = _as_forecast_tensor(point_forecasts)
    n_targets, n_nodes, _ = forecasts.shape
    values = stream.values
    if values.shape[1] != n_nodes:
        raise ValueError("stream and forecasts disagree on node count")
    if values.shape[0] < n_targets:
        raise ValueError("stream must cover at least the forecast targets")
    lower = np.empty_like(forecasts)
    upper = np.empty_like(forecasts)
    level = 1.0 - alpha / 2.0
    for j in range(n_targets):
        history = _online_history(values, n_targets, j)
        recent = history[-window:]
        if recent.shape[0] == 0:
            lo = np.full(n_nodes, -np.inf)
            hi = np.full(n_nodes, np.inf)
        else:
            hi = _column_rank_quantile(recent, level)
            lo = -_column_rank_quantile(-recent, level)
        lower[j] = forecasts[j] + lo[:, None]
        upper[j] = forecasts[j] + hi[:, None]
    return IntervalSeries(lower=lower, upper=upper, alpha=alpha)


def _weighted_column_quantile(matrix, weights, level):
    """Per-column weighted_quantile of a (M, n) matrix (shared weights)."""
    w_test = float(weights[-1])
    denom = float(weights.sum()) + w_test
    order = np.argsort(matrix, axis=0, kind="stable")
    sorted_scores = np.take_along_axis(matrix, order, axis=0)
    cum = np.cumsum(weights[order], axis=0) / denom
    out = np.full(matrix.shape[1], np.inf)
    for col in range(matrix.shape[1]):
        hit = np.nonzero(cum[:, col] >= level - _RANK_EPS)[0]
        if hit.size:
            out[col] = sorted_scores[hit[0], col]
    return out


def nexcp_intervals(stream, point_forecasts, alpha, rho=0.99):
    """Decay-weighted conformal intervals over all past residuals.

    Residual ages decay as rho**age with the newest observation at age 0;
    the hypothetical test point carries the newest weight.
    """
    alpha = check_alpha(alpha)
    rho = float(rho)
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    forecasts = _as_forecast_tensor(point_forecasts)
    n_targets, n_nodes, _ = forecasts.shape
    values = stream.values
    if values.shape[1] != n_nodes:
        raise ValueError("stream and forecasts disagree on node count")
    if values.shape[0] < n_targets:
        raise ValueError("stream must cover at least the forecast targets")
    lower = np.empty_like(forecasts)
    upper = np.empty_like(forecasts)
    level = 1.0 - alpha / 2.0
    for j in range(n_targets):
        history = _online_history(values, n_targets, j)
        m = history.shape[0]
        if m == 0:
            lo = np.full(n_nodes, -np.inf)
            hi = np.full(n_nodes, np.inf)
        else:
            weights = rho ** np.arange(m - 1, -1, -1, dtype=float)
            hi = _weighted_column_quantile(history, weights, level)
            lo = -_weighted_column_quantile(-history, weights, level)
        lower[j] = forecasts[j] + lo[:, None]
        upper[j] = forecasts[j] + hi[:, None]
    return IntervalSeries(lower=lower, upper=upper, alpha=alpha)


def spectral_scp_intervals(calib, frame, cutoff, point_forecasts, low_forecasts, alpha):
    """Spectral split conformal intervals.

    Calibration residuals are split at ``cutoff``; the per-node scores are
    the absolute high-frequency components, and the interval is a symmetric
    band of the 1 - alpha score quantile around the shifted center
    ``point forecast + predicted low-frequency component``.
    """
    alpha = check_alpha(alpha)
    forecasts = _as_forecast_tensor(point_forecasts)
    lows = np.asarray(low_forecasts, dtype=float)
    if lows.ndim == 2:
        lows = lows[:, :, None]
    if lows.shape != forecasts.shape:
        raise ValueError(
            f"low forecasts must match point forecasts, got {lows.shape} vs {forecasts.shape}"
        )
    _, high = split_series(frame, calib.values, cutoff)
    scores = np.abs(high)
    radius = _column_rank_quantile(scores, 1.0 - alpha)
    center = forecasts + lows
    lower = center - radius[None, :, None]
    upper = center + radius[None, :, None]
    return IntervalSeries(lower=lower, upper=upper, alpha=alpha)


class SplitConformal(BaseEstimator):
    """Split conformal predictor with fixed per-node residual offsets."""

    def __init__(self, alpha=0.1):
        self.alpha = alpha

    def fit(self, residuals, y=None):
        residuals = as_matrix(residuals, "residuals", min_rows=1)
        self.alpha_ = check_alpha(self.alpha)
        self.lower_offset_, self.upper_offset_ = two_sided_offsets(residuals, self.alpha_)
        self.calibration_ = residuals
        return self

    def predict(self, point_forecasts, test_residuals=None):
        forecasts = _as_forecast_tensor(point_forecasts)
        lower = forecasts + self.lower_offset_[None, :, None]
        upper = forecasts + self.upper_offset_[None, :, None]
        return IntervalSeries(lower=lower, upper=upper, alpha=self.alpha_)


class SlidingWindowConformal(BaseEstimator):
    """Conformal predictor recalibrated on a sliding residual window."""

    def __init__(self, alpha=0.1, window=100):
        self.alpha = alpha
        self.window = window

    def fit(self, residuals, y=None):
        self.calibration_ = as_matrix(residuals, "residuals", min_rows=1)
        return self

    def predict(self, point_forecasts, test_residuals=None):
        forecasts = _as_forecast_tensor(point_forecasts)
        stream = _assemble_stream(self.calibration_, test_residuals, forecasts.shape[0])
        return seqcp_intervals(stream, forecasts, self.alpha, window=self.window)


class DecayWeightedConformal(BaseEstimator):
    """Conformal predictor with exponentially decaying residual weights."""

    def __init__(self, alpha=0.1, rho=0.99):
        self.alpha = alpha
        self.rho = rho

    def fit(self, residuals, y=None):
        self.calibration_ = as_matrix(residuals, "residuals", min_rows=1)
        return self

    def predict(self, point_forecasts, test_residuals=None):
        forecasts = _as_forecast_tensor(point_forecasts)
        stream = _assemble_stream(self.calibration_, test_residuals, forecasts.shape[0])
        return nexcp_intervals(stream, forecasts, self.alpha, rho=self.rho)


class SpectralSplitConformal(BaseEstimator):
    """Split conformal on the high-frequency band of decomposed residuals.

    Needs a fitted ``SpectralDecomposer``; predictions shift the point
    forecasts by the persistence forecast of the low-frequency band (the
    decomposed low band of the last revealed residual).
    """

    def __init__(self, decomposer=None, alpha=0.1):
        self.decomposer = decomposer
        self.alpha = alpha

    def fit(self, residuals, y=None):
        residuals = as_matrix(residuals, "residuals", min_rows=1)
        self.alpha_ = check_alpha(self.alpha)
        _, high = self.decomposer.decompose_series(residuals)
        self.radius_ = _column_rank_quantile(np.abs(high), 1.0 - self.alpha_)
        self.calibration_ = residuals
        return self

    def predict(self, point_forecasts, test_residuals=None):
        forecasts = _as_forecast_tensor(point_forecasts)
        n_targets = forecasts.shape[0]
        if test_residuals is None:
            origins = np.repeat(self.calibration_[-1:], n_targets, axis=0)
        else:
            test_residuals = as_matrix(test_residuals, "test_residuals")
            origins = np.vstack([self.calibration_[-1:], test_residuals[: n_targets - 1]])
        low, _ = self.decomposer.decompose_series(origins)
        center = forecasts + low[:, :, None]
        lower = center - self.radius_[None, :, None]
        upper = center + self.radius_[None, :, None]
        return IntervalSeries(lower=lower, upper=upper, alpha=self.alpha_)


def _assemble_stream(calibration, test_residuals, n_targets):
    if test_residuals is None:
        raise ValueError(
            "online conformal predictors need the revealed test residuals; "
            "pass test_residuals aligned with the forecast targets"
        )
    test_residuals = as_matrix(test_residuals, "test_residuals")
    if test_residuals.shape[0] != n_targets:
        raise ValueError("test residuals must align with the forecast targets")
    values = np.vstack([calibration, test_residuals])
    return ResidualSeries(values=values, timestamps=np.arange(values.shape[0]))

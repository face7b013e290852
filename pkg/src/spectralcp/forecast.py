"""Point-forecasting backbones and residual generation.

Deliberately simple forecasters stand in for heavyweight graph models: the
conformal layer downstream only consumes residual streams, so any backbone
that produces structurally similar residuals (shared low-frequency error
plus node-local noise) exercises the same code paths.
"""

from dataclasses import dataclass

import numpy as np

from .conformal import ResidualSeries
from .validation import as_matrix

BACKBONES = ("seasonal_naive", "ridge_ar")
RIDGE_PENALTY = 1e-3


@dataclass(frozen=True)
class ForecastResult:
    """Aligned forecasts, truths, and the one-step residual stream.

    Row j of the tensors covers the targets of forecast origin
    ``target_times[j] - 1``; the residual stream holds the one-step
    residuals for every calibration and test time, with the first
    ``n_calibration`` rows belonging to the calibration split.
    """

    point: np.ndarray
    truth: np.ndarray
    target_times: np.ndarray
    residuals: ResidualSeries
    n_calibration: int

    @property
    def calibration_residuals(self):
        return self.residuals.values[: self.n_calibration]

    @property
    def test_residuals(self):
        return self.residuals.values[self.n_calibration :]


def backbone_forecast(series, window, method, split, horizon=1):
    """Forecast the calibration and test ranges of a series.

    Parameters
    ----------
    series : GraphSignalSeries
    window : int
        Look-back length (used by ridge_ar; also the minimum history).
    method : {"seasonal_naive", "ridge_ar"}
        seasonal_naive repeats the value one season (slots_per_day)
        earlier, falling back to the last observed value; ridge_ar fits
        per-node least squares on ``window`` lags over the train split
        only, one coefficient vector per horizon step.
    split : SplitIndices
    horizon : int
        Number of steps per forecast origin.

    Returns
    -------
    ForecastResult
    """
    if method not in BACKBONES:
        raise ValueError(f"unknown backbone {method!r}; choose from {BACKBONES}")
    window = int(window)
    horizon = int(horizon)
    if window < 1 or horizon < 1:
        raise ValueError("window and horizon must be >= 1")
    values = series.values
    t_len, n = values.shape
    cal_start = split.calibration.start
    if cal_start < 1:
        raise ValueError("calibration split must start after at least one observation")
    if method == "ridge_ar" and len(split.train) < window + horizon:
        raise ValueError(
            f"train split of {len(split.train)} is too short for window {window} "
            f"and horizon {horizon}"
        )

    one_step = _forecast_matrix(series, values, window, method, split, shift=1)
    stream_targets = np.arange(cal_start, t_len)
    residuals = ResidualSeries(
        values=values[cal_start:] - one_step,
        timestamps=series.timestamps[cal_start:],
    )

    n_targets = t_len - cal_start - (horizon - 1)
    if n_targets < 1:
        raise ValueError(f"horizon {horizon} leaves no complete forecast targets")
    point = np.empty((n_targets, n, horizon))
    truth = np.empty((n_targets, n, horizon))
    point[:, :, 0] = one_step[:n_targets]
    truth[:, :, 0] = values[cal_start : cal_start + n_targets]
    for k in range(2, horizon + 1):
        step = _forecast_matrix(series, values, window, method, split, shift=k)
        point[:, :, k - 1] = step[k - 1 : k - 1 + n_targets]
        truth[:, :, k - 1] = values[cal_start + k - 1 : cal_start + k - 1 + n_targets]
    return ForecastResult(
        point=point,
        truth=truth,
        target_times=stream_targets[:n_targets],
        residuals=residuals,
        n_calibration=len(split.calibration),
    )


def _forecast_matrix(series, values, window, method, split, shift):
    """Forecasts of values[t] made at origin t - shift, for t in
    [calibration start, T)."""
    t_len, n = values.shape
    cal_start = split.calibration.start
    targets = np.arange(cal_start, t_len)
    if method == "seasonal_naive":
        period = int(series.slots_per_day)
        out = np.empty((targets.size, n))
        for idx, t in enumerate(targets):
            origin = t - shift
            if t - period >= 0 and t - period <= origin:
                out[idx] = values[t - period]
            else:
                out[idx] = values[origin]
        return out
    coef, intercept = _fit_ridge(values, window, split, shift)
    out = np.empty((targets.size, n))
    for idx, t in enumerate(targets):
        origin = t - shift
        lags = values[origin - window + 1 : origin + 1]
        out[idx] = np.einsum("wn,wn->n", lags, coef) + intercept
    return out


def _fit_ridge(values, window, split, shift):
    """Per-node ridge on `window` lags predicting `shift` steps ahead."""
    n = values.shape[1]
    train_end = split.train.stop
    origins = np.arange(window - 1, train_end - shift)
    if origins.size < window + 1:
        raise ValueError("not enough training rows to fit the ridge backbone")
    coef = np.empty((window, n))
    intercept = np.empty(n)
    for node in range(n):
        x = np.stack([values[o - window + 1 : o + 1, node] for o in origins])
        y = values[origins + shift, node]
        x_mean = x.mean(axis=0)
        y_mean = y.mean()
        xc = x - x_mean
        yc = y - y_mean
        gram = xc.T @ xc + RIDGE_PENALTY * np.eye(window)
        beta = np.linalg.solve(gram, xc.T @ yc)
        coef[:, node] = beta
        intercept[node] = y_mean - x_mean @ beta
    return coef, intercept


def low_frequency_forecast(low_stream, n_targets, horizon=1):
    """Persistence forecast of the low-frequency band.

    The forecast for every horizon step of target j is the last observed
    low-frequency row before that target (the row just ahead of the final
    ``n_targets`` rows of the stream).
    """
    low_stream = as_matrix(low_stream, "low_stream", min_rows=1)
    n_targets = int(n_targets)
    if n_targets < 1:
        raise ValueError("n_targets must be >= 1")
    if low_stream.shape[0] < n_targets + 1:
        raise ValueError(
            f"stream of {low_stream.shape[0]} rows cannot serve {n_targets} targets "
            "with one observed origin each"
        )
    first_origin = low_stream.shape[0] - n_targets - 1
    origins = low_stream[first_origin : first_origin + n_targets]
    return np.repeat(origins[:, :, None], int(horizon), axis=2)

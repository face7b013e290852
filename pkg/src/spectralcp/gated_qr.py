"""Gated quantile regression conditioned on low-frequency context.

The model maps, per node and time step, a window of low-frequency residual
history (plus node identity and periodic time embeddings) to a context
vector, summarizes the matching high-frequency window by parameter-free
std/rms statistics, and fuses the two pathways through a sigmoid gate:

    context  = mlp(embed(low window) || node embedding || time embedding)
    z_low    = proj_low(context)
    z_high   = proj_high(std || rms)
    gate     = sigmoid(proj_gate(context))
    quantile = z_low + gate * z_high

Two output channels per horizon step hold the lower (level alpha/2) and
upper (level 1 - alpha/2) quantiles. Training minimizes pinball loss plus
a crossing penalty, with analytic gradients (no autodiff) and an adaptive
moment optimizer. Everything is seeded and bitwise reproducible.
"""

import json
from dataclasses import dataclass, asdict

import numpy as np
from sklearn.base import BaseEstimator

from .conformal import IntervalSeries, _as_forecast_tensor, _column_rank_quantile
from .errors import NumericError
from .validation import as_matrix, check_alpha

PARAM_ORDER = (
    "wx", "bx",
    "node_table",
    "tod_table", "dow_table",
    "w1", "b1",
    "w2", "b2",
    "w_low", "b_low",
    "w_gate", "b_gate",
    "w_high", "b_high",
)

DAYS_PER_WEEK = 7
N_STAT_FEATURES = 2
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class HighFreqStats:
    """Per-node std and rms of a high-frequency window (1/W normalization)."""

    std: np.ndarray
    rms: np.ndarray

    def stacked(self):
        return np.stack([self.std, self.rms], axis=-1)


def hf_statistics(window):
    """Std and rms of a (W, n) high-frequency window, per node.

    Both use population (1/W) normalization, so rms**2 = std**2 + mean**2.
    """
    window = as_matrix(window, "window", min_rows=1)
    std = window.std(axis=0)
    rms = np.sqrt(np.mean(window**2, axis=0))
    return HighFreqStats(std=std, rms=rms)


@dataclass(frozen=True)
class ModelDims:
    """Shape bookkeeping for the quantile model."""

    n_nodes: int
    window: int
    horizon: int = 1
    n_quantiles: int = 2
    d_input: int = 32
    d_node: int = 16
    d_period: int = 16
    d_hidden: int = 64
    slots_per_day: int = 288

    def __post_init__(self):
        # The loss and interval construction assume a (lower, upper) pair.
        if self.n_quantiles != 2:
            raise ValueError("the quantile model emits exactly 2 channels per step")
        for name in ("n_nodes", "window", "horizon", "d_input", "d_node",
                     "d_period", "d_hidden", "slots_per_day"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")

    @property
    def d_concat(self):
        return self.d_input + self.d_node + 2 * self.d_period

    @property
    def n_channels(self):
        return self.horizon * self.n_quantiles

    def shapes(self):
        return {
            "wx": (self.d_input, self.window),
            "bx": (self.d_input,),
            "node_table": (self.n_nodes, self.d_node),
            "tod_table": (self.slots_per_day, self.d_period),
            "dow_table": (DAYS_PER_WEEK, self.d_period),
            "w1": (self.d_hidden, self.d_concat),
            "b1": (self.d_hidden,),
            "w2": (self.d_hidden, self.d_hidden),
            "b2": (self.d_hidden,),
            "w_low": (self.n_channels, self.d_hidden),
            "b_low": (self.n_channels,),
            "w_gate": (self.n_channels, self.d_hidden),
            "b_gate": (self.n_channels,),
            "w_high": (self.n_channels, N_STAT_FEATURES),
            "b_high": (self.n_channels,),
        }


def init_params(dims, rng):
    """Seeded initialization: affine maps uniform in +-sqrt(1/fan_in),
    lookup tables 0.01 * standard normal."""
    shapes = dims.shapes()
    params = {}
    for name in PARAM_ORDER:
        shape = shapes[name]
        if name in ("node_table", "tod_table", "dow_table"):
            params[name] = 0.01 * rng.standard_normal(shape)
        elif name.startswith("b"):
            fan_in = shapes["w" + name[1:]][1] if ("w" + name[1:]) in shapes else shape[0]
            bound = np.sqrt(1.0 / fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape)
        else:
            bound = np.sqrt(1.0 / shape[1])
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _check_slots(dims, tod, dow):
    tod = np.asarray(tod, dtype=int)
    dow = np.asarray(dow, dtype=int)
    if np.any((tod < 0) | (tod >= dims.slots_per_day)):
        raise ValueError(f"time-of-day slot out of range [0, {dims.slots_per_day})")
    if np.any((dow < 0) | (dow >= DAYS_PER_WEEK)):
        raise ValueError(f"day-of-week out of range [0, {DAYS_PER_WEEK})")
    return tod, dow


def forward(params, dims, low_windows, stats, tod, dow, need_cache=False):
    """Batched forward pass.

    Parameters
    ----------
    low_windows : (B, n, W) array
    stats : (B, n, 2) array of std/rms features
    tod, dow : (B,) integer arrays

    Returns
    -------
    qhat : (B, n, K, Q) array, or (qhat, cache) when ``need_cache``.
    """
    low_windows = np.asarray(low_windows, dtype=float)
    stats = np.asarray(stats, dtype=float)
    b, n, w = low_windows.shape
    if n != dims.n_nodes or w != dims.window:
        raise ValueError(
            f"low windows must have shape (B, {dims.n_nodes}, {dims.window}), got {low_windows.shape}"
        )
    if stats.shape != (b, n, N_STAT_FEATURES):
        raise ValueError(f"stats must have shape ({b}, {n}, {N_STAT_FEATURES}), got {stats.shape}")
    tod, dow = _check_slots(dims, tod, dow)

    xe = low_windows @ params["wx"].T + params["bx"]
    se = np.broadcast_to(params["node_table"], (b, n, dims.d_node))
    pe = np.concatenate([params["tod_table"][tod], params["dow_table"][dow]], axis=1)
    pe_b = np.broadcast_to(pe[:, None, :], (b, n, 2 * dims.d_period))
    z0 = np.concatenate([xe, se, pe_b], axis=2)
    a1 = z0 @ params["w1"].T + params["b1"]
    h1 = np.maximum(a1, 0.0)
    context = h1 @ params["w2"].T + params["b2"]
    z_low = context @ params["w_low"].T + params["b_low"]
    gate_logit = context @ params["w_gate"].T + params["b_gate"]
    gate = _sigmoid(gate_logit)
    z_high = stats @ params["w_high"].T + params["b_high"]
    qflat = z_low + gate * z_high
    qhat = qflat.reshape(b, n, dims.horizon, dims.n_quantiles)
    if not need_cache:
        return qhat
    cache = {
        "low_windows": low_windows, "stats": stats, "tod": tod, "dow": dow,
        "z0": z0, "a1": a1, "h1": h1, "context": context,
        "gate": gate, "z_high": z_high,
    }
    return qhat, cache


def encode_context(params, dims, low_window, tod_slot, dow):
    """Context vectors for one time step: (n, d_hidden).

    ``low_window`` is (W, n): each node's lag vector is its column.
    """
    low_window = as_matrix(low_window, "low_window")
    if low_window.shape != (dims.window, dims.n_nodes):
        raise ValueError(
            f"low_window must have shape ({dims.window}, {dims.n_nodes}), got {low_window.shape}"
        )
    tod, dow = _check_slots(dims, [tod_slot], [dow])
    lw = low_window.T[None, :, :]
    xe = lw @ params["wx"].T + params["bx"]
    se = np.broadcast_to(params["node_table"], (1, dims.n_nodes, dims.d_node))
    pe = np.concatenate([params["tod_table"][tod], params["dow_table"][dow]], axis=1)
    pe_b = np.broadcast_to(pe[:, None, :], (1, dims.n_nodes, 2 * dims.d_period))
    z0 = np.concatenate([xe, se, pe_b], axis=2)
    h1 = np.maximum(z0 @ params["w1"].T + params["b1"], 0.0)
    return (h1 @ params["w2"].T + params["b2"])[0]


def gated_fusion(params, dims, context, stats):
    """Fuse a context matrix with high-frequency stats into quantiles.

    Returns the (n, K, Q) quantile tensor; channel 0 is the lower and
    channel 1 the upper quantile of each horizon step.
    """
    context = as_matrix(context, "context")
    if context.shape != (dims.n_nodes, dims.d_hidden):
        raise ValueError(
            f"context must have shape ({dims.n_nodes}, {dims.d_hidden}), got {context.shape}"
        )
    feats = stats.stacked() if isinstance(stats, HighFreqStats) else np.asarray(stats, dtype=float)
    if feats.shape != (dims.n_nodes, N_STAT_FEATURES):
        raise ValueError(f"stats must have shape ({dims.n_nodes}, {N_STAT_FEATURES})")
    z_low = context @ params["w_low"].T + params["b_low"]
    gate = _sigmoid(context @ params["w_gate"].T + params["b_gate"])
    z_high = feats @ params["w_high"].T + params["b_high"]
    return (z_low + gate * z_high).reshape(dims.n_nodes, dims.horizon, dims.n_quantiles)


def interval_loss(qhat, targets, alpha, crossing_weight):
    """Pinball loss of both channels plus the crossing penalty.

    ``qhat`` is (..., K, Q); ``targets`` is (..., K). The pinball terms use
    levels alpha/2 and 1 - alpha/2; the penalty is the mean positive part
    of (lower - upper) scaled by ``crossing_weight``.
    """
    qhat = np.asarray(qhat, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if qhat.shape[:-1] != targets.shape:
        raise ValueError(f"targets shape {targets.shape} does not match quantiles {qhat.shape}")
    alpha = check_alpha(alpha)
    q_lo = qhat[..., 0]
    q_up = qhat[..., 1]
    lo = _pinball(targets, q_lo, alpha / 2.0)
    up = _pinball(targets, q_up, 1.0 - alpha / 2.0)
    crossing = np.maximum(q_lo - q_up, 0.0)
    return float(np.mean(lo + up) + crossing_weight * np.mean(crossing))


def _pinball(y, q, level):
    diff = y - q
    return np.maximum(level * diff, (level - 1.0) * diff)


def _pinball_grad_q(y, q, level):
    # Subgradient at y == q resolved to the y <= q branch.
    return np.where(y - q > 0, -level, 1.0 - level)


def loss_and_grads(params, dims, low_windows, stats, tod, dow, targets,
                   alpha, crossing_weight):
    """Loss plus analytic gradients for every parameter."""
    qhat, cache = forward(params, dims, low_windows, stats, tod, dow, need_cache=True)
    targets = np.asarray(targets, dtype=float)
    b, n = qhat.shape[:2]
    if targets.shape != (b, n, dims.horizon):
        raise ValueError(
            f"targets must have shape ({b}, {n}, {dims.horizon}), got {targets.shape}"
        )
    alpha = check_alpha(alpha)
    n_cells = b * n * dims.horizon

    q_lo = qhat[..., 0]
    q_up = qhat[..., 1]
    loss = interval_loss(qhat, targets, alpha, crossing_weight)

    crossed = (q_lo - q_up) > 0
    dq = np.empty_like(qhat)
    dq[..., 0] = (_pinball_grad_q(targets, q_lo, alpha / 2.0) + crossing_weight * crossed) / n_cells
    dq[..., 1] = (_pinball_grad_q(targets, q_up, 1.0 - alpha / 2.0) - crossing_weight * crossed) / n_cells
    dqflat = dq.reshape(b, n, dims.n_channels)

    gate, z_high, context = cache["gate"], cache["z_high"], cache["context"]
    dz_low = dqflat
    dgate = dqflat * z_high
    dz_high = dqflat * gate
    dgate_logit = dgate * gate * (1.0 - gate)

    grads = {}
    grads["w_low"] = np.einsum("bnk,bnd->kd", dz_low, context)
    grads["b_low"] = dz_low.sum(axis=(0, 1))
    grads["w_gate"] = np.einsum("bnk,bnd->kd", dgate_logit, context)
    grads["b_gate"] = dgate_logit.sum(axis=(0, 1))
    grads["w_high"] = np.einsum("bnk,bns->ks", dz_high, cache["stats"])
    grads["b_high"] = dz_high.sum(axis=(0, 1))

    dcontext = dz_low @ params["w_low"] + dgate_logit @ params["w_gate"]
    h1 = cache["h1"]
    grads["w2"] = np.einsum("bnd,bne->de", dcontext, h1)
    grads["b2"] = dcontext.sum(axis=(0, 1))
    dh1 = dcontext @ params["w2"]
    da1 = dh1 * (cache["a1"] > 0)
    grads["w1"] = np.einsum("bnd,bne->de", da1, cache["z0"])
    grads["b1"] = da1.sum(axis=(0, 1))
    dz0 = da1 @ params["w1"]

    dxe = dz0[:, :, : dims.d_input]
    dse = dz0[:, :, dims.d_input : dims.d_input + dims.d_node]
    dpe = dz0[:, :, dims.d_input + dims.d_node :]
    grads["wx"] = np.einsum("bnd,bnw->dw", dxe, cache["low_windows"])
    grads["bx"] = dxe.sum(axis=(0, 1))
    grads["node_table"] = dse.sum(axis=0)
    dpe_per_sample = dpe.sum(axis=1)
    grads["tod_table"] = np.zeros_like(params["tod_table"])
    grads["dow_table"] = np.zeros_like(params["dow_table"])
    np.add.at(grads["tod_table"], cache["tod"], dpe_per_sample[:, : dims.d_period])
    np.add.at(grads["dow_table"], cache["dow"], dpe_per_sample[:, dims.d_period :])
    return loss, grads


@dataclass
class TrainConfig:
    """Optimizer and schedule settings (defaults follow the experiments)."""

    learning_rate: float = 8e-4
    weight_decay: float = 1e-4
    milestones: tuple = (5, 8)
    lr_decay: float = 0.5
    epochs: int = 30
    batch_size: int = 128
    crossing_weight: float = 15.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "weight_decay", "lr_decay", "crossing_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


@dataclass(frozen=True)
class QuantileWindows:
    """Aligned training/prediction samples for the quantile model.

    One sample per forecast origin t: the low- and high-frequency windows
    covering [t - W + 1, t], the periodic slots of t, and (for training)
    the residual targets at t+1 .. t+K.
    """

    low_windows: np.ndarray
    stats: np.ndarray
    tod: np.ndarray
    dow: np.ndarray
    targets: np.ndarray | None = None

    def __len__(self):
        return self.low_windows.shape[0]


def build_windows(low, high, residuals, tod, dow, window, horizon, origins):
    """Assemble QuantileWindows for the given forecast origins.

    Each origin t must satisfy t - window + 1 >= 0; targets are taken from
    ``residuals`` at t+1 .. t+horizon when available (pass residuals=None
    for prediction-time windows).
    """
    low = as_matrix(low, "low")
    high = as_matrix(high, "high")
    origins = np.asarray(origins, dtype=int)
    n = low.shape[1]
    low_windows = np.empty((origins.size, n, window))
    stats = np.empty((origins.size, n, N_STAT_FEATURES))
    for idx, t in enumerate(origins):
        if t - window + 1 < 0:
            raise ValueError(f"origin {t} has no room for a window of {window}")
        low_windows[idx] = low[t - window + 1 : t + 1].T
        stats[idx] = hf_statistics(high[t - window + 1 : t + 1]).stacked()
    tod = np.asarray(tod, dtype=int)[origins]
    dow = np.asarray(dow, dtype=int)[origins]
    targets = None
    if residuals is not None:
        residuals = as_matrix(residuals, "residuals")
        targets = np.empty((origins.size, n, horizon))
        for idx, t in enumerate(origins):
            if t + horizon > residuals.shape[0] - 1:
                raise ValueError(f"origin {t} has no targets up to horizon {horizon}")
            targets[idx] = residuals[t + 1 : t + horizon + 1].T
    return QuantileWindows(low_windows=low_windows, stats=stats, tod=tod, dow=dow, targets=targets)


def train(windows, dims, alpha, config):
    """Train the quantile model; returns (params, per-epoch mean losses).

    Deterministic for a fixed config seed: the rng initializes parameters
    first, then drives the per-epoch sample shuffles.
    """
    if len(windows) == 0 or windows.targets is None:
        raise ValueError("training needs a nonempty windowed dataset with targets")
    rng = np.random.default_rng(config.seed)
    params = init_params(dims, rng)
    moment1 = {k: np.zeros_like(v) for k, v in params.items()}
    moment2 = {k: np.zeros_like(v) for k, v in params.items()}
    step = 0
    history = []
    n_samples = len(windows)
    for epoch in range(config.epochs):
        lr = config.learning_rate * config.lr_decay ** sum(m <= epoch for m in config.milestones)
        perm = rng.permutation(n_samples)
        epoch_losses = []
        for start in range(0, n_samples, config.batch_size):
            batch = perm[start : start + config.batch_size]
            loss, grads = loss_and_grads(
                params, dims,
                windows.low_windows[batch], windows.stats[batch],
                windows.tod[batch], windows.dow[batch], windows.targets[batch],
                alpha, config.crossing_weight,
            )
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss {loss} at epoch {epoch}, step {step}")
            step += 1
            for name in PARAM_ORDER:
                grad = grads[name] + config.weight_decay * params[name]
                moment1[name] = config.beta1 * moment1[name] + (1 - config.beta1) * grad
                moment2[name] = config.beta2 * moment2[name] + (1 - config.beta2) * grad**2
                m_hat = moment1[name] / (1 - config.beta1**step)
                v_hat = moment2[name] / (1 - config.beta2**step)
                params[name] = params[name] - lr * m_hat / (np.sqrt(v_hat) + config.eps)
            epoch_losses.append(loss)
        history.append(float(np.mean(epoch_losses)))
    return params, history


def save_checkpoint(params, dims, path, seed=None):
    """Serialize parameters to a JSON checkpoint (bitwise round-trip).

    Parameter arrays are stored under their names; PARAM_ORDER documents
    the canonical ordering.
    """
    blob = {
        "format_version": CHECKPOINT_VERSION,
        "dims": asdict(dims),
        "seed": seed,
        "params": {name: params[name].tolist() for name in PARAM_ORDER},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh)


def load_checkpoint(path):
    """Load a checkpoint; returns (params, dims, seed)."""
    with open(path, "r", encoding="utf-8") as fh:
        blob = json.load(fh)
    if blob.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {blob.get('format_version')}")
    dims = ModelDims(**blob["dims"])
    shapes = dims.shapes()
    params = {}
    for name in PARAM_ORDER:
        arr = np.asarray(blob["params"][name], dtype=float)
        if arr.shape != shapes[name]:
            raise ValueError(f"checkpoint parameter {name} has shape {arr.shape}, expected {shapes[name]}")
        params[name] = arr
    return params, dims, blob.get("seed")


class GatedQuantileRegressor(BaseEstimator):
    """Adaptive interval predictor around a point forecaster.

    fit() trains the gated quantile model on windowed residual
    decompositions; predict() adds the learned quantiles to point
    forecasts. With ``conformalize=True`` the last ``holdout_fraction`` of
    the training samples is withheld and supplies per-node additive
    corrections that make the conformity scores satisfy the rank rule at
    level 1 - alpha.
    """

    def __init__(self, alpha=0.1, dims=None, epochs=30, batch_size=128,
                 learning_rate=8e-4, weight_decay=1e-4, milestones=(5, 8),
                 lr_decay=0.5, crossing_weight=15.0, conformalize=False,
                 holdout_fraction=0.25, random_state=0):
        self.alpha = alpha
        self.dims = dims
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.milestones = milestones
        self.lr_decay = lr_decay
        self.crossing_weight = crossing_weight
        self.conformalize = conformalize
        self.holdout_fraction = holdout_fraction
        self.random_state = random_state

    def _train_config(self):
        return TrainConfig(
            learning_rate=self.learning_rate, weight_decay=self.weight_decay,
            milestones=tuple(self.milestones), lr_decay=self.lr_decay,
            epochs=self.epochs, batch_size=self.batch_size,
            crossing_weight=self.crossing_weight, seed=self.random_state,
        )

    def fit(self, windows, y=None):
        if self.dims is None:
            raise ValueError("dims must be provided before fitting")
        if windows.targets is None:
            raise ValueError("training windows need residual targets")
        alpha = self.alpha_ = check_alpha(self.alpha)
        n_samples = len(windows)
        if self.conformalize:
            n_holdout = max(1, int(round(self.holdout_fraction * n_samples)))
            n_train = n_samples - n_holdout
            if n_train < 1:
                raise ValueError("not enough samples to hold out a conformal tail")
            train_part = _slice_windows(windows, slice(0, n_train))
            holdout = _slice_windows(windows, slice(n_train, n_samples))
        else:
            train_part, holdout = windows, None
        self.params_, self.loss_history_ = train(train_part, self.dims, alpha, self._train_config())
        if holdout is not None:
            qhat = self._raw_quantiles(holdout)
            scores = np.maximum(qhat[..., 0] - holdout.targets, holdout.targets - qhat[..., 1])
            pooled = scores.transpose(0, 2, 1).reshape(-1, self.dims.n_nodes)
            self.correction_ = _column_rank_quantile(pooled, 1.0 - alpha)
        else:
            self.correction_ = np.zeros(self.dims.n_nodes)
        return self

    def _raw_quantiles(self, windows):
        qhat = forward(self.params_, self.dims, windows.low_windows,
                       windows.stats, windows.tod, windows.dow)
        lo = np.minimum(qhat[..., 0], qhat[..., 1])
        up = np.maximum(qhat[..., 0], qhat[..., 1])
        return np.stack([lo, up], axis=-1)

    def save(self, path):
        """Write the trained parameters to a JSON checkpoint."""
        save_checkpoint(self.params_, self.dims, path, seed=self.random_state)
        return self

    def load(self, path):
        """Restore parameters (and dims/seed) from a checkpoint into this
        estimator; the conformal correction is reset to zero."""
        self.params_, self.dims, seed = load_checkpoint(path)
        if seed is not None:
            self.random_state = seed
        self.alpha_ = check_alpha(self.alpha)
        self.correction_ = np.zeros(self.dims.n_nodes)
        self.loss_history_ = []
        return self

    def predict(self, point_forecasts, windows):
        forecasts = _as_forecast_tensor(point_forecasts)
        qhat = self._raw_quantiles(windows)
        if forecasts.shape[0] != qhat.shape[0]:
            raise ValueError("forecasts and windows disagree on the number of targets")
        corr = self.correction_[None, :, None]
        lower = forecasts + qhat[..., 0] - corr
        upper = forecasts + qhat[..., 1] + corr
        # A negative correction can invert a narrow interval; widening the
        # upper bound back to the lower one keeps the rank-rule coverage.
        upper = np.maximum(upper, lower)
        return IntervalSeries(lower=lower, upper=upper, alpha=self.alpha_)


def _slice_windows(windows, sl):
    return QuantileWindows(
        low_windows=windows.low_windows[sl],
        stats=windows.stats[sl],
        tod=windows.tod[sl],
        dow=windows.dow[sl],
        targets=None if windows.targets is None else windows.targets[sl],
    )

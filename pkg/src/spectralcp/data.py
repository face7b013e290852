"""Synthetic series generation, CSV ingestion, and temporal splitting.

The synthetic generator builds series whose cross-node coupling lives
entirely in the lowest graph frequencies: a few AR(1) coefficient processes
drive the lowest Laplacian eigenvectors, while per-node Gaussian noise adds
uncoupled high-frequency content. That construction makes the
high-frequency part of the residuals exchangeable conditional on the
low-frequency trend by design.
"""

from dataclasses import dataclass

import numpy as np

from .eigen import eigendecompose
from .errors import DataError, ParseError
from .graph import normalized_laplacian
from .validation import as_matrix, frozen


@dataclass(frozen=True)
class GraphSignalSeries:
    """A (T, n) observation matrix on a graph, sampled on a regular grid.

    Timestamps are integer sample indices; the time-of-day slot of row t is
    timestamps[t] mod slots_per_day and the day-of-week cycles every
    slots_per_day * 7 samples.
    """

    values: np.ndarray
    timestamps: np.ndarray
    slots_per_day: int
    graph: object

    def __post_init__(self):
        values = as_matrix(self.values, "values", min_rows=1)
        if not np.all(np.isfinite(values)):
            raise ValueError("series values must be finite")
        if int(self.slots_per_day) < 1:
            raise ValueError("slots_per_day must be a positive integer")
        timestamps = np.asarray(self.timestamps, dtype=np.int64)
        if timestamps.shape[0] != values.shape[0]:
            raise ValueError("timestamps must match the number of rows")
        if np.any(np.diff(timestamps) <= 0):
            raise DataError("timestamps must be strictly increasing")
        object.__setattr__(self, "values", frozen(values))
        object.__setattr__(self, "timestamps", timestamps)

    @property
    def n_nodes(self):
        return self.values.shape[1]

    def __len__(self):
        return self.values.shape[0]

    def time_of_day(self):
        return (self.timestamps % self.slots_per_day).astype(int)

    def day_of_week(self):
        return ((self.timestamps // self.slots_per_day) % 7).astype(int)


@dataclass
class SyntheticSpec:
    """Recipe for a synthetic series with spectrally confined coupling."""

    graph: object
    length: int
    trend_rank: int = 2
    trend_ar: float = 0.99
    trend_scale: float = 3.0
    noise_scale: np.ndarray | float = 1.0
    hetero_period: int | None = None
    hetero_strength: float = 0.5
    slots_per_day: int = 288
    seed: int = 0

    def __post_init__(self):
        if self.length < 2:
            raise ValueError("length must be >= 2")
        if not 0 <= self.trend_rank < self.graph.n_nodes:
            raise ValueError(
                f"trend_rank must lie in [0, {self.graph.n_nodes}), got {self.trend_rank}"
            )
        if not 0.0 < self.trend_ar < 1.0:
            raise ValueError(f"trend_ar must lie in (0, 1), got {self.trend_ar}")
        scale = np.asarray(self.noise_scale, dtype=float)
        if scale.ndim == 0:
            scale = np.full(self.graph.n_nodes, float(scale))
        if scale.shape != (self.graph.n_nodes,) or np.any(scale < 0):
            raise ValueError("noise_scale must be a nonnegative scalar or length-n vector")
        self.noise_scale = scale
        if self.hetero_period is not None and int(self.hetero_period) < 2:
            raise ValueError("hetero_period must be >= 2 when set")


def generate_synthetic(spec):
    """Generate a GraphSignalSeries from a SyntheticSpec, seeded.

    Each snapshot is trend_scale * sum_m a_m(t) u_m plus independent
    per-node Gaussian noise, where u_m are the lowest-eigenvalue
    eigenvectors and each a_m is a stationary unit-variance AR(1) process
    with coefficient trend_ar. With ``hetero_period`` set, the noise scale
    is modulated by 1 + hetero_strength * sin(2 pi t / period).
    """
    rng = np.random.default_rng(spec.seed)
    t_len = int(spec.length)
    n = spec.graph.n_nodes

    basis = eigendecompose(normalized_laplacian(spec.graph))
    trend = np.zeros((t_len, n))
    if spec.trend_rank > 0:
        vectors = basis.eigenvectors[:, : spec.trend_rank]
        coeffs = np.empty((t_len, spec.trend_rank))
        coeffs[0] = rng.standard_normal(spec.trend_rank)
        innov_scale = np.sqrt(1.0 - spec.trend_ar**2)
        innovations = rng.standard_normal((t_len - 1, spec.trend_rank))
        for t in range(1, t_len):
            coeffs[t] = spec.trend_ar * coeffs[t - 1] + innov_scale * innovations[t - 1]
        trend = spec.trend_scale * coeffs @ vectors.T

    noise = rng.standard_normal((t_len, n)) * spec.noise_scale[None, :]
    if spec.hetero_period is not None:
        t_axis = np.arange(t_len)
        modulation = 1.0 + spec.hetero_strength * np.sin(2.0 * np.pi * t_axis / spec.hetero_period)
        noise = noise * modulation[:, None]

    return GraphSignalSeries(
        values=trend + noise,
        timestamps=np.arange(t_len),
        slots_per_day=spec.slots_per_day,
        graph=spec.graph,
    )


@dataclass(frozen=True)
class SplitIndices:
    """Contiguous, disjoint train/calibration/test ranges covering [0, T)."""

    train: range
    calibration: range
    test: range


def temporal_split(t_len, ratios=(0.4, 0.4, 0.2)):
    """Floor-based contiguous split; the remainder goes to the test range."""
    t_len = int(t_len)
    if t_len < 3:
        raise ValueError(f"need at least 3 time steps to split, got {t_len}")
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    n_train = int(np.floor(ratios[0] * t_len))
    n_cal = int(np.floor(ratios[1] * t_len))
    n_train = max(n_train, 1)
    n_cal = max(n_cal, 1)
    if n_train + n_cal >= t_len:
        raise ValueError(f"split ratios leave no test data for T={t_len}")
    return SplitIndices(
        train=range(0, n_train),
        calibration=range(n_train, n_train + n_cal),
        test=range(n_train + n_cal, t_len),
    )


def save_series_csv(series, path):
    """Write a series as CSV with header timestamp,node_0,...  Values use
    repr formatting so finite doubles round-trip bitwise."""
    n = series.n_nodes
    header = "timestamp," + ",".join(f"node_{i}" for i in range(n))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for ts, row in zip(series.timestamps, series.values):
            fh.write(str(int(ts)) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def load_series_csv(path, slots_per_day, graph=None):
    """Load a series CSV written by save_series_csv (or hand-built).

    Header must be ``timestamp,node_0,...,node_{n-1}``; every cell must be
    a finite number and timestamps must strictly increase.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty series file")
    header = lines[0].split(",")
    if header[0] != "timestamp" or len(header) < 2:
        raise DataError(f"{path}: header must start with 'timestamp,node_0,...'")
    n = len(header) - 1
    expected = [f"node_{i}" for i in range(n)]
    if header[1:] != expected:
        raise DataError(f"{path}: node columns must be named node_0..node_{n - 1} in order")

    timestamps = np.empty(len(lines) - 1, dtype=np.int64)
    values = np.empty((len(lines) - 1, n))
    for row, ln in enumerate(lines[1:]):
        cells = ln.split(",")
        lineno = row + 2
        if len(cells) != n + 1:
            raise ParseError(lineno, 0, f"expected {n + 1} cells, got {len(cells)}")
        try:
            timestamps[row] = int(cells[0])
        except ValueError as exc:
            raise ParseError(lineno, 0, f"bad timestamp {cells[0]!r}") from exc
        for col, cell in enumerate(cells[1:], start=1):
            try:
                value = float(cell)
            except ValueError as exc:
                raise ParseError(lineno, col, f"bad number {cell!r}") from exc
            if not np.isfinite(value):
                raise DataError(f"line {lineno}, column {col}: missing or non-finite value")
            values[row, col - 1] = value
    if np.any(np.diff(timestamps) <= 0):
        raise DataError(f"{path}: timestamps must be strictly increasing")
    return GraphSignalSeries(
        values=values, timestamps=timestamps, slots_per_day=slots_per_day, graph=graph
    )

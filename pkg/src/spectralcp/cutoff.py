"""Cutoff auto-selection diagnostics for the wavelet split.

Per band, three curves are recorded over a (sub)sample of snapshots: mean
absolute off-diagonal cross-node correlation, mean two-sample KS statistic
over random node pairs, and mean-square energy. The suggested number of
high-frequency bands is read off these curves, either by thresholding the
smoothed correlation curve or as the median of three candidate cut points.

Band order follows the frame: index 0 is the highest-frequency band, so
curves typically rise with the index as bands become more correlated.
"""

import json
from dataclasses import dataclass, asdict

import numpy as np

from .eigen import eigendecompose
from .graph import normalized_laplacian
from .validation import as_matrix, as_vector
from .wavelets import make_wavelet_frame

ENERGY_FRACTION = 0.9
SMOOTH_WIDTH = 3
MAX_NODE_PAIRS = 200


def ks_statistic(a, b):
    """Two-sample Kolmogorov-Smirnov statistic.

    The supremum over jump points of the gap between the two empirical
    CDFs; lies in [0, 1] and is symmetric in its arguments.
    """
    a = np.sort(as_vector(a, "a", min_len=1))
    b = np.sort(as_vector(b, "b", min_len=1))
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def _safe_correlation_matrix(series):
    """Pearson correlation matrix with zero-variance columns mapped to 0."""
    values = np.asarray(series, dtype=float)
    centered = values - values.mean(axis=0)
    std = centered.std(axis=0)
    ok = std > 0
    scaled = np.where(ok[None, :], centered / np.where(ok, std, 1.0)[None, :], 0.0)
    corr = scaled.T @ scaled / values.shape[0]
    corr = np.clip(corr, -1.0, 1.0)
    np.fill_diagonal(corr, np.where(ok, 1.0, 0.0))
    return corr


def correlation_intensity(series):
    """Mean correlation of each column with all other columns.

    Zero-variance columns contribute a correlation of 0 to their partners.
    """
    values = as_matrix(series, "series", min_rows=3)
    n = values.shape[1]
    if n < 2:
        raise ValueError(f"series must have at least 2 columns, got {n}")
    corr = _safe_correlation_matrix(values)
    return (corr.sum(axis=1) - np.diag(corr)) / (n - 1)


def mean_abs_offdiag_correlation(series):
    """Mean absolute off-diagonal entry of the correlation matrix."""
    values = np.asarray(series, dtype=float)
    n = values.shape[1]
    corr = _safe_correlation_matrix(values)
    mask = ~np.eye(n, dtype=bool)
    return float(np.abs(corr[mask]).mean())


def smooth_curve(curve, width=SMOOTH_WIDTH):
    """Centered moving average with edge replication."""
    curve = as_vector(curve, "curve", min_len=1)
    half = width // 2
    padded = np.concatenate([np.repeat(curve[0], half), curve, np.repeat(curve[-1], half)])
    kernel = np.ones(width) / width
    return np.convolve(padded, kernel, mode="valid")


@dataclass(frozen=True)
class CutoffDiagnostics:
    """Per-band curves and the chosen high-frequency band count."""

    per_scale_correlation: np.ndarray
    per_scale_ks: np.ndarray
    per_scale_energy: np.ndarray
    smoothed_correlation: np.ndarray
    candidates: tuple
    chosen_k: int

    def to_dict(self):
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, np.ndarray):
                out[key] = value.tolist()
            elif isinstance(value, tuple):
                out[key] = list(value)
        return out

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def auto_select_cutoff(graph, samples, n_scales=4, kernel_family="mexican_hat",
                       t_max=512, tau=None, rng_seed=0):
    """Suggest how many bands to treat as high frequency.

    Parameters
    ----------
    graph : Graph
    samples : (T, n) array
        Snapshots used for the diagnostic, subsampled to at most ``t_max``
        rows (seeded, without replacement).
    tau : float or None
        When given, the answer is the first band index whose smoothed
        correlation strictly exceeds ``tau`` (falling back to ``n_scales``
        when none does). Otherwise the answer is the median of three
        candidates: the first index reaching ``ENERGY_FRACTION`` of the
        cumulative band energy, the steepest rise of the smoothed
        correlation curve, and its most negative curvature.

    Returns
    -------
    CutoffDiagnostics
        ``chosen_k`` is a band count in [0, n_scales]; the 1-based cutoff
        index used by ``split_low_high`` is ``chosen_k + 1``.
    """
    samples = as_matrix(samples, "samples", min_rows=2)
    t_total, n = samples.shape
    if n < 2:
        raise ValueError(f"samples must cover at least 2 nodes, got {n}")
    t_max = int(t_max)
    if t_max < 2:
        raise ValueError(f"t_max must be >= 2, got {t_max}")

    rng = np.random.default_rng(rng_seed)
    if t_total > t_max:
        rows = np.sort(rng.choice(t_total, size=t_max, replace=False))
        samples = samples[rows]

    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    n_pairs = min(MAX_NODE_PAIRS, len(all_pairs))
    pair_idx = rng.choice(len(all_pairs), size=n_pairs, replace=False)
    pairs = [all_pairs[i] for i in pair_idx]

    basis = eigendecompose(normalized_laplacian(graph))
    frame = make_wavelet_frame(basis, n_scales=n_scales, kernel_family=kernel_family)
    u = basis.eigenvectors
    spectral = samples @ u

    n_scales = frame.n_scales
    correlation = np.zeros(n_scales)
    ks = np.zeros(n_scales)
    energy = np.zeros(n_scales)
    for i in range(n_scales):
        band = (spectral * frame.band_kernel_values[i][None, :]) @ u.T
        correlation[i] = mean_abs_offdiag_correlation(band)
        ks[i] = float(np.mean([ks_statistic(band[:, a], band[:, b]) for a, b in pairs]))
        energy[i] = float(np.mean(band**2))

    smoothed = smooth_curve(correlation)

    if tau is not None:
        above = np.nonzero(smoothed > float(tau))[0]
        chosen = int(above[0]) if above.size else n_scales
        candidates = (chosen,)
    else:
        candidates = (
            _energy_candidate(energy),
            _first_max(np.diff(smoothed)),
            _first_max(-np.diff(smoothed, 2)),
        )
        chosen = int(np.median(candidates))
    chosen = int(np.clip(chosen, 0, n_scales))
    return CutoffDiagnostics(
        per_scale_correlation=correlation,
        per_scale_ks=ks,
        per_scale_energy=energy,
        smoothed_correlation=smoothed,
        candidates=candidates,
        chosen_k=chosen,
    )


def _energy_candidate(energy):
    total = energy.sum()
    if total <= 0:
        return 0
    fraction = np.cumsum(energy) / total
    return int(np.nonzero(fraction >= ENERGY_FRACTION)[0][0])


def _first_max(values):
    values = np.asarray(values)
    if values.size == 0:
        return 0
    return int(np.argmax(values))

"""Graph wavelet frames: band-pass filtering in the Laplacian eigenbasis.

A frame holds S band-pass kernels plus one low-pass kernel evaluated on the
eigenvalues. Band rows are ordered from the highest-frequency band (row 0,
smallest scale) down to the lowest-frequency band (row S-1, largest scale),
so a cutoff index k in [1, S+1] splits a signal into

    high = bands 1..k-1   (the k-1 highest-frequency bands)
    low  = low-pass output + bands k..S

with ``high`` always computed as ``snapshot - low`` so the two parts add
back to the input exactly, regardless of frame tightness.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .validation import as_vector, check_length, frozen

KERNEL_FAMILIES = ("mexican_hat",)

# Ratio between the highest and lowest band-kernel peak frequencies.
PEAK_SPREAD = 20.0


def band_kernel(x):
    """Band-pass kernel g(x) = x * exp(1 - x); unit peak at x = 1, g(0) = 0."""
    x = np.asarray(x, dtype=float)
    return x * np.exp(1.0 - x)


def lowpass_kernel(lam, lambda_max):
    """Low-pass kernel h, close to 1 below ~lambda_max / (2 * PEAK_SPREAD)."""
    lam = np.asarray(lam, dtype=float)
    width = 0.5 * lambda_max / PEAK_SPREAD
    return np.exp(-((lam / width) ** 4))


@dataclass(frozen=True)
class WaveletFrame:
    """Band-pass and low-pass kernel values on a spectral basis.

    ``scales[i]`` is the dilation of band i; row i of ``band_kernel_values``
    holds g(scales[i] * lambda_j) for every eigenvalue lambda_j. Scales
    increase with i, so band 0 peaks at lambda_max and band S-1 peaks at
    lambda_max / PEAK_SPREAD.
    """

    basis: object
    scales: np.ndarray
    band_kernel_values: np.ndarray
    lowpass_values: np.ndarray
    kernel_family: str = "mexican_hat"

    @property
    def n_scales(self):
        return self.scales.shape[0]

    @property
    def n_nodes(self):
        return self.basis.n_nodes


@dataclass(frozen=True)
class WaveletCoefficients:
    """Per-scale band coefficients (rows) plus the low-pass component."""

    band: np.ndarray
    lowpass: np.ndarray


@dataclass(frozen=True)
class SpectralDecomposition:
    """Additive low/high split of one snapshot at a given cutoff index."""

    low: np.ndarray
    high: np.ndarray
    cutoff: int


def make_wavelet_frame(basis, n_scales=4, kernel_family="mexican_hat"):
    """Build a wavelet frame on a spectral basis.

    Band-kernel peaks are log-spaced over [lambda_max / PEAK_SPREAD,
    lambda_max]; scale i is the reciprocal of peak i (peaks descend with i).
    """
    if kernel_family not in KERNEL_FAMILIES:
        raise ValueError(f"unknown kernel family {kernel_family!r}; choose from {KERNEL_FAMILIES}")
    n_scales = int(n_scales)
    if n_scales < 2:
        raise ValueError(f"n_scales must be >= 2, got {n_scales}")
    # Numerically-zero eigenvalues can land at -1e-16; clamp so g stays >= 0.
    lam = np.maximum(np.asarray(basis.eigenvalues, dtype=float), 0.0)
    lambda_max = basis.lambda_max
    if lambda_max <= 1e-9:
        raise NumericError(f"degenerate spectrum: lambda_max = {lambda_max:.3e}")
    peaks = np.geomspace(lambda_max, lambda_max / PEAK_SPREAD, n_scales)
    scales = 1.0 / peaks
    band = np.vstack([band_kernel(s * lam) for s in scales])
    low = lowpass_kernel(lam, lambda_max)
    return WaveletFrame(
        basis=basis,
        scales=frozen(scales),
        band_kernel_values=frozen(band),
        lowpass_values=frozen(low),
        kernel_family=kernel_family,
    )


def forward_transform(frame, snapshot):
    """Wavelet coefficients of one snapshot: band rows and low-pass vector."""
    x = check_length(snapshot, frame.n_nodes, "snapshot")
    u = frame.basis.eigenvectors
    spectral = u.T @ x
    band = (frame.band_kernel_values * spectral[None, :]) @ u.T
    lowpass = u @ (frame.lowpass_values * spectral)
    return WaveletCoefficients(band=band, lowpass=lowpass)


def split_low_high(frame, snapshot, cutoff):
    """Split a snapshot into low- and high-frequency parts at a cutoff index.

    ``cutoff`` is 1-based: bands 1..cutoff-1 count as high frequency, the
    rest (plus the low-pass output) as low. cutoff = 1 puts every band in
    the low part; cutoff = n_scales + 1 keeps only the low-pass output.
    The high part is defined as ``snapshot - low`` so the split is exactly
    additive.
    """
    cutoff = int(cutoff)
    if not 1 <= cutoff <= frame.n_scales + 1:
        raise ValueError(
            f"cutoff must lie in [1, {frame.n_scales + 1}], got {cutoff}"
        )
    x = check_length(snapshot, frame.n_nodes, "snapshot")
    u = frame.basis.eigenvectors
    spectral = u.T @ x
    response = frame.lowpass_values + frame.band_kernel_values[cutoff - 1 :].sum(axis=0)
    low = u @ (response * spectral)
    return SpectralDecomposition(low=low, high=x - low, cutoff=cutoff)


def split_series(frame, series, cutoff):
    """Vectorized low/high split of a (T, n) series; returns (low, high)."""
    values = np.asarray(series, dtype=float)
    if values.ndim != 2 or values.shape[1] != frame.n_nodes:
        raise ValueError(
            f"series must have shape (T, {frame.n_nodes}), got {values.shape}"
        )
    cutoff = int(cutoff)
    if not 1 <= cutoff <= frame.n_scales + 1:
        raise ValueError(
            f"cutoff must lie in [1, {frame.n_scales + 1}], got {cutoff}"
        )
    u = frame.basis.eigenvectors
    response = frame.lowpass_values + frame.band_kernel_values[cutoff - 1 :].sum(axis=0)
    low = (values @ u) * response[None, :] @ u.T
    return low, values - low


def low_band_response(frame, cutoff):
    """Combined spectral response of the low side at a cutoff index."""
    cutoff = int(cutoff)
    if not 1 <= cutoff <= frame.n_scales + 1:
        raise ValueError(
            f"cutoff must lie in [1, {frame.n_scales + 1}], got {cutoff}"
        )
    return frame.lowpass_values + frame.band_kernel_values[cutoff - 1 :].sum(axis=0)


def zero_frequency_direction(graph):
    """The eigenvector direction with eigenvalue 0: D^{1/2} 1 (unnormalized)."""
    return np.sqrt(as_vector(graph.degrees(), "degrees"))

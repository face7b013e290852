"""Spectral-domain conformal prediction for graph-structured time series."""

__version__ = "0.1.0"

from .conformal import (
    CalibrationConfig,
    DecayWeightedConformal,
    IntervalSeries,
    ResidualSeries,
    SlidingWindowConformal,
    SpectralSplitConformal,
    SplitConformal,
    empirical_quantile,
    nexcp_intervals,
    scp_intervals,
    seqcp_intervals,
    spectral_scp_intervals,
    weighted_quantile,
)
from .cutoff import (
    CutoffDiagnostics,
    auto_select_cutoff,
    correlation_intensity,
    ks_statistic,
    mean_abs_offdiag_correlation,
)
from .data import (
    GraphSignalSeries,
    SplitIndices,
    SyntheticSpec,
    generate_synthetic,
    load_series_csv,
    save_series_csv,
    temporal_split,
)
from .decomposer import SpectralDecomposer
from .eigen import SpectralBasis, eigendecompose, jacobi_eigh
from .errors import ConfigError, DataError, NumericError, ParseError
from .forecast import ForecastResult, backbone_forecast, low_frequency_forecast
from .gated_qr import (
    GatedQuantileRegressor,
    HighFreqStats,
    ModelDims,
    TrainConfig,
    build_windows,
    encode_context,
    gated_fusion,
    hf_statistics,
    interval_loss,
)
from .graph import (
    Graph,
    Laplacian,
    build_graph,
    community_graph,
    load_adjacency_csv,
    normalized_laplacian,
    random_connected_graph,
    save_adjacency_csv,
)
from .metrics import WidthSummary, coverage, pi_width, pinball_loss, winkler
from .wavelets import (
    SpectralDecomposition,
    WaveletCoefficients,
    WaveletFrame,
    forward_transform,
    make_wavelet_frame,
    split_low_high,
    split_series,
)

import numpy as np
import pytest

from spectralcp import (
    GraphSignalSeries,
    SyntheticSpec,
    build_graph,
    community_graph,
    correlation_intensity,
    eigendecompose,
    generate_synthetic,
    load_series_csv,
    mean_abs_offdiag_correlation,
    normalized_laplacian,
    save_series_csv,
    temporal_split,
)
from spectralcp.decomposer import SpectralDecomposer
from spectralcp.errors import DataError, ParseError


GRAPH = community_graph(12, 2, intra_prob=0.7, inter_weight=0.3, seed=5)


def spec(**kwargs):
    base = dict(graph=GRAPH, length=500, trend_rank=2, trend_ar=0.98,
                trend_scale=3.0, noise_scale=1.0, slots_per_day=24, seed=0)
    base.update(kwargs)
    return SyntheticSpec(**base)


class TestGenerateSynthetic:
    def test_noiseless_series_lies_in_trend_span(self):
        series = generate_synthetic(spec(noise_scale=0.0))
        basis = eigendecompose(normalized_laplacian(GRAPH))
        u = np.asarray(basis.eigenvectors)[:, :2]
        projector = u @ u.T
        values = np.asarray(series.values)
        outside = values - values @ projector.T
        assert np.abs(outside).max() < 1e-10

    def test_trendless_columns_are_independent(self):
        series = generate_synthetic(spec(trend_scale=0.0, length=10_000))
        assert np.abs(correlation_intensity(series.values)).max() < 0.05

    def test_high_band_less_correlated_than_low_band(self):
        series = generate_synthetic(spec(length=3000))
        decomposer = SpectralDecomposer(graph=GRAPH, cutoff=4).fit(series.values)
        low, high = decomposer.decompose_series(series.values)
        assert mean_abs_offdiag_correlation(high) < mean_abs_offdiag_correlation(low)

    def test_deterministic_per_seed(self):
        a = generate_synthetic(spec(seed=5))
        b = generate_synthetic(spec(seed=5))
        assert np.array_equal(np.asarray(a.values), np.asarray(b.values))

    def test_distinct_seeds_decorrelate(self):
        a = np.asarray(generate_synthetic(spec(seed=1, length=4000)).values)
        b = np.asarray(generate_synthetic(spec(seed=2, length=4000)).values)
        corrs = [np.corrcoef(a[:, i], b[:, i])[0, 1] for i in range(a.shape[1])]
        assert np.abs(np.mean(corrs)) < 0.05

    def test_hetero_modulation_changes_local_scale(self):
        series = generate_synthetic(spec(trend_scale=0.0, hetero_period=100,
                                         hetero_strength=0.8, length=2000))
        values = np.asarray(series.values)
        # Peak of 1 + 0.8 sin at t=25 (+ k*100), trough at t=75 (+ k*100).
        peaks = values[np.arange(2000) % 100 == 25]
        troughs = values[np.arange(2000) % 100 == 75]
        assert peaks.std() > 3 * troughs.std()

    def test_trend_rank_bound(self):
        with pytest.raises(ValueError, match="trend_rank"):
            spec(trend_rank=12)


class TestTemporalSplit:
    def test_ten_steps(self):
        s = temporal_split(10)
        assert (list(s.train), list(s.calibration), list(s.test)) == (
            list(range(0, 4)), list(range(4, 8)), list(range(8, 10)))

    def test_five_steps(self):
        s = temporal_split(5)
        assert (list(s.train), list(s.calibration), list(s.test)) == (
            [0, 1], [2, 3], [4])

    def test_three_steps_minimal(self):
        s = temporal_split(3)
        assert (list(s.train), list(s.calibration), list(s.test)) == ([0], [1], [2])

    def test_disjoint_ordered_exhaustive(self):
        for t_len in range(3, 60):
            s = temporal_split(t_len)
            combined = list(s.train) + list(s.calibration) + list(s.test)
            assert combined == list(range(t_len))
            assert len(s.test) >= 1

    def test_too_short_rejected(self):
        with pytest.raises(ValueError, match="at least 3"):
            temporal_split(2)

    def test_bad_ratios_rejected(self):
        with pytest.raises(ValueError, match="ratios"):
            temporal_split(10, ratios=(0.5, 0.6, 0.2))


class TestSeriesCsv:
    def test_round_trip_bitwise(self, tmp_path):
        series = generate_synthetic(spec(length=50))
        path = tmp_path / "series.csv"
        save_series_csv(series, path)
        loaded = load_series_csv(path, slots_per_day=24, graph=GRAPH)
        assert np.array_equal(np.asarray(loaded.values), np.asarray(series.values))
        assert np.array_equal(loaded.timestamps, series.timestamps)

    def test_missing_value_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("timestamp,node_0,node_1\n0,1.0,NaN\n1,2.0,3.0\n")
        with pytest.raises(DataError, match="missing or non-finite"):
            load_series_csv(path, slots_per_day=24)

    def test_unparseable_cell_reports_position(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("timestamp,node_0\n0,1.0\n1,zzz\n")
        with pytest.raises(ParseError) as err:
            load_series_csv(path, slots_per_day=24)
        assert err.value.line == 3
        assert err.value.column == 1

    def test_non_monotone_timestamps_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("timestamp,node_0\n5,1.0\n4,2.0\n")
        with pytest.raises(DataError, match="strictly increasing"):
            load_series_csv(path, slots_per_day=24)

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,node_0\n0,1.0\n")
        with pytest.raises(DataError, match="header"):
            load_series_csv(path, slots_per_day=24)


class TestGraphSignalSeries:
    def test_time_features(self):
        series = GraphSignalSeries(values=np.zeros((50, 2)),
                                   timestamps=np.arange(50),
                                   slots_per_day=6, graph=None)
        tod = series.time_of_day()
        dow = series.day_of_week()
        assert tod[0] == 0 and tod[7] == 1
        assert dow[0] == 0 and dow[6] == 1 and dow[6 * 7] == 0

    def test_non_monotone_rejected(self):
        with pytest.raises(DataError, match="strictly increasing"):
            GraphSignalSeries(values=np.zeros((2, 2)), timestamps=[1, 1],
                              slots_per_day=4, graph=None)


class TestValidationGuards:
    def test_slots_per_day_must_be_positive(self):
        with pytest.raises(ValueError, match="slots_per_day"):
            GraphSignalSeries(values=np.zeros((2, 2)), timestamps=[0, 1],
                              slots_per_day=0, graph=None)

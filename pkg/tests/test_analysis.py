import numpy as np
import pytest

from chromatic_hbt.analysis import (
    CoincidenceCounts,
    G2Curve,
    count_coincidences,
    estimate_g2,
    scan_delay,
    scan_tau,
)
from chromatic_hbt.protocol import G2Model
from chromatic_hbt.streams import (
    StreamConfig,
    StreamMeta,
    TdcStream,
    simulate_stream,
)

from oracles import pairwise_coincidences


def toy_stream(times_a, times_b, bin_width_ps=1000, duration_ps=None):
    times_a = np.asarray(times_a, dtype=np.int64)
    times_b = np.asarray(times_b, dtype=np.int64)
    if duration_ps is None:
        top = max(times_a.max(initial=0), times_b.max(initial=0))
        duration_ps = (top // bin_width_ps + 1) * bin_width_ps
    channels = np.concatenate([np.zeros(times_a.size, np.uint8), np.ones(times_b.size, np.uint8)])
    times = np.concatenate([times_a, times_b])
    order = np.lexsort((channels, times))
    return TdcStream(
        channels=channels[order],
        times_ps=times[order],
        meta=StreamMeta(bin_width_ps=bin_width_ps, duration_ps=int(duration_ps), seed=0),
    )


class TestCountCoincidences:
    def test_same_bin_counts_one(self):
        stream = toy_stream([0], [0])
        counts = count_coincidences(stream, tau=0.0)
        assert counts.n_coincidence == 1
        assert counts.n_a == 1 and counts.n_b == 1

    def test_shifted_out_of_coincidence(self):
        stream = toy_stream([0], [0], bin_width_ps=1000, duration_ps=100_000)
        counts = count_coincidences(stream, tau=10e-9)
        assert counts.n_coincidence == 0

    def test_constant_lag_recovered_by_opposite_shift(self):
        # B clicks lag A by exactly 5 ns; tau = -5 ns rebins them together
        bw_ps = 1000
        times_a = np.arange(10, dtype=np.int64) * 50_000
        times_b = times_a + 5_000
        stream = toy_stream(times_a, times_b, bin_width_ps=bw_ps)
        counts = count_coincidences(stream, tau=-5e-9)
        assert counts.n_coincidence == times_a.size
        assert count_coincidences(stream, tau=0.0).n_coincidence == 0

    def test_shift_covariance_exact(self):
        rng = np.random.default_rng(3)
        times_a = np.sort(rng.choice(10_000, size=300, replace=False)) * 1000
        times_b = np.sort(rng.choice(10_000, size=300, replace=False)) * 1000
        tau = 17e-9
        stream = toy_stream(times_a, times_b, duration_ps=10_000_000)
        shifted = toy_stream(times_a, times_b + 17_000, duration_ps=10_017_000)
        a = count_coincidences(stream, tau=tau, window=(0.0, 10_000e-9))
        b = count_coincidences(shifted, tau=0.0, window=(0.0, 10_000e-9))
        assert a.n_coincidence == b.n_coincidence

    def test_matches_pairwise_oracle(self):
        rng = np.random.default_rng(11)
        for trial in range(10):
            n = int(rng.integers(50, 400))
            times_a = np.sort(rng.choice(500_000, size=n, replace=False)).astype(np.int64)
            times_b = np.sort(rng.choice(500_000, size=n, replace=False)).astype(np.int64)
            bw_ps = int(rng.choice([100, 250, 1000]))
            tau_ps = int(rng.integers(-5000, 5000))
            stream = toy_stream(times_a, times_b, bin_width_ps=100, duration_ps=600_000)
            counts = count_coincidences(stream, tau=tau_ps * 1e-12, bin_width=bw_ps * 1e-12)
            in_window = (times_b + tau_ps >= 0) & (times_b + tau_ps < (600_000 // bw_ps) * bw_ps)
            expected = pairwise_coincidences(times_a, times_b[in_window], tau_ps, bw_ps)
            assert counts.n_coincidence == expected

    def test_finer_bin_than_stream_rejected(self):
        stream = toy_stream([0], [0], bin_width_ps=1000)
        with pytest.raises(ValueError, match="finer"):
            count_coincidences(stream, bin_width=0.5e-9)

    def test_empty_window_rejected(self):
        stream = toy_stream([0], [0])
        with pytest.raises(ValueError, match="window"):
            count_coincidences(stream, window=(5e-9, 5e-9))


class TestEstimateG2:
    def test_uncorrelated_expectation_is_one(self):
        counts = CoincidenceCounts(n_coincidence=25, n_a=500, n_b=500, n_bin=10_000,
                                   bin_width=1e-9, tau=0.0)
        g2, _ = estimate_g2(counts)
        assert g2 == pytest.approx(25 * 10_000 / (500 * 500))
        assert g2 == pytest.approx(1.0)

    def test_zero_coincidences_upper_bound_sigma(self):
        counts = CoincidenceCounts(n_coincidence=0, n_a=100, n_b=100, n_bin=1000,
                                   bin_width=1e-9, tau=0.0)
        g2, sigma = estimate_g2(counts)
        assert g2 == 0.0
        assert sigma == pytest.approx(1000 / (100 * 100))

    def test_zero_singles_rejected(self):
        counts = CoincidenceCounts(n_coincidence=0, n_a=0, n_b=10, n_bin=1000,
                                   bin_width=1e-9, tau=0.0)
        with pytest.raises(ValueError, match="zero counts"):
            estimate_g2(counts)

    def test_peak_delay_g2_reaches_one_plus_half_visibility(self):
        # at the fringe maximum the estimator sits at 1 + v/2 within 3 sigma
        model = G2Model(visibility=0.59, phase=-0.16, frequency=210.1e9)
        peak_delay = -model.phase / (2 * np.pi * model.frequency)
        cfg = StreamConfig(bin_width=1e-9, rate_a=1e7, rate_b=1e7, seed=4242,
                           model=model, delay_schedule=((peak_delay, 0.02),))
        stream = simulate_stream(cfg)
        g2, sigma = estimate_g2(count_coincidences(stream))
        assert abs(g2 - (1.0 + model.visibility / 2.0)) < 3.0 * sigma
        assert g2 == pytest.approx(1.295, abs=0.05)

    def test_normalization_over_thirty_seeds(self):
        # uncorrelated million-bin streams: mean g2 within one percent of 1
        values = []
        for seed in range(30):
            cfg = StreamConfig(bin_width=1e-9, rate_a=5e7, rate_b=5e7, seed=seed,
                               model=None, delay_schedule=((0.0, 1e-3),))
            stream = simulate_stream(cfg)
            g2, _ = estimate_g2(count_coincidences(stream))
            values.append(g2)
        assert 0.99 < np.mean(values) < 1.01


class TestScans:
    def test_scan_delay_needs_three_settings(self):
        cfg = StreamConfig(bin_width=1e-9, rate_a=1e6, rate_b=1e6, seed=1,
                           delay_schedule=((0.0, 1e-4),))
        stream = simulate_stream(cfg)
        with pytest.raises(ValueError, match=">= 3"):
            scan_delay([(0.0, stream), (1e-12, stream)])

    def test_scan_delay_rejects_duplicates(self):
        cfg = StreamConfig(bin_width=1e-9, rate_a=1e6, rate_b=1e6, seed=1,
                           delay_schedule=((0.0, 1e-4),))
        stream = simulate_stream(cfg)
        with pytest.raises(ValueError, match="duplicate"):
            scan_delay([(0.0, stream), (0.0, stream), (1e-12, stream)])

    def test_flat_scan_for_zero_visibility(self):
        model = G2Model(visibility=0.0, phase=0.0, frequency=210.1e9)
        streams = []
        for k in range(5):
            cfg = StreamConfig(bin_width=1e-9, rate_a=2e7, rate_b=2e7, seed=100 + k,
                               model=model, delay_schedule=((k * 1e-12, 2e-3),))
            streams.append((k * 1e-12, simulate_stream(cfg)))
        curve = scan_delay(streams)
        assert curve.x_kind == "t_delay"
        assert np.all(np.abs(curve.g2 - 1.0) < 5.0 * curve.sigma)

    def test_scan_tau_zero_point_matches_direct_estimate(self):
        cfg = StreamConfig(bin_width=1e-9, rate_a=1e7, rate_b=1e7, seed=21,
                           delay_schedule=((0.0, 1e-3),))
        stream = simulate_stream(cfg)
        curve = scan_tau(stream, [0.0, 5e-9, -5e-9])
        direct, _ = estimate_g2(count_coincidences(stream, tau=0.0))
        assert curve.g2[0] == direct
        assert curve.x_kind == "tau"

    def test_scan_tau_beyond_window_rejected(self):
        cfg = StreamConfig(bin_width=1e-9, rate_a=1e6, rate_b=1e6, seed=2,
                           delay_schedule=((0.0, 1e-5),))
        stream = simulate_stream(cfg)
        with pytest.raises(ValueError, match="beyond"):
            scan_tau(stream, [2e-5])

    def test_scan_tau_empty_list_rejected(self):
        cfg = StreamConfig(bin_width=1e-9, rate_a=1e6, rate_b=1e6, seed=2,
                           delay_schedule=((0.0, 1e-5),))
        stream = simulate_stream(cfg)
        with pytest.raises(ValueError, match="empty"):
            scan_tau(stream, [])

    def test_scan_tau_fast_path_matches_per_point_counts(self):
        # whole-bin shifts use the one-pass histogram; must agree exactly
        # with the single-shift counter on every point
        cfg = StreamConfig(bin_width=1e-9, rate_a=2e7, rate_b=2e7, seed=33,
                           model=G2Model(visibility=0.5, phase=0.3, frequency=210.1e9),
                           delay_schedule=((0.0, 5e-4),))
        stream = simulate_stream(cfg)
        taus = [k * 1e-9 for k in range(-20, 21, 3)]
        curve = scan_tau(stream, taus)
        for tau, g2, sigma in zip(curve.x, curve.g2, curve.sigma):
            counts = count_coincidences(stream, tau=tau)
            g2_ref, sigma_ref = estimate_g2(counts)
            assert g2 == g2_ref
            assert sigma == sigma_ref

    def test_scan_tau_fractional_shift_uses_general_path(self):
        cfg = StreamConfig(bin_width=2e-9, rate_a=2e7, rate_b=2e7, seed=34,
                           delay_schedule=((0.0, 1e-4),))
        stream = simulate_stream(cfg)
        taus = [0.0, 1e-9, 3e-9]  # half-bin shifts
        curve = scan_tau(stream, taus)
        for tau, g2 in zip(curve.x, curve.g2):
            counts = count_coincidences(stream, tau=tau)
            g2_ref, _ = estimate_g2(counts)
            assert g2 == g2_ref


class TestG2Curve:
    def test_csv_round_trip(self, tmp_path):
        curve = G2Curve(
            x=np.array([0.0, 1e-12, 2e-12]),
            g2=np.array([1.2, 0.9, 1.05]),
            sigma=np.array([0.02, 0.02, 0.03]),
            x_kind="t_delay",
        )
        path = tmp_path / "curve.csv"
        curve.to_csv(path)
        back = G2Curve.from_csv(path)
        assert back.x_kind == "t_delay"
        assert np.array_equal(back.x, curve.x)
        assert np.array_equal(back.g2, curve.g2)
        assert np.array_equal(back.sigma, curve.sigma)

    def test_path_length_conversion(self):
        curve = G2Curve(
            x=np.array([0.0, 1e-12, 2e-12]),
            g2=np.ones(3),
            sigma=np.full(3, 0.1),
            x_kind="t_delay",
        )
        path_curve = curve.as_path_length()
        assert path_curve.x_kind == "path_length"
        assert path_curve.x[1] == pytest.approx(1e-12 * 299792458.0)

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(ValueError, match="sigma"):
            G2Curve(np.array([0.0]), np.array([1.0]), np.array([0.0]))

    def test_inconsistent_counts_rejected(self):
        with pytest.raises(ValueError, match="inconsistent"):
            CoincidenceCounts(n_coincidence=5, n_a=2, n_b=9, n_bin=100, bin_width=1e-9, tau=0.0)

import math

import numpy as np
import pytest

from chromatic_hbt.protocol import G2Model
from chromatic_hbt.streams import (
    CHANNEL_A,
    CHANNEL_B,
    StreamConfig,
    StreamFormatError,
    StreamMeta,
    read_stream,
    simulate_stream,
    write_stream,
)

ZERO_MODEL = G2Model(visibility=0.59, phase=-0.16, frequency=210.1e9)
TAU_MODEL = G2Model(visibility=0.576, phase=-0.434, frequency=1.32e6, linewidth=0.118e6)


def basic_config(**overrides):
    defaults = dict(
        bin_width=1e-9,
        rate_a=2e6,
        rate_b=2e6,
        seed=12345,
        model=ZERO_MODEL,
        delay_schedule=((0.0, 2e-3),),
    )
    defaults.update(overrides)
    return StreamConfig(**defaults)


class TestStreamConfig:
    def test_rate_bin_product_guard(self):
        with pytest.raises(ValueError, match="rate \\* bin_width"):
            basic_config(rate_a=2e8)

    def test_non_integer_picosecond_bin_rejected(self):
        with pytest.raises(ValueError, match="picoseconds"):
            basic_config(bin_width=0.5e-12)

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError, match="rate_b"):
            basic_config(rate_b=-1.0)

    def test_duration_sums_schedule(self):
        cfg = basic_config(delay_schedule=((0.0, 1e-3), (1e-12, 3e-3)))
        assert cfg.duration == pytest.approx(4e-3)
        assert cfg.duration_ps == 4_000_000_000

    def test_negative_seed_rejected(self):
        with pytest.raises(ValueError, match="seed"):
            basic_config(seed=-1)


class TestSimulateStream:
    def test_deterministic_for_seed(self):
        cfg = basic_config()
        s1 = simulate_stream(cfg)
        s2 = simulate_stream(cfg)
        assert s1.same_records(s2)

    def test_different_seeds_differ(self):
        s1 = simulate_stream(basic_config(seed=1))
        s2 = simulate_stream(basic_config(seed=2))
        assert not s1.same_records(s2)

    def test_zero_duration_empty(self):
        cfg = basic_config(delay_schedule=((0.0, 0.0),))
        stream = simulate_stream(cfg)
        assert len(stream) == 0

    def test_singles_counts_within_5_sigma(self):
        cfg = basic_config()
        stream = simulate_stream(cfg)
        expected = cfg.rate_a * cfg.duration
        for n in stream.counts():
            assert abs(n - expected) < 5.0 * math.sqrt(expected)

    def test_timestamps_sorted_and_in_range(self):
        stream = simulate_stream(basic_config())
        assert stream.times_ps.max() < stream.meta.duration_ps
        assert stream.times_ps.min() >= 0
        for ch in (CHANNEL_A, CHANNEL_B):
            t = stream.channel_times(ch)
            assert np.all(np.diff(t) > 0)

    def test_uncorrelated_coincidence_rate(self):
        # visibility 0: joint rate = p_a * p_b per bin within 5 sigma
        cfg = basic_config(model=G2Model(visibility=0.0, phase=0.0, frequency=210.1e9),
                           rate_a=5e6, rate_b=5e6, delay_schedule=((0.0, 4e-3),))
        stream = simulate_stream(cfg)
        bw = cfg.bin_width_ps
        a = np.unique(stream.channel_times(CHANNEL_A) // bw)
        b = np.unique(stream.channel_times(CHANNEL_B) // bw)
        observed = np.intersect1d(a, b, assume_unique=True).size
        n_bins = cfg.duration_ps // bw
        expected = n_bins * (cfg.rate_a * cfg.bin_width) * (cfg.rate_b * cfg.bin_width)
        assert abs(observed - expected) < 5.0 * math.sqrt(expected)

    def test_fringe_injected_at_scheduled_delays(self):
        # chi2 per dof of empirical g2 against the model across a schedule
        model = ZERO_MODEL
        period = 1.0 / model.frequency
        schedule = tuple((k * period / 8.0, 4e-3) for k in range(12))
        cfg = basic_config(rate_a=8e6, rate_b=8e6, delay_schedule=schedule, seed=77)
        stream = simulate_stream(cfg)
        bw = cfg.bin_width_ps
        chi2 = 0.0
        from chromatic_hbt.protocol import g2_zero_model

        for t_delay, sub in stream.split_segments():
            a = np.unique(sub.channel_times(CHANNEL_A) // bw)
            b = np.unique(sub.channel_times(CHANNEL_B) // bw)
            n_c = np.intersect1d(a, b, assume_unique=True).size
            n_bins = sub.meta.duration_ps // bw
            g2 = n_c * n_bins / (a.size * b.size)
            sigma = g2 / math.sqrt(n_c)
            chi2 += ((g2 - g2_zero_model(model, t_delay)) / sigma) ** 2
        assert chi2 / len(schedule) < 2.0

    def test_kernel_model_injects_oscillating_correlation(self):
        cfg = StreamConfig(
            bin_width=20e-9, rate_a=1.5e5, rate_b=1.5e5, seed=99,
            model=TAU_MODEL, delay_schedule=((0.0, 4.0),),
        )
        stream = simulate_stream(cfg)
        bw = cfg.bin_width_ps
        a = np.unique(stream.channel_times(CHANNEL_A) // bw)
        b = np.unique(stream.channel_times(CHANNEL_B) // bw)
        n_bins = cfg.duration_ps // bw
        from chromatic_hbt.protocol import g2_tau_model

        chi2 = 0.0
        n_points = 0
        for tau_s in (0.0, 0.3e-6, -0.3e-6, 2.0e-6, 8.0e-6, 40e-6):
            shift_bins = round(tau_s / cfg.bin_width)
            n_c = np.intersect1d(a, b + shift_bins, assume_unique=True).size
            g2 = n_c * n_bins / (a.size * b.size)
            sigma = g2 / math.sqrt(max(n_c, 1))
            chi2 += ((g2 - g2_tau_model(TAU_MODEL, tau_s)) / sigma) ** 2
            n_points += 1
        assert chi2 / n_points < 2.0

    def test_dark_counts_increase_singles_not_coincidences(self):
        quiet = basic_config(seed=5)
        noisy = basic_config(seed=5, dark_rate_a=2e6, dark_rate_b=2e6)
        s_quiet = simulate_stream(quiet)
        s_noisy = simulate_stream(noisy)
        for q, n in zip(s_quiet.counts(), s_noisy.counts()):
            assert n > q * 1.7

    def test_segment_bookkeeping(self):
        cfg = basic_config(delay_schedule=((0.0, 1e-3), (2e-12, 1e-3)))
        stream = simulate_stream(cfg)
        parts = stream.split_segments()
        assert len(parts) == 2
        assert parts[0][0] == 0.0
        assert parts[1][0] == 2e-12
        total = sum(len(sub) for _, sub in parts)
        assert total == len(stream)


class TestStreamIO:
    def test_text_round_trip(self, tmp_path):
        stream = simulate_stream(basic_config(delay_schedule=((0.0, 2e-4),)))
        path = tmp_path / "clicks.txt"
        write_stream(stream, path)
        back = read_stream(path)
        assert back.same_records(stream)

    def test_binary_round_trip(self, tmp_path):
        stream = simulate_stream(basic_config(delay_schedule=((0.0, 2e-4),)))
        path = tmp_path / "clicks.tdc"
        write_stream(stream, path, binary=True)
        back = read_stream(path)
        assert back.same_records(stream)

    def test_write_read_write_is_byte_identical(self, tmp_path):
        stream = simulate_stream(basic_config(delay_schedule=((0.0, 1e-4),)))
        p1, p2 = tmp_path / "one.txt", tmp_path / "two.txt"
        write_stream(stream, p1)
        write_stream(read_stream(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_stream_header_only(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("#binwidth_ps=1000\n#duration_ps=0\n#seed=1\n")
        stream = read_stream(path)
        assert len(stream) == 0
        assert stream.meta == StreamMeta(bin_width_ps=1000, duration_ps=0, seed=1)

    def test_malformed_record_names_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("#binwidth_ps=1000\n#duration_ps=10000\n#seed=1\nA 100\nC 200\n")
        with pytest.raises(StreamFormatError, match="line 5"):
            read_stream(path)

    def test_bad_timestamp_names_line(self, tmp_path):
        path = tmp_path / "bad2.txt"
        path.write_text("#binwidth_ps=1000\n#duration_ps=10000\n#seed=1\nA xyz\n")
        with pytest.raises(StreamFormatError, match="line 4"):
            read_stream(path)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "nohdr.txt"
        path.write_text("A 100\n")
        with pytest.raises(StreamFormatError, match="missing required header"):
            read_stream(path)

    def test_negative_seed_header_rejected(self, tmp_path):
        path = tmp_path / "badseed.txt"
        path.write_text("#binwidth_ps=1000\n#duration_ps=10000\n#seed=-5\n")
        with pytest.raises(StreamFormatError, match="seed"):
            read_stream(path)

    def test_nonsense_binwidth_header_rejected(self, tmp_path):
        path = tmp_path / "badbw.txt"
        path.write_text("#binwidth_ps=0\n#duration_ps=10000\n#seed=5\n")
        with pytest.raises(StreamFormatError, match="invalid header"):
            read_stream(path)

    def test_truncated_binary_names_offset(self, tmp_path):
        stream = simulate_stream(basic_config(delay_schedule=((0.0, 1e-4),)))
        path = tmp_path / "trunc.tdc"
        write_stream(stream, path, binary=True)
        raw = path.read_bytes()
        path.write_bytes(raw[:-4])
        with pytest.raises(StreamFormatError, match="byte offset"):
            read_stream(path)

"""Synthetic detector click streams with tunable pair correlations.

Two single-photon detectors A and B are modeled as Bernoulli trials per
timing bin.  Clicks on B are conditioned on nearby clicks on A so that the
empirical coincidence ratio realizes a configured analytic fringe model,
while both singles rates stay exact.  Undamped models correlate same-bin
only; damped models spread the correlation over a kernel covering five
envelope widths.  Generation is event-based (bins are never materialized),
deterministic for a given seed, and streams round-trip through a simple
text format or a compact binary one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .protocol import G2Model, g2_tau_model, g2_zero_model

PS_PER_SECOND = 1_000_000_000_000
MAX_RATE_BIN_PRODUCT = 0.1
BINARY_MAGIC = b"TDC1"

CHANNEL_A = 0
CHANNEL_B = 1
CHANNEL_LETTERS = ("A", "B")


class StreamFormatError(ValueError):
    """A stream file does not parse."""


@dataclass(frozen=True)
class StreamConfig:
    """Recipe for one synthetic acquisition.

    delay_schedule lists (controller delay, dwell seconds) segments played
    back to back; rates are per-channel singles rates of correlated signal,
    dark rates add independent uncorrelated clicks.
    """

    bin_width: float  # seconds, must be an integer number of ps
    rate_a: float  # Hz
    rate_b: float  # Hz
    seed: int
    model: G2Model | None = None
    delay_schedule: tuple[tuple[float, float], ...] = ((0.0, 1.0),)
    dark_rate_a: float = 0.0
    dark_rate_b: float = 0.0

    def __post_init__(self):
        if self.bin_width <= 0:
            raise ValueError(f"bin_width must be > 0, got {self.bin_width}")
        bw_ps = self.bin_width * PS_PER_SECOND
        if abs(bw_ps - round(bw_ps)) > 1e-6 or round(bw_ps) < 1:
            raise ValueError(f"bin_width must be a whole number of picoseconds, got {self.bin_width}")
        for name, rate in (("rate_a", self.rate_a), ("rate_b", self.rate_b),
                           ("dark_rate_a", self.dark_rate_a), ("dark_rate_b", self.dark_rate_b)):
            if rate < 0:
                raise ValueError(f"{name} must be >= 0, got {rate}")
        if not (0 <= self.seed < 2**64):
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        ceiling = 1.0 + (0.0 if self.model is None else self.model.visibility / 2.0)
        worst = max((self.rate_a + self.dark_rate_a), (self.rate_b + self.dark_rate_b) * ceiling)
        if worst * self.bin_width >= MAX_RATE_BIN_PRODUCT:
            raise ValueError(
                "rate * bin_width must stay below "
                f"{MAX_RATE_BIN_PRODUCT} for the per-bin model to hold; got {worst * self.bin_width:.3g}"
            )
        if not self.delay_schedule:
            raise ValueError("delay_schedule must contain at least one (delay, dwell) entry")
        for t_delay, dwell in self.delay_schedule:
            if dwell < 0:
                raise ValueError(f"dwell must be >= 0, got {dwell}")
            n_bins = dwell / self.bin_width
            if abs(n_bins - round(n_bins)) > 1e-6:
                raise ValueError(
                    f"dwell {dwell} is not a whole number of bins of {self.bin_width}"
                )

    @property
    def bin_width_ps(self) -> int:
        return round(self.bin_width * PS_PER_SECOND)

    @property
    def duration(self) -> float:
        return sum(dwell for _, dwell in self.delay_schedule)

    @property
    def duration_ps(self) -> int:
        return self.bin_width_ps * sum(
            round(dwell / self.bin_width) for _, dwell in self.delay_schedule
        )


@dataclass(frozen=True)
class StreamMeta:
    """The provenance fields the file format carries."""

    bin_width_ps: int
    duration_ps: int
    seed: int


@dataclass
class TdcStream:
    """Time-ordered click records of both channels.

    channels holds 0 for A and 1 for B; times_ps are bin-start timestamps.
    Records are sorted by (time, channel) and non-decreasing per channel.
    """

    channels: np.ndarray
    times_ps: np.ndarray
    meta: StreamMeta
    config: StreamConfig | None = field(default=None, compare=False)
    segments: tuple[tuple[float, int, int], ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.uint8)
        self.times_ps = np.asarray(self.times_ps, dtype=np.int64)
        if self.channels.shape != self.times_ps.shape:
            raise ValueError("channels and times_ps must have identical shape")
        if self.times_ps.size:
            if self.times_ps.min() < 0 or self.times_ps.max() >= max(self.meta.duration_ps, 1):
                raise ValueError("timestamps must lie in [0, duration)")
            for ch in (CHANNEL_A, CHANNEL_B):
                t = self.times_ps[self.channels == ch]
                if t.size > 1 and np.any(np.diff(t) < 0):
                    raise ValueError(f"channel {CHANNEL_LETTERS[ch]} timestamps are not sorted")

    def __len__(self) -> int:
        return int(self.channels.size)

    def channel_times(self, channel: int) -> np.ndarray:
        # split once and reuse; repeated scans hit this in a tight loop
        cache = getattr(self, "_channel_cache", None)
        if cache is None:
            cache = {
                CHANNEL_A: self.times_ps[self.channels == CHANNEL_A],
                CHANNEL_B: self.times_ps[self.channels == CHANNEL_B],
            }
            object.__setattr__(self, "_channel_cache", cache)
        return cache[channel]

    def counts(self) -> tuple[int, int]:
        n_a = int(np.count_nonzero(self.channels == CHANNEL_A))
        return n_a, len(self) - n_a

    def same_records(self, other: "TdcStream") -> bool:
        return (
            self.meta == other.meta
            and np.array_equal(self.channels, other.channels)
            and np.array_equal(self.times_ps, other.times_ps)
        )

    def split_segments(self) -> list[tuple[float, "TdcStream"]]:
        """Per-schedule-step sub-streams, timestamps rebased to each window."""
        if not self.segments:
            raise ValueError("stream carries no segment bookkeeping to split on")
        out = []
        for t_delay, start_ps, stop_ps in self.segments:
            mask = (self.times_ps >= start_ps) & (self.times_ps < stop_ps)
            sub = TdcStream(
                channels=self.channels[mask],
                times_ps=self.times_ps[mask] - start_ps,
                meta=StreamMeta(
                    bin_width_ps=self.meta.bin_width_ps,
                    duration_ps=stop_ps - start_ps,
                    seed=self.meta.seed,
                ),
            )
            out.append((t_delay, sub))
        return out


def _distinct_bins(rng: np.random.Generator, n_bins: int, count: int) -> np.ndarray:
    """`count` distinct bin indices, uniform over [0, n_bins), sorted."""
    count = min(count, n_bins)
    if count <= 0:
        return np.empty(0, dtype=np.int64)
    picked = np.unique(rng.integers(0, n_bins, size=count + count // 16 + 16, dtype=np.int64))
    while picked.size < count:
        extra = rng.integers(0, n_bins, size=2 * (count - picked.size) + 16, dtype=np.int64)
        picked = np.union1d(picked, extra)
    if picked.size > count:
        keep = rng.choice(picked.size, size=count, replace=False)
        picked = np.sort(picked[keep])
    return picked


def _is_member(values: np.ndarray, sorted_pool: np.ndarray) -> np.ndarray:
    if sorted_pool.size == 0:
        return np.zeros(values.size, dtype=bool)
    idx = np.searchsorted(sorted_pool, values)
    idx = np.minimum(idx, sorted_pool.size - 1)
    return sorted_pool[idx] == values


def _distinct_bins_excluding(
    rng: np.random.Generator, n_bins: int, count: int, exclude_sorted: np.ndarray
) -> np.ndarray:
    """Distinct bins uniform over the complement of `exclude_sorted`."""
    count = min(count, max(n_bins - exclude_sorted.size, 0))
    if count <= 0:
        return np.empty(0, dtype=np.int64)
    out = np.empty(0, dtype=np.int64)
    while out.size < count:
        cand = np.unique(rng.integers(0, n_bins, size=2 * (count - out.size) + 16, dtype=np.int64))
        cand = cand[~_is_member(cand, exclude_sorted)]
        out = np.union1d(out, cand)
    if out.size > count:
        keep = rng.choice(out.size, size=count, replace=False)
        out = np.sort(out[keep])
    return out


def _grouped_window_sums(
    positions: np.ndarray, centers: np.ndarray, reach: int, table: np.ndarray
) -> np.ndarray:
    """For each center, sum table[delta + reach] over positions within +-reach.

    positions and centers are sorted integer arrays; table has 2*reach+1
    entries indexed by delta = position - center.
    """
    sums = np.zeros(centers.size, dtype=float)
    chunk = 200_000
    for start in range(0, centers.size, chunk):
        c = centers[start : start + chunk]
        lo = np.searchsorted(positions, c - reach)
        hi = np.searchsorted(positions, c + reach + 1)
        counts = hi - lo
        total = int(counts.sum())
        if total == 0:
            continue
        group = np.repeat(np.arange(c.size), counts)
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        flat = np.arange(total) - np.repeat(starts, counts) + np.repeat(lo, counts)
        delta = positions[flat] - c[group]
        sums[start : start + c.size] += np.bincount(
            group, weights=table[delta + reach], minlength=c.size
        )
    return sums


def _segment_same_bin(
    rng: np.random.Generator, n_bins: int, p_a: float, p_b: float, g2: float
) -> tuple[np.ndarray, np.ndarray]:
    """Clicks correlated within one bin: P(B|A) = p_b * g2, singles exact."""
    n_a = rng.binomial(n_bins, p_a) if p_a > 0 else 0
    a_bins = _distinct_bins(rng, n_bins, n_a)
    if p_b <= 0:
        return a_bins, np.empty(0, dtype=np.int64)
    joint = p_b * g2
    if joint >= 1.0:
        raise ValueError(f"p_b * g2 = {joint:.3g} is not a probability; lower the rates")
    b_on = a_bins[rng.random(a_bins.size) < joint]
    off_prob = p_b * (1.0 - p_a * g2) / (1.0 - p_a)
    n_off = rng.binomial(n_bins - a_bins.size, off_prob)
    b_off = _distinct_bins_excluding(rng, n_bins, n_off, a_bins)
    return a_bins, np.sort(np.concatenate([b_on, b_off]))


# B-click probabilities are clipped to CAP * p_b; excursions that far are
# many-sigma events of the kernel sum, so the clipping never biases fits.
_KERNEL_CAP = 3.0


def _segment_kernel(
    rng: np.random.Generator,
    n_bins: int,
    p_a: float,
    p_b: float,
    model: G2Model,
    bin_width: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Clicks correlated over a damped oscillating kernel of +-5 envelope widths."""
    reach = int(math.ceil(5.0 / (model.linewidth * bin_width)))
    # table offset d = (A bin - B bin); the shift estimator pairs clicks with
    # t_A - t_B = tau, so offset d carries the model at tau = d * bin_width
    deltas = np.arange(-reach, reach + 1)
    kernel = (g2_tau_model(model, deltas * bin_width) - 1.0) / (1.0 - p_a)
    mean_shift = p_a * kernel.sum()

    n_a = rng.binomial(n_bins, p_a) if p_a > 0 else 0
    a_bins = _distinct_bins(rng, n_bins, n_a)
    if p_b <= 0:
        return a_bins, np.empty(0, dtype=np.int64)
    envelope_prob = min(_KERNEL_CAP * p_b, 0.5)
    n_candidates = rng.binomial(n_bins, envelope_prob)
    candidates = _distinct_bins(rng, n_bins, n_candidates)
    sums = _grouped_window_sums(a_bins, candidates, reach, kernel)
    prob = p_b * np.clip(1.0 + sums - mean_shift, 0.0, _KERNEL_CAP)
    accept = rng.random(candidates.size) < prob / envelope_prob
    return a_bins, candidates[accept]


def _merge_channel(signal: np.ndarray, dark: np.ndarray) -> np.ndarray:
    if dark.size == 0:
        return signal
    return np.union1d(signal, dark)


def simulate_stream(config: StreamConfig) -> TdcStream:
    """Generate one seeded acquisition following the configured schedule.

    Each schedule segment draws from an independent child seed of
    (seed, segment index), so output does not depend on how segments are
    batched or parallelized.
    """
    bw_ps = config.bin_width_ps
    all_channels: list[np.ndarray] = []
    all_times: list[np.ndarray] = []
    segments: list[tuple[float, int, int]] = []
    offset_bins = 0
    p_a = config.rate_a * config.bin_width
    p_b = config.rate_b * config.bin_width
    for index, (t_delay, dwell) in enumerate(config.delay_schedule):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=config.seed, spawn_key=(index,)))
        )
        n_bins = round(dwell / config.bin_width)
        if n_bins == 0:
            segments.append((t_delay, offset_bins * bw_ps, offset_bins * bw_ps))
            continue
        if config.model is None:
            a_bins, b_bins = _segment_same_bin(rng, n_bins, p_a, p_b, 1.0)
        elif config.model.linewidth is None:
            g2_here = float(g2_zero_model(config.model, t_delay))
            a_bins, b_bins = _segment_same_bin(rng, n_bins, p_a, p_b, g2_here)
        else:
            a_bins, b_bins = _segment_kernel(rng, n_bins, p_a, p_b, config.model, config.bin_width)
        if config.dark_rate_a > 0:
            dark = _distinct_bins(rng, n_bins, rng.binomial(n_bins, config.dark_rate_a * config.bin_width))
            a_bins = _merge_channel(a_bins, dark)
        if config.dark_rate_b > 0:
            dark = _distinct_bins(rng, n_bins, rng.binomial(n_bins, config.dark_rate_b * config.bin_width))
            b_bins = _merge_channel(b_bins, dark)
        for channel, bins in ((CHANNEL_A, a_bins), (CHANNEL_B, b_bins)):
            if bins.size:
                all_channels.append(np.full(bins.size, channel, dtype=np.uint8))
                all_times.append((bins + offset_bins) * bw_ps)
        segments.append((t_delay, offset_bins * bw_ps, (offset_bins + n_bins) * bw_ps))
        offset_bins += n_bins

    if all_times:
        channels = np.concatenate(all_channels)
        times = np.concatenate(all_times)
        order = np.lexsort((channels, times))
        channels, times = channels[order], times[order]
    else:
        channels = np.empty(0, dtype=np.uint8)
        times = np.empty(0, dtype=np.int64)
    meta = StreamMeta(bin_width_ps=bw_ps, duration_ps=offset_bins * bw_ps, seed=config.seed)
    return TdcStream(channels=channels, times_ps=times, meta=meta,
                     config=config, segments=tuple(segments))


def write_stream(stream: TdcStream, path, binary: bool = False) -> None:
    """Persist a stream; the two formats round-trip bit-exactly."""
    if binary:
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            fh.write(np.int64(stream.meta.bin_width_ps).tobytes())
            fh.write(np.int64(stream.meta.duration_ps).tobytes())
            fh.write(np.uint64(stream.meta.seed & (2**64 - 1)).tobytes())
            records = np.empty(len(stream), dtype=[("ch", "u1"), ("t", "<u8")])
            records["ch"] = stream.channels
            records["t"] = stream.times_ps.astype(np.uint64)
            fh.write(records.tobytes())
        return
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"#binwidth_ps={stream.meta.bin_width_ps}\n")
        fh.write(f"#duration_ps={stream.meta.duration_ps}\n")
        fh.write(f"#seed={stream.meta.seed}\n")
        letters = np.array(CHANNEL_LETTERS)
        for chunk_start in range(0, len(stream), 1_000_000):
            sl = slice(chunk_start, chunk_start + 1_000_000)
            lines = [
                f"{letters[c]} {t}\n"
                for c, t in zip(stream.channels[sl], stream.times_ps[sl])
            ]
            fh.write("".join(lines))


def _read_binary(raw: bytes, path) -> TdcStream:
    header_size = len(BINARY_MAGIC) + 8 + 8 + 8
    if len(raw) < header_size:
        raise StreamFormatError(f"{path}: truncated header at byte offset {len(raw)}")
    bw_ps = int(np.frombuffer(raw, dtype=np.int64, count=1, offset=4)[0])
    duration_ps = int(np.frombuffer(raw, dtype=np.int64, count=1, offset=12)[0])
    seed = int(np.frombuffer(raw, dtype=np.uint64, count=1, offset=20)[0])
    if bw_ps < 1 or duration_ps < 0:
        raise StreamFormatError(f"{path}: invalid header (binwidth {bw_ps} ps, duration {duration_ps} ps)")
    body = raw[header_size:]
    record_size = 9
    if len(body) % record_size:
        offset = header_size + (len(body) // record_size) * record_size
        raise StreamFormatError(f"{path}: truncated record at byte offset {offset}")
    records = np.frombuffer(body, dtype=[("ch", "u1"), ("t", "<u8")])
    if records.size and records["ch"].max() > CHANNEL_B:
        bad = int(np.argmax(records["ch"] > CHANNEL_B))
        raise StreamFormatError(f"{path}: record {bad}: invalid channel {records['ch'][bad]}")
    return TdcStream(
        channels=records["ch"].astype(np.uint8),
        times_ps=records["t"].astype(np.int64),
        meta=StreamMeta(bin_width_ps=bw_ps, duration_ps=duration_ps, seed=seed),
    )


def _read_text(raw: bytes, path) -> TdcStream:
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError as exc:
        raise StreamFormatError(f"{path}: not an ascii stream file ({exc})") from None
    headers: dict[str, int] = {}
    channels: list[int] = []
    times: list[int] = []
    letter_to_channel = {"A": CHANNEL_A, "B": CHANNEL_B}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            try:
                headers[key.strip()] = int(value)
            except ValueError:
                raise StreamFormatError(f"{path}: line {lineno}: bad header {line!r}") from None
            continue
        parts = line.split()
        if len(parts) != 2 or parts[0] not in letter_to_channel:
            raise StreamFormatError(f"{path}: line {lineno}: malformed record {line!r}")
        try:
            timestamp = int(parts[1])
        except ValueError:
            raise StreamFormatError(
                f"{path}: line {lineno}: timestamp {parts[1]!r} is not an integer"
            ) from None
        channels.append(letter_to_channel[parts[0]])
        times.append(timestamp)
    for key in ("binwidth_ps", "duration_ps", "seed"):
        if key not in headers:
            raise StreamFormatError(f"{path}: missing required header #{key}=")
    if not (0 <= headers["seed"] < 2**64):
        raise StreamFormatError(f"{path}: seed {headers['seed']} is not an unsigned 64-bit integer")
    if headers["binwidth_ps"] < 1 or headers["duration_ps"] < 0:
        raise StreamFormatError(
            f"{path}: invalid header (binwidth {headers['binwidth_ps']} ps, "
            f"duration {headers['duration_ps']} ps)"
        )
    return TdcStream(
        channels=np.array(channels, dtype=np.uint8),
        times_ps=np.array(times, dtype=np.int64),
        meta=StreamMeta(
            bin_width_ps=headers["binwidth_ps"],
            duration_ps=headers["duration_ps"],
            seed=headers["seed"],
        ),
    )


def read_stream(path) -> TdcStream:
    """Load a stream file, recognizing the binary format by its magic bytes."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[: len(BINARY_MAGIC)] == BINARY_MAGIC:
        return _read_binary(raw, path)
    return _read_text(raw, path)

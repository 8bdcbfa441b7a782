"""Coincidence counting and g2 estimation from click streams.

A coincidence is a timing bin hit by both channels after channel B's
timestamps are shifted by the post-processing delay tau.  The estimator

    g2 = n_coincidence * n_bin / (n_A * n_B)

is 1 for uncorrelated streams; its error bar is Poisson-dominated,
sigma = g2 / sqrt(n_coincidence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fock import SPEED_OF_LIGHT
from .streams import CHANNEL_A, CHANNEL_B, PS_PER_SECOND, TdcStream

X_KINDS = ("t_delay", "tau", "path_length")
_X_UNITS = {"t_delay": "s", "tau": "s", "path_length": "m"}


def _dedupe_sorted(values: np.ndarray) -> np.ndarray:
    if values.size <= 1:
        return values
    keep = np.empty(values.size, dtype=bool)
    keep[0] = True
    np.not_equal(values[1:], values[:-1], out=keep[1:])
    return values[keep]


def _count_common_sorted(a: np.ndarray, b: np.ndarray) -> int:
    """Size of the intersection of two sorted duplicate-free arrays."""
    if a.size == 0 or b.size == 0:
        return 0
    if b.size < a.size:
        a, b = b, a
    idx = np.searchsorted(b, a)
    valid = idx < b.size
    return int(np.count_nonzero(b[idx[valid]] == a[valid]))


@dataclass(frozen=True)
class CoincidenceCounts:
    """Raw tallies of one counting pass."""

    n_coincidence: int
    n_a: int
    n_b: int
    n_bin: int
    bin_width: float  # seconds
    tau: float  # seconds

    def __post_init__(self):
        if self.n_bin <= 0:
            raise ValueError(f"n_bin must be > 0, got {self.n_bin}")
        if self.n_coincidence > min(self.n_a, self.n_b):
            raise ValueError("more coincidences than singles; counting is inconsistent")


def count_coincidences(
    stream: TdcStream,
    tau: float = 0.0,
    bin_width: float | None = None,
    window: tuple[float, float] | None = None,
) -> CoincidenceCounts:
    """Count bins hit by both channels after shifting B by tau.

    bin_width defaults to the stream's own bin width and may only be
    coarser; window is (start, stop) in seconds within the stream duration.
    """
    stream_bw_s = stream.meta.bin_width_ps / PS_PER_SECOND
    if bin_width is None:
        bin_width = stream_bw_s
    if bin_width < stream_bw_s - 1e-15:
        raise ValueError(
            f"analysis bin width {bin_width} is finer than the stream's {stream_bw_s}"
        )
    bw_ps = round(bin_width * PS_PER_SECOND)
    duration_ps = stream.meta.duration_ps
    if window is None:
        w0_ps, w1_ps = 0, duration_ps
    else:
        w0_ps, w1_ps = (round(w * PS_PER_SECOND) for w in window)
        w0_ps = max(w0_ps, 0)
        w1_ps = min(w1_ps, duration_ps)
    if w1_ps <= w0_ps:
        raise ValueError(f"empty counting window: [{w0_ps}, {w1_ps}) ps")
    n_bin = (w1_ps - w0_ps) // bw_ps
    if n_bin <= 0:
        raise ValueError("window is shorter than one analysis bin")
    tau_ps = round(tau * PS_PER_SECOND)
    if abs(tau_ps) >= duration_ps and duration_ps > 0:
        raise ValueError(f"shift {tau} s reaches beyond the stream duration")

    times_a = stream.channel_times(CHANNEL_A)
    times_b = stream.channel_times(CHANNEL_B) + tau_ps
    top_ps = w0_ps + n_bin * bw_ps
    sel_a = times_a[np.searchsorted(times_a, w0_ps) : np.searchsorted(times_a, top_ps)]
    sel_b = times_b[np.searchsorted(times_b, w0_ps) : np.searchsorted(times_b, top_ps)]
    bins_a = _dedupe_sorted((sel_a - w0_ps) // bw_ps)
    bins_b = _dedupe_sorted((sel_b - w0_ps) // bw_ps)
    n_c = _count_common_sorted(bins_a, bins_b)
    return CoincidenceCounts(
        n_coincidence=n_c,
        n_a=int(sel_a.size),
        n_b=int(sel_b.size),
        n_bin=int(n_bin),
        bin_width=bw_ps / PS_PER_SECOND,
        tau=tau_ps / PS_PER_SECOND,
    )


def estimate_g2(counts: CoincidenceCounts) -> tuple[float, float]:
    """(g2, sigma) from raw tallies.

    sigma = g2 / sqrt(n_coincidence); with zero coincidences g2 is 0 and
    sigma is reported at the one-count scale as an upper bound.
    """
    if counts.n_a <= 0 or counts.n_b <= 0:
        raise ValueError("g2 undefined: a channel has zero counts in the window")
    scale = counts.n_bin / (counts.n_a * counts.n_b)
    g2 = counts.n_coincidence * scale
    sigma = scale * math.sqrt(max(counts.n_coincidence, 1))
    return g2, sigma


@dataclass
class G2Curve:
    """g2 samples against a scan variable, with per-point error bars."""

    x: np.ndarray
    g2: np.ndarray
    sigma: np.ndarray
    x_kind: str = "t_delay"

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.g2 = np.asarray(self.g2, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.x_kind not in X_KINDS:
            raise ValueError(f"x_kind must be one of {X_KINDS}, got {self.x_kind!r}")
        if not (self.x.shape == self.g2.shape == self.sigma.shape):
            raise ValueError("x, g2 and sigma must have identical shape")
        if np.any(self.sigma <= 0):
            raise ValueError("every curve point needs a positive sigma")

    @property
    def x_unit(self) -> str:
        return _X_UNITS[self.x_kind]

    def __len__(self) -> int:
        return int(self.x.size)

    def as_path_length(self) -> "G2Curve":
        """Delay scan re-expressed as extra path length (x -> c * t_delay)."""
        if self.x_kind != "t_delay":
            raise ValueError("only delay scans convert to path length")
        return G2Curve(self.x * SPEED_OF_LIGHT, self.g2.copy(), self.sigma.copy(), "path_length")

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"# x_kind={self.x_kind} x_unit={self.x_unit}\n")
            fh.write("x,g2,sigma\n")
            for x, g2, sigma in zip(self.x, self.g2, self.sigma):
                fh.write(f"{float(x)!r},{float(g2)!r},{float(sigma)!r}\n")

    @classmethod
    def from_csv(cls, path) -> "G2Curve":
        x_kind = "t_delay"
        rows = []
        with open(path, "r", encoding="ascii") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    for token in line[1:].split():
                        key, _, value = token.partition("=")
                        if key == "x_kind":
                            x_kind = value
                    continue
                if line.startswith("x,"):
                    continue
                parts = line.split(",")
                if len(parts) != 3:
                    raise ValueError(f"{path}: line {lineno}: expected 3 columns, got {line!r}")
                rows.append(tuple(float(p) for p in parts))
        if not rows:
            raise ValueError(f"{path}: no curve points found")
        data = np.array(rows)
        return cls(data[:, 0], data[:, 1], data[:, 2], x_kind)


def scan_delay(
    delay_streams: Sequence[tuple[float, TdcStream]],
    bin_width: float | None = None,
) -> G2Curve:
    """One zero-shift g2 point per controller delay setting."""
    delays = [t for t, _ in delay_streams]
    if len(delays) < 3:
        raise ValueError(f"a delay scan needs >= 3 settings, got {len(delays)}")
    if len(set(delays)) != len(delays):
        raise ValueError("duplicate delay settings in scan")
    xs, g2s, sigmas = [], [], []
    for t_delay, stream in delay_streams:
        counts = count_coincidences(stream, tau=0.0, bin_width=bin_width)
        g2, sigma = estimate_g2(counts)
        xs.append(t_delay)
        g2s.append(g2)
        sigmas.append(sigma)
    return G2Curve(np.array(xs), np.array(g2s), np.array(sigmas), "t_delay")


def _multi_shift_coincidences(
    bins_a: np.ndarray, bins_b: np.ndarray, shifts: np.ndarray
) -> np.ndarray:
    """Coincident-bin counts for many shifts in one pass.

    bins_a and bins_b are sorted duplicate-free; a coincidence at shift s is
    a pair with bins_a - bins_b = s, which is unique per bin, so the pair
    histogram over differences equals the per-shift bin intersections.
    """
    s_min, s_max = int(shifts.min()), int(shifts.max())
    histogram = np.zeros(s_max - s_min + 1, dtype=np.int64)
    chunk = 200_000
    for start in range(0, bins_a.size, chunk):
        a = bins_a[start : start + chunk]
        lo = np.searchsorted(bins_b, a - s_max)
        hi = np.searchsorted(bins_b, a - s_min + 1)
        counts = hi - lo
        total = int(counts.sum())
        if total == 0:
            continue
        group = np.repeat(np.arange(a.size), counts)
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        flat = np.arange(total) - np.repeat(starts, counts) + np.repeat(lo, counts)
        diffs = a[group] - bins_b[flat]
        histogram += np.bincount(diffs - s_min, minlength=histogram.size)
    return histogram[shifts - s_min]


def _scan_tau_fast(stream: TdcStream, taus: list[float]) -> G2Curve | None:
    """All-shifts pass when the taus are whole stream bins and no rebinning
    or windowing is requested; exactly equivalent to the per-tau counter."""
    bw_ps = stream.meta.bin_width_ps
    shifts = []
    for tau in taus:
        shift = tau * PS_PER_SECOND / bw_ps
        if abs(shift - round(shift)) > 1e-9:
            return None
        shifts.append(round(shift))
    shifts = np.array(shifts, dtype=np.int64)
    if int(shifts.max()) - int(shifts.min()) > 50_000_000:
        return None  # difference histogram would be huge; take the per-tau path
    n_bin = stream.meta.duration_ps // bw_ps
    if n_bin <= 0:
        raise ValueError("stream is shorter than one bin")
    if np.any(np.abs(shifts) >= n_bin):
        raise ValueError("shift reaches beyond the stream duration")
    bins_a = _dedupe_sorted(stream.channel_times(CHANNEL_A) // bw_ps)
    bins_b = _dedupe_sorted(stream.channel_times(CHANNEL_B) // bw_ps)
    n_a = stream.channel_times(CHANNEL_A).size
    if n_a == 0 or bins_b.size == 0:
        raise ValueError("g2 undefined: a channel has zero counts in the window")
    n_c = _multi_shift_coincidences(bins_a, bins_b, shifts)
    times_b = stream.channel_times(CHANNEL_B)
    xs, g2s, sigmas = [], [], []
    for shift, n_coinc in zip(shifts, n_c):
        # B singles whose shifted stamps stay inside the acquisition
        lo = np.searchsorted(times_b, -shift * bw_ps)
        hi = np.searchsorted(times_b, (n_bin - shift) * bw_ps)
        n_b = int(hi - lo)
        if n_b == 0:
            raise ValueError("g2 undefined: a channel has zero counts in the window")
        scale = n_bin / (n_a * n_b)
        xs.append(shift * bw_ps / PS_PER_SECOND)
        g2s.append(n_coinc * scale)
        sigmas.append(scale * math.sqrt(max(int(n_coinc), 1)))
    return G2Curve(np.array(xs), np.array(g2s), np.array(sigmas), "tau")


def scan_tau(
    stream: TdcStream,
    taus: Sequence[float],
    bin_width: float | None = None,
) -> G2Curve:
    """g2 against the post-processing shift, all points from one stream."""
    taus = list(taus)
    if not taus:
        raise ValueError("tau list is empty")
    if bin_width is None or round(bin_width * PS_PER_SECOND) == stream.meta.bin_width_ps:
        fast = _scan_tau_fast(stream, taus)
        if fast is not None:
            return fast
    xs, g2s, sigmas = [], [], []
    for tau in taus:
        counts = count_coincidences(stream, tau=tau, bin_width=bin_width)
        g2, sigma = estimate_g2(counts)
        xs.append(counts.tau)
        g2s.append(g2)
        sigmas.append(sigma)
    return G2Curve(np.array(xs), np.array(g2s), np.array(sigmas), "tau")

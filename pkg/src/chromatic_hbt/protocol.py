"""Color-erasure detection stage and the two-detector intensity interferometer.

A single erasure stage is the pipeline

    beamsplit -> pumped conversion -> beamsplit -> bandpass -> detect

which maps a superposition of two input colors onto one output color, so a
click no longer identifies the input wavelength.  Two such stages watching
two sources of different colors recover the interference term in their
coincidence rate; this module computes the exact state-vector amplitudes and
also hosts the analytic fringe models used downstream for data analysis.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from .elements import (
    ArmModes,
    ArmPair,
    ConversionSettings,
    beamsplitter,
    delay_phase_factor,
    evolve,
    phase_delay,
    sfg_unitary,
    spectral_filter,
)
from .fock import (
    ModeRegistry,
    StateVector,
    apply_creation,
    frequency_of_wavelength,
)

COLOR_LABELS = ("f1", "f2", "f3", "f1_shift", "f2_shift")


@dataclass(frozen=True)
class ModeFrequencies:
    """Center frequencies (Hz) of the two inputs, the target, and the two shifted lines."""

    f1: float
    f2: float
    f3: float
    f1_shift: float
    f2_shift: float

    @classmethod
    def from_wavelengths(cls, lambda1_m: float, lambda2_m: float, lambda3_m: float) -> "ModeFrequencies":
        f1 = frequency_of_wavelength(lambda1_m)
        f2 = frequency_of_wavelength(lambda2_m)
        f3 = frequency_of_wavelength(lambda3_m)
        # The "wrong pump" in each waveguide displaces the other color by the
        # complementary pump frequency.
        return cls(f1=f1, f2=f2, f3=f3, f1_shift=f1 + (f3 - f2), f2_shift=f2 + (f3 - f1))

    @classmethod
    def nominal(cls) -> "ModeFrequencies":
        """Default line set: 1064.4 nm and 1063.6 nm inputs, 630.8 nm target."""
        return cls.from_wavelengths(1064.4e-9, 1063.6e-9, 630.8e-9)

    def by_label(self) -> dict[str, float]:
        return {
            "f1": self.f1,
            "f2": self.f2,
            "f3": self.f3,
            "f1_shift": self.f1_shift,
            "f2_shift": self.f2_shift,
        }

    @property
    def delta_f21(self) -> float:
        """Input color difference f2 - f1 in Hz."""
        return self.f2 - self.f1


def _register_arm(registry: ModeRegistry, freqs: ModeFrequencies, prefix: str, branch: str) -> ArmModes:
    by_label = freqs.by_label()
    modes = {
        label: registry.register(f"{prefix}{label}", by_label[label], branch)
        for label in COLOR_LABELS
    }
    return ArmModes(**modes)


def build_erasure_registry(
    freqs: ModeFrequencies | None = None, n_max: int = 2
) -> tuple[ModeRegistry, ArmPair]:
    """Registry for one erasure stage: five colors on each of two arms."""
    freqs = freqs or ModeFrequencies.nominal()
    registry = ModeRegistry(n_max=n_max)
    arm_a = _register_arm(registry, freqs, "a.", "a")
    arm_b = _register_arm(registry, freqs, "b.", "b")
    return registry, ArmPair(arm_a, arm_b)


def build_hbt_registry(
    freqs: ModeFrequencies | None = None, n_max: int = 2
) -> tuple[ModeRegistry, ArmPair, ArmPair]:
    """Registry for the two-detector interferometer: arm pairs for stages A and B."""
    freqs = freqs or ModeFrequencies.nominal()
    registry = ModeRegistry(n_max=n_max)
    arms_a = ArmPair(
        _register_arm(registry, freqs, "A.a.", "a"),
        _register_arm(registry, freqs, "A.b.", "b"),
    )
    arms_b = ArmPair(
        _register_arm(registry, freqs, "B.a.", "a"),
        _register_arm(registry, freqs, "B.b.", "b"),
    )
    return registry, arms_a, arms_b


@dataclass(frozen=True)
class ErasureDetectorConfig:
    """One erasure stage: conversion settings plus the color its bandpass keeps."""

    settings: ConversionSettings
    label: str = "A"
    filter_color: str = "f3"

    @classmethod
    def ideal(cls, label: str = "A") -> "ErasureDetectorConfig":
        return cls(settings=ConversionSettings.ideal(), label=label)

    def is_ideal_tuning(self, tol: float = 1e-12) -> bool:
        """True when theta_31 sits a quarter cycle in (mod full cycles), theta_32 on
        a full cycle, and both conversion phases vanish."""
        s = self.settings
        two_pi = 2.0 * math.pi
        on_quarter = abs(math.remainder(s.theta_31 - math.pi / 2.0, two_pi)) <= tol
        on_full = abs(math.remainder(s.theta_32, two_pi)) <= tol
        return on_quarter and on_full and abs(s.phi_31) <= tol and abs(s.phi_32) <= tol


@dataclass
class ErasureRun:
    """Intermediate and final states of one erasure pipeline pass."""

    stages: dict[str, StateVector]
    detection_amplitude: complex
    discarded_probability: float

    @property
    def detection_probability(self) -> float:
        return abs(self.detection_amplitude) ** 2


def run_erasure_pipeline(
    state: StateVector,
    registry: ModeRegistry,
    arms: ArmPair,
    config: ErasureDetectorConfig,
) -> ErasureRun:
    """Drive a state through one erasure stage, recording each step."""
    pairs = arms.bs_pairs()
    stages = {"input": state}
    state = beamsplitter(state, pairs)
    stages["after_first_beamsplitter"] = state
    state = evolve(state, sfg_unitary(registry, config.settings, arms))
    stages["after_conversion"] = state
    state = beamsplitter(state, pairs)
    stages["after_second_beamsplitter"] = state
    keep = getattr(arms.arm_a, config.filter_color)
    state, discarded = spectral_filter(state, keep, arms.arm_a.all())
    stages["after_filter"] = state
    amplitude = state.amplitude_of({keep: 1})
    return ErasureRun(stages=stages, detection_amplitude=amplitude, discarded_probability=discarded)


def erase_and_detect(
    alpha: complex,
    beta: complex,
    config: ErasureDetectorConfig,
    freqs: ModeFrequencies | None = None,
) -> complex:
    """Detection amplitude of one erasure stage fed alpha*f1 + beta*f2.

    For ideal tuning this equals (alpha + beta) / 2 exactly; in general it is
    (alpha e^{i phi_31} sin(theta_31) + beta e^{i phi_32} cos(theta_32)) / 2.
    """
    if abs(alpha) ** 2 + abs(beta) ** 2 > 1.0 + 1e-9:
        raise ValueError("input weights exceed unit norm: |alpha|^2 + |beta|^2 > 1")
    registry, arms = build_erasure_registry(freqs)
    vacuum = StateVector.vacuum(registry)
    state = apply_creation(vacuum, arms.arm_a.f1).scaled(alpha).plus(
        apply_creation(vacuum, arms.arm_a.f2).scaled(beta)
    )
    return run_erasure_pipeline(state, registry, arms, config).detection_amplitude


def erasure_amplitude_closed_form(alpha: complex, beta: complex, settings: ConversionSettings) -> complex:
    """Closed form of the detection amplitude, for cross-checks and reporting."""
    return 0.5 * (
        alpha * cmath.exp(1j * settings.phi_31) * math.sin(settings.theta_31)
        + beta * cmath.exp(1j * settings.phi_32) * math.cos(settings.theta_32)
    )


@dataclass(frozen=True)
class HbtScenario:
    """Two single-photon sources of different colors watched by two erasure stages.

    alpha weighs the (f1 at A, f2 at B) configuration and beta the swapped
    one.  The path delay acts on everything heading to stage A; paths to
    stage B are fixed.
    """

    alpha: complex
    beta: complex
    detector_a: ErasureDetectorConfig
    detector_b: ErasureDetectorConfig
    t_delay: float = 0.0
    erasure_enabled: bool = True
    freqs: ModeFrequencies = ModeFrequencies.nominal()

    def __post_init__(self):
        norm2 = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm2 - 1.0) > 1e-9:
            raise ValueError(f"|alpha|^2 + |beta|^2 must be 1, got {norm2!r}")

    @classmethod
    def balanced(cls, t_delay: float = 0.0, erasure_enabled: bool = True) -> "HbtScenario":
        s = 1.0 / math.sqrt(2.0)
        return cls(
            alpha=s,
            beta=s,
            detector_a=ErasureDetectorConfig.ideal("A"),
            detector_b=ErasureDetectorConfig.ideal("B"),
            t_delay=t_delay,
            erasure_enabled=erasure_enabled,
        )

    def with_delay(self, t_delay: float) -> "HbtScenario":
        return replace(self, t_delay=t_delay)

    def delayed_weights(self) -> tuple[complex, complex]:
        """Source weights including the phases from the delay on the A path."""
        alpha = self.alpha * delay_phase_factor(self.freqs.f1, self.t_delay)
        beta = self.beta * delay_phase_factor(self.freqs.f2, self.t_delay)
        return alpha, beta


@dataclass(frozen=True)
class HbtCoincidence:
    """Joint-detection content of the final two-photon state.

    With erasure the two configurations feed one interfering amplitude;
    without it they stay orthogonal and only their separate weights survive.
    """

    interfering: bool
    amplitude: complex | None
    components: tuple[complex, complex]

    def probability(self) -> float:
        if self.interfering:
            return abs(self.amplitude) ** 2
        a, b = self.components
        return (abs(a) ** 2 + abs(b) ** 2) / 16.0


def hbt_coincidence_amplitude(scenario: HbtScenario) -> HbtCoincidence:
    """Exact two-photon simulation of the interferometer.

    With erasure enabled the coincidence amplitude is (alpha' + beta') / 4
    where the primes carry the delay phases; with erasure disabled the two
    photon configurations remain distinguishable and never interfere.
    """
    alpha_d, beta_d = scenario.delayed_weights()
    if not scenario.erasure_enabled:
        return HbtCoincidence(interfering=False, amplitude=None, components=(alpha_d, beta_d))

    registry, arms_a, arms_b = build_hbt_registry(scenario.freqs)
    vacuum = StateVector.vacuum(registry)

    def pair_state(color_at_a: str, color_at_b: str) -> StateVector:
        first = apply_creation(vacuum, getattr(arms_a.arm_a, color_at_a))
        return apply_creation(first, getattr(arms_b.arm_a, color_at_b))

    state = pair_state("f1", "f2").scaled(scenario.alpha).plus(
        pair_state("f2", "f1").scaled(scenario.beta)
    )
    state = phase_delay(state, arms_a.arm_a.all(), scenario.t_delay)
    run_a = run_erasure_pipeline(state, registry, arms_a, scenario.detector_a)
    run_b = run_erasure_pipeline(run_a.stages["after_filter"], registry, arms_b, scenario.detector_b)
    final = run_b.stages["after_filter"]
    keep_a = getattr(arms_a.arm_a, scenario.detector_a.filter_color)
    keep_b = getattr(arms_b.arm_a, scenario.detector_b.filter_color)
    amplitude = final.amplitude_of({keep_a: 1, keep_b: 1})
    return HbtCoincidence(interfering=True, amplitude=amplitude, components=(alpha_d, beta_d))


def predicted_g2_curve(scenario: HbtScenario, t_delays: np.ndarray) -> np.ndarray:
    """Coincidence fringe normalized to its own delay average.

    With erasure disabled the curve is exactly flat at 1.
    """
    t_delays = np.asarray(t_delays, dtype=float)
    probs = np.array(
        [hbt_coincidence_amplitude(scenario.with_delay(t)).probability() for t in t_delays]
    )
    if not scenario.erasure_enabled:
        return np.ones_like(probs)
    mean = probs.mean()
    if mean == 0.0:
        return np.ones_like(probs)
    return probs / mean


@dataclass(frozen=True)
class G2Model:
    """Analytic coincidence fringe: g2 = 1 + (v/2) * envelope * cos(phase term).

    Without a linewidth the fringe is scanned against the controller delay at
    `frequency` = the input color difference; with a linewidth it is scanned
    against the post-processing shift tau at `frequency` = the residual output
    color difference, damped by exp(-(linewidth*tau)^2).
    """

    visibility: float
    phase: float
    frequency: float  # Hz
    linewidth: float | None = None  # Hz

    def __post_init__(self):
        if not (0.0 <= self.visibility <= 1.0):
            raise ValueError(f"visibility must lie in [0, 1], got {self.visibility}")
        if self.linewidth is not None and self.linewidth < 0.0:
            raise ValueError(f"linewidth must be >= 0, got {self.linewidth}")

    @property
    def period(self) -> float:
        return 1.0 / self.frequency


def g2_zero_model(model: G2Model, t_delay: float | np.ndarray) -> float | np.ndarray:
    """Zero-shift fringe vs controller delay: 1 + (v/2) cos(phase + 2 pi f t)."""
    arg = model.phase + 2.0 * math.pi * model.frequency * np.asarray(t_delay, dtype=float)
    out = 1.0 + 0.5 * model.visibility * np.cos(arg)
    return float(out) if np.isscalar(t_delay) or np.ndim(t_delay) == 0 else out


def g2_tau_model(model: G2Model, tau: float | np.ndarray) -> float | np.ndarray:
    """Shift fringe: 1 + (v/2) exp(-(linewidth*tau)^2) cos(phase + 2 pi f tau)."""
    if model.linewidth is None:
        raise ValueError("model has no linewidth; use g2_zero_model for delay scans")
    tau_arr = np.asarray(tau, dtype=float)
    envelope = np.exp(-((model.linewidth * tau_arr) ** 2))
    arg = model.phase + 2.0 * math.pi * model.frequency * tau_arr
    out = 1.0 + 0.5 * model.visibility * envelope * np.cos(arg)
    return float(out) if np.isscalar(tau) or np.ndim(tau) == 0 else out


def visibility_from_counts(
    n1a: float, n2a: float, n1b: float, n2b: float, nda: float = 0.0, ndb: float = 0.0
) -> float:
    """Fringe visibility from per-source and stray counts at each detector.

    4*sqrt(n1a*n2a*n1b*n2b) / ((n1a+n2a+nda) * (n1b+n2b+ndb)); bounded by 1,
    degraded by count imbalance and stray counts.
    """
    counts = (n1a, n2a, n1b, n2b, nda, ndb)
    if any(c < 0 for c in counts):
        raise ValueError(f"counts must be >= 0, got {counts}")
    denom_a = n1a + n2a + nda
    denom_b = n1b + n2b + ndb
    if denom_a <= 0 or denom_b <= 0:
        raise ValueError("visibility undefined: a detector has zero total counts")
    return 4.0 * math.sqrt(n1a * n2a * n1b * n2b) / (denom_a * denom_b)

"""Elementary optical transformations on truncated Fock states.

Four building blocks: 50-50 beamsplitters, the pumped-waveguide frequency
conversion step, spectral filtering, and a path-delay phase shift.  The
beamsplitter, conversion and delay are all single-photon-sector unitaries
lifted to the full (multi-photon) state by `evolve`; filtering is a
projection that reports the discarded probability mass.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .fock import (
    FockBasisState,
    ModeId,
    ModeRegistry,
    StateVector,
    _pruned,
)

UNITARITY_TOL = 1e-12


@dataclass(frozen=True)
class ConversionSettings:
    """Strengths and phases of the four pumped conversion processes.

    Each process mixes one mode pair: on arm "a" the pair (f1, f3) at rate
    xi_31 and the pair (f2, f2') at rate xi_2p2; on arm "b" the pair (f2, f3)
    at rate xi_32 and the pair (f1, f1') at rate xi_1p1.  The dimensionless
    interaction angles are theta_ij = interaction_time * xi_ij.
    """

    xi_31: float
    xi_32: float
    xi_2p2: float = 0.0
    xi_1p1: float = 0.0
    phi_31: float = 0.0
    phi_32: float = 0.0
    phi_2p2: float = 0.0
    phi_1p1: float = 0.0
    interaction_time: float = 1.0  # seconds

    def __post_init__(self):
        for name in ("xi_31", "xi_32", "xi_2p2", "xi_1p1"):
            value = getattr(self, name)
            if value < 0 or not math.isfinite(value):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
        if not math.isfinite(self.interaction_time) or self.interaction_time < 0:
            raise ValueError(f"interaction_time must be finite and >= 0, got {self.interaction_time}")

    @property
    def theta_31(self) -> float:
        return self.interaction_time * self.xi_31

    @property
    def theta_32(self) -> float:
        return self.interaction_time * self.xi_32

    @property
    def theta_2p2(self) -> float:
        return self.interaction_time * self.xi_2p2

    @property
    def theta_1p1(self) -> float:
        return self.interaction_time * self.xi_1p1

    @classmethod
    def from_angles(
        cls,
        theta_31: float,
        theta_32: float,
        theta_2p2: float = 2.0 * math.pi,
        theta_1p1: float = 2.0 * math.pi,
        phi_31: float = 0.0,
        phi_32: float = 0.0,
        phi_2p2: float = 0.0,
        phi_1p1: float = 0.0,
        interaction_time: float = 1.0,
    ) -> "ConversionSettings":
        """Build settings from interaction angles (rates follow for the given time)."""
        t = interaction_time
        if t <= 0:
            raise ValueError(f"interaction_time must be > 0 to derive rates, got {t}")
        return cls(
            xi_31=theta_31 / t,
            xi_32=theta_32 / t,
            xi_2p2=theta_2p2 / t,
            xi_1p1=theta_1p1 / t,
            phi_31=phi_31,
            phi_32=phi_32,
            phi_2p2=phi_2p2,
            phi_1p1=phi_1p1,
            interaction_time=t,
        )

    @classmethod
    def ideal(cls) -> "ConversionSettings":
        """Tuning at which both input colors convert fully: theta_31 = pi/2, theta_32 = 2*pi."""
        return cls.from_angles(theta_31=math.pi / 2.0, theta_32=2.0 * math.pi)


@dataclass(frozen=True)
class ArmModes:
    """The five colors of one spatial arm."""

    f1: ModeId
    f2: ModeId
    f3: ModeId
    f1_shift: ModeId
    f2_shift: ModeId

    def all(self) -> tuple[ModeId, ...]:
        return (self.f1, self.f2, self.f3, self.f1_shift, self.f2_shift)


@dataclass(frozen=True)
class ArmPair:
    """Two arms mixed by the beamsplitters of one erasure stage."""

    arm_a: ArmModes
    arm_b: ArmModes

    def bs_pairs(self) -> list[tuple[ModeId, ModeId]]:
        return list(zip(self.arm_a.all(), self.arm_b.all()))

    def all_modes(self) -> tuple[ModeId, ...]:
        return self.arm_a.all() + self.arm_b.all()


@dataclass(frozen=True, eq=False)
class ModeUnitary:
    """Single-photon-sector unitary over all registered modes.

    matrix[j, i] is the amplitude for a photon entering mode i to leave in
    mode j.  Checked to be unitary entrywise at construction.
    """

    registry: ModeRegistry
    matrix: np.ndarray

    def __post_init__(self):
        n = len(self.registry)
        if self.matrix.shape != (n, n):
            raise ValueError(
                f"unitary dimension {self.matrix.shape} does not match registry size {n}"
            )
        deviation = np.abs(self.matrix.conj().T @ self.matrix - np.eye(n)).max()
        if deviation > UNITARITY_TOL:
            raise ValueError(f"matrix is not unitary (max deviation {deviation:.3e})")

    @classmethod
    def identity(cls, registry: ModeRegistry) -> "ModeUnitary":
        return cls(registry, np.eye(len(registry), dtype=complex))


def bs_unitary(registry: ModeRegistry, pairs: list[tuple[ModeId, ModeId]]) -> ModeUnitary:
    """50-50 beamsplitter on each (x, y) pair: x -> (x+y)/sqrt2, y -> (x-y)/sqrt2."""
    seen: set[int] = set()
    for x, y in pairs:
        if x.index == y.index:
            raise ValueError(f"beamsplitter pair must use two distinct modes, got {x.label!r} twice")
        for m in (x, y):
            if m.index in seen:
                raise ValueError(f"mode {m.label!r} appears in more than one beamsplitter pair")
            seen.add(m.index)
    u = np.eye(len(registry), dtype=complex)
    s = 1.0 / math.sqrt(2.0)
    for x, y in pairs:
        u[x.index, x.index] = s
        u[y.index, x.index] = s
        u[x.index, y.index] = s
        u[y.index, y.index] = -s
    return ModeUnitary(registry, u)


def beamsplitter(state: StateVector, pairs: list[tuple[ModeId, ModeId]]) -> StateVector:
    """Apply 50-50 beamsplitters to each listed mode pair simultaneously."""
    return evolve(state, bs_unitary(state.registry, pairs))


def _rotation_block(
    u: np.ndarray, low: ModeId, high: ModeId, keep: float, convert: float, phi: float
) -> None:
    """Write a two-mode mixing block: low -> keep*low + e^{i phi}*convert*high.

    keep and convert must satisfy keep^2 + convert^2 = 1; the conjugate
    column follows from unitarity.
    """
    phase = cmath.exp(1j * phi)
    u[low.index, low.index] = keep
    u[high.index, low.index] = convert * phase
    u[low.index, high.index] = -convert * phase.conjugate()
    u[high.index, high.index] = keep


def sfg_unitary(
    registry: ModeRegistry, settings: ConversionSettings, arms: ArmPair
) -> ModeUnitary:
    """Single-photon unitary of the two pumped waveguides acting on one arm pair.

    The four coupled pairs are disjoint, so the matrix is block 2x2 rotations
    and exactly identity elsewhere.  Conversion amplitudes:

      arm a, f1 -> f3:       e^{i phi_31} * sin(theta_31)
      arm a, f2 -> f2':      e^{i phi_2p2} * sin(theta_2p2)
      arm b, f2 -> f3:       e^{i phi_32} * cos(theta_32)
      arm b, f1 -> f1':      e^{i phi_1p1} * sin(theta_1p1)

    The second waveguide's f2 -> f3 pair is parameterized a quarter cycle
    off the others: it reaches full conversion at theta_32 in {0, 2*pi, ...},
    so the tuning theta_31 = pi/2, theta_32 = 2*pi converts both input
    colors completely.  This convention is fixed package-wide.
    """
    missing = [m.label for m in arms.all_modes() if not (0 <= m.index < len(registry))]
    if missing:
        raise ValueError(f"arm modes not registered in this registry: {missing}")
    u = np.eye(len(registry), dtype=complex)
    a, b = arms.arm_a, arms.arm_b
    _rotation_block(u, a.f1, a.f3, math.cos(settings.theta_31), math.sin(settings.theta_31), settings.phi_31)
    _rotation_block(u, a.f2, a.f2_shift, math.cos(settings.theta_2p2), math.sin(settings.theta_2p2), settings.phi_2p2)
    _rotation_block(u, b.f2, b.f3, math.sin(settings.theta_32), math.cos(settings.theta_32), settings.phi_32)
    _rotation_block(u, b.f1, b.f1_shift, math.cos(settings.theta_1p1), math.sin(settings.theta_1p1), settings.phi_1p1)
    return ModeUnitary(registry, u)


def evolve(state: StateVector, unitary: ModeUnitary) -> StateVector:
    """Second-quantized action of a mode unitary on a truncated Fock state.

    Each occupied basis state is rebuilt from the vacuum with transformed
    creation operators; the ladder factors make this exact for any photon
    number within the truncation.  Norm is preserved to machine precision.
    """
    registry = state.registry
    if unitary.registry is not registry and unitary.registry != registry:
        raise ValueError("unitary dimension/registry does not match the state")
    n_modes = len(registry)
    u = unitary.matrix
    vacuum = FockBasisState(registry.vacuum_occupation())
    out: dict[FockBasisState, complex] = {}
    for basis_state, amp in state.amplitudes.items():
        factor = 1.0
        for n in basis_state.occupation:
            for k in range(2, n + 1):
                factor *= k
        image: dict[FockBasisState, complex] = {vacuum: amp / math.sqrt(factor)}
        for i, n in enumerate(basis_state.occupation):
            for _ in range(n):
                next_image: dict[FockBasisState, complex] = {}
                for s, a in image.items():
                    for j in range(n_modes):
                        coeff = u[j, i]
                        if coeff == 0:
                            continue
                        occ_j = s.occupation[j]
                        target = s.bumped(j)
                        next_image[target] = (
                            next_image.get(target, 0.0) + a * coeff * math.sqrt(occ_j + 1)
                        )
                image = next_image
        for s, a in image.items():
            out[s] = out.get(s, 0.0) + a
    return StateVector(registry, _pruned(out))


def spectral_filter(
    state: StateVector, keep: ModeId, beam: list[ModeId] | tuple[ModeId, ...]
) -> tuple[StateVector, float]:
    """Bandpass on one beam: absorb photons in every beam mode except `keep`.

    Returns the surviving (sub-normalized) state and the discarded
    probability mass.  Post-selection probabilities stay explicit this way.
    """
    if keep.index not in {m.index for m in beam}:
        raise ValueError(f"keep mode {keep.label!r} is not part of the filtered beam")
    blocked = {m.index for m in beam if m.index != keep.index}
    kept: dict[FockBasisState, complex] = {}
    discarded = 0.0
    for basis_state, amp in state.amplitudes.items():
        if any(basis_state.occupation[i] > 0 for i in blocked):
            discarded += abs(amp) ** 2
        else:
            kept[basis_state] = amp
    return StateVector(state.registry, _pruned(kept)), discarded


def delay_phase_factor(frequency: float, t_delay: float) -> complex:
    """Phase e^{-2*pi*i*f*t} one photon of frequency f picks up over a delay t."""
    return cmath.exp(-2j * math.pi * (frequency * t_delay))


def phase_delay(
    state: StateVector, modes: list[ModeId] | tuple[ModeId, ...], t_delay: float
) -> StateVector:
    """Extra path delay on the selected modes.

    Every photon in a selected mode of frequency f acquires the phase
    e^{-2*pi*i*f*t_delay}, so two colors f1, f2 pick up a relative phase of
    2*pi*(f2-f1)*t_delay.
    """
    if not math.isfinite(t_delay):
        raise ValueError(f"t_delay must be finite, got {t_delay}")
    factors = {m.index: delay_phase_factor(m.frequency, t_delay) for m in modes}
    out: dict[FockBasisState, complex] = {}
    for basis_state, amp in state.amplitudes.items():
        for i, n in enumerate(basis_state.occupation):
            if n and i in factors:
                for _ in range(n):
                    amp = amp * factors[i]
        out[basis_state] = amp
    return StateVector(state.registry, _pruned(out))

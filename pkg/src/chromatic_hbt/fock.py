"""Truncated multimode Fock space: modes, basis states, and state vectors.

Every optical mode is a monochromatic line identified by a label, a center
frequency and a spatial branch tag ("a" or "b", the two arms mixed by a
beamsplitter).  States are sparse maps from occupation-number basis states to
complex amplitudes, truncated at a small total photon number (two photons are
enough for intensity interferometry; four are supported for cross-checks).

All objects are treated as immutable values: operations return new states and
never mutate their inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, Mapping

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact

# Amplitudes below this magnitude are dropped after each elementary operation.
# Far below the 1e-12 tolerances used throughout, so pruning never shows up.
PRUNE_TOL = 1e-15

BRANCHES = ("a", "b")


@dataclass(frozen=True)
class ModeId:
    """Handle for one registered optical mode."""

    index: int
    label: str
    frequency: float  # Hz
    branch: str


class ModeRegistry:
    """Ordered collection of modes sharing one truncated Fock space.

    Parameters
    ----------
    n_max:
        Maximum total photon number across all modes (default 2).
    """

    def __init__(self, n_max: int = 2):
        if n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {n_max}")
        self.n_max = int(n_max)
        self._modes: list[ModeId] = []
        self._by_label: dict[str, ModeId] = {}

    def __len__(self) -> int:
        return len(self._modes)

    def __iter__(self) -> Iterator[ModeId]:
        return iter(self._modes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModeRegistry):
            return NotImplemented
        return self.n_max == other.n_max and self._modes == other._modes

    @property
    def modes(self) -> tuple[ModeId, ...]:
        return tuple(self._modes)

    def mode(self, label: str) -> ModeId:
        try:
            return self._by_label[label]
        except KeyError:
            raise KeyError(f"no mode registered under label {label!r}") from None

    def register(self, label: str, frequency: float, branch: str) -> ModeId:
        if label in self._by_label:
            raise ValueError(f"mode label {label!r} is already registered")
        if frequency <= 0:
            raise ValueError(f"mode {label!r}: frequency must be > 0, got {frequency}")
        if branch not in BRANCHES:
            raise ValueError(f"mode {label!r}: branch must be one of {BRANCHES}, got {branch!r}")
        mode = ModeId(index=len(self._modes), label=label, frequency=float(frequency), branch=branch)
        self._modes.append(mode)
        self._by_label[label] = mode
        return mode

    def vacuum_occupation(self) -> tuple[int, ...]:
        return (0,) * len(self._modes)

    def enumerate_basis(self) -> list["FockBasisState"]:
        """All occupation states with total photon number <= n_max.

        Ordering is lexicographic in the occupation tuple and therefore
        deterministic for a fixed registry.
        """
        states: list[FockBasisState] = []

        def extend(prefix: tuple[int, ...], remaining: int, budget: int) -> None:
            if remaining == 0:
                states.append(FockBasisState(prefix))
                return
            for n in range(budget + 1):
                extend(prefix + (n,), remaining - 1, budget - n)

        extend((), len(self._modes), self.n_max)
        states.sort(key=lambda s: s.occupation)
        return states


def register_mode(registry: ModeRegistry, label: str, frequency: float, branch: str) -> ModeId:
    """Register a new mode; rejects duplicate labels naming the conflict."""
    return registry.register(label, frequency, branch)


@dataclass(frozen=True)
class FockBasisState:
    """Occupation-number basis state, one entry per registered mode."""

    occupation: tuple[int, ...]

    def total(self) -> int:
        return sum(self.occupation)

    def bumped(self, index: int, delta: int = 1) -> "FockBasisState":
        occ = list(self.occupation)
        occ[index] += delta
        return FockBasisState(tuple(occ))

    def __str__(self) -> str:
        return "|" + ",".join(str(n) for n in self.occupation) + ">"


@dataclass(frozen=True, eq=False)
class StateVector:
    """Sparse complex amplitudes over the truncated Fock basis."""

    registry: ModeRegistry
    amplitudes: Mapping[FockBasisState, complex]

    @classmethod
    def vacuum(cls, registry: ModeRegistry) -> "StateVector":
        return cls(registry, {FockBasisState(registry.vacuum_occupation()): 1.0 + 0.0j})

    @classmethod
    def zero(cls, registry: ModeRegistry) -> "StateVector":
        return cls(registry, {})

    def amplitude(self, state: FockBasisState) -> complex:
        return complex(self.amplitudes.get(state, 0.0))

    def amplitude_of(self, counts: Mapping[ModeId, int]) -> complex:
        """Amplitude of the basis state with the given per-mode photon counts."""
        occ = list(self.registry.vacuum_occupation())
        for mode, n in counts.items():
            occ[mode.index] = n
        return self.amplitude(FockBasisState(tuple(occ)))

    def norm2(self) -> float:
        return sum(abs(a) ** 2 for a in self.amplitudes.values())

    def norm(self) -> float:
        return self.norm2() ** 0.5

    def scaled(self, factor: complex) -> "StateVector":
        return StateVector(self.registry, {s: factor * a for s, a in self.amplitudes.items()})

    def plus(self, other: "StateVector") -> "StateVector":
        _check_same_registry(self, other)
        out = dict(self.amplitudes)
        for s, a in other.amplitudes.items():
            out[s] = out.get(s, 0.0) + a
        return StateVector(self.registry, _pruned(out))

    def items_sorted(self) -> list[tuple[FockBasisState, complex]]:
        return sorted(self.amplitudes.items(), key=lambda kv: kv[0].occupation)

    def allclose(self, other: "StateVector", tol: float = 1e-12) -> bool:
        _check_same_registry(self, other)
        keys = set(self.amplitudes) | set(other.amplitudes)
        return all(abs(self.amplitude(k) - other.amplitude(k)) <= tol for k in keys)

    def to_json_dict(self) -> dict:
        return {
            "registry": [
                {"label": m.label, "frequency": m.frequency, "branch": m.branch}
                for m in self.registry
            ],
            "n_max": self.registry.n_max,
            "amplitudes": [
                {"occ": list(s.occupation), "re": a.real, "im": a.imag}
                for s, a in self.items_sorted()
            ],
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_json_dict(), indent=indent, sort_keys=False)

    @classmethod
    def from_json_dict(cls, data: dict) -> "StateVector":
        registry = ModeRegistry(n_max=data["n_max"])
        for entry in data["registry"]:
            registry.register(entry["label"], entry["frequency"], entry["branch"])
        amps = {
            FockBasisState(tuple(e["occ"])): complex(e["re"], e["im"])
            for e in data["amplitudes"]
        }
        return cls(registry, amps)

    @classmethod
    def from_json(cls, text: str) -> "StateVector":
        return cls.from_json_dict(json.loads(text))


def _pruned(amps: dict[FockBasisState, complex]) -> dict[FockBasisState, complex]:
    return {s: a for s, a in amps.items() if abs(a) >= PRUNE_TOL}


def _check_same_registry(s1: StateVector, s2: StateVector) -> None:
    if s1.registry is not s2.registry and s1.registry != s2.registry:
        raise ValueError("states belong to different mode registries")


def apply_creation(state: StateVector, mode: ModeId) -> StateVector:
    """Apply the bosonic creation operator for `mode`.

    Each basis state gains one photon in `mode` and its amplitude is scaled
    by sqrt(n + 1).  Raises if any resulting state would exceed the
    registry's photon-number truncation.
    """
    registry = state.registry
    if not (0 <= mode.index < len(registry)):
        raise ValueError(f"mode {mode.label!r} does not belong to this registry")
    out: dict[FockBasisState, complex] = {}
    for basis_state, amp in state.amplitudes.items():
        if basis_state.total() + 1 > registry.n_max:
            raise ValueError(
                f"creation on {mode.label!r} overflows truncation "
                f"n_max={registry.n_max} from basis state {basis_state}"
            )
        n = basis_state.occupation[mode.index]
        target = basis_state.bumped(mode.index)
        out[target] = out.get(target, 0.0) + amp * (n + 1) ** 0.5
    return StateVector(registry, _pruned(out))


def inner_product(s1: StateVector, s2: StateVector) -> complex:
    """<s1|s2>, conjugate-linear in the first argument."""
    _check_same_registry(s1, s2)
    if len(s1.amplitudes) > len(s2.amplitudes):
        return complex(sum(a2 * s1.amplitude(k).conjugate() for k, a2 in s2.amplitudes.items()))
    return complex(sum(s1.amplitudes[k].conjugate() * s2.amplitude(k) for k in s1.amplitudes))


def project_single_photon(state: StateVector, mode: ModeId) -> complex:
    """Amplitude of the basis state with exactly one photon, sitting in `mode`."""
    if not (0 <= mode.index < len(state.registry)):
        raise ValueError(f"mode {mode.label!r} does not belong to this registry")
    occ = list(state.registry.vacuum_occupation())
    occ[mode.index] = 1
    return state.amplitude(FockBasisState(tuple(occ)))


def single_photon(registry: ModeRegistry, mode: ModeId, amplitude: complex = 1.0) -> StateVector:
    """Convenience: amplitude * a_mode^dagger |vacuum>."""
    return apply_creation(StateVector.vacuum(registry), mode).scaled(amplitude)


def frequency_of_wavelength(wavelength_m: float) -> float:
    """Center frequency in Hz of a vacuum wavelength in meters."""
    if wavelength_m <= 0:
        raise ValueError(f"wavelength must be > 0, got {wavelength_m}")
    return SPEED_OF_LIGHT / wavelength_m

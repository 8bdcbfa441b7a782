import math

import numpy as np
import pytest

from chromatic_hbt.fock import (
    SPEED_OF_LIGHT,
    FockBasisState,
    ModeRegistry,
    StateVector,
    apply_creation,
    frequency_of_wavelength,
    inner_product,
    project_single_photon,
    register_mode,
    single_photon,
)


def two_mode_registry(n_max=2):
    reg = ModeRegistry(n_max=n_max)
    m1 = reg.register("g1", frequency_of_wavelength(1064.4e-9), "a")
    m2 = reg.register("g2", frequency_of_wavelength(1063.6e-9), "a")
    return reg, m1, m2


def random_state(reg, rng):
    basis = reg.enumerate_basis()
    amps = rng.normal(size=len(basis)) + 1j * rng.normal(size=len(basis))
    amps /= np.linalg.norm(amps)
    return StateVector(reg, {b: complex(a) for b, a in zip(basis, amps)})


class TestRegistry:
    def test_empty_registry_has_size_zero(self):
        assert len(ModeRegistry()) == 0

    def test_register_returns_fresh_handle(self):
        reg = ModeRegistry()
        mode = register_mode(reg, "g1", frequency_of_wavelength(1064.4e-9), "a")
        assert mode.index == 0
        assert mode.label == "g1"
        # f = c / lambda for 1064.4 nm
        assert mode.frequency == pytest.approx(SPEED_OF_LIGHT / 1064.4e-9)
        assert mode.frequency == pytest.approx(281.654e12, rel=1e-4)
        assert len(reg) == 1

    def test_duplicate_label_rejected_naming_label(self):
        reg = ModeRegistry()
        register_mode(reg, "g1", 2.8e14, "a")
        with pytest.raises(ValueError, match="g1"):
            register_mode(reg, "g1", 2.9e14, "b")

    def test_invalid_frequency_and_branch(self):
        reg = ModeRegistry()
        with pytest.raises(ValueError):
            register_mode(reg, "bad", -1.0, "a")
        with pytest.raises(ValueError):
            register_mode(reg, "bad", 1.0e14, "c")

    def test_basis_enumeration_is_deterministic(self):
        reg, _, _ = two_mode_registry()
        basis = reg.enumerate_basis()
        assert basis == reg.enumerate_basis()
        assert FockBasisState((0, 0)) in basis
        # total photon number <= 2 over two modes: 6 states
        assert len(basis) == 6
        assert all(b.total() <= 2 for b in basis)


class TestCreation:
    def test_vacuum_ladder(self):
        reg, m1, _ = two_mode_registry()
        state = apply_creation(StateVector.vacuum(reg), m1)
        assert state.amplitude_of({m1: 1}) == pytest.approx(1.0)

    def test_double_creation_sqrt2(self):
        reg, m1, _ = two_mode_registry()
        state = apply_creation(apply_creation(StateVector.vacuum(reg), m1), m1)
        assert state.amplitude_of({m1: 2}) == pytest.approx(math.sqrt(2.0))

    def test_superposition_norm(self):
        # |alpha|^2 + |beta|^2 = 1 keeps the one-photon state normalized
        reg, m1, m2 = two_mode_registry()
        alpha, beta = 0.6, 0.8j
        state = single_photon(reg, m1, alpha).plus(single_photon(reg, m2, beta))
        assert state.norm2() == pytest.approx(1.0, abs=1e-15)

    def test_ladder_scaling_brute_force(self):
        # sqrt(n+1) scaling on every basis state, up to n_max = 4
        reg = ModeRegistry(n_max=4)
        m1 = reg.register("m1", 1e14, "a")
        m2 = reg.register("m2", 1e14, "b")
        for basis_state in reg.enumerate_basis():
            if basis_state.total() + 1 > reg.n_max:
                continue
            src = StateVector(reg, {basis_state: 1.0})
            out = apply_creation(src, m1)
            n = basis_state.occupation[m1.index]
            assert out.amplitude(basis_state.bumped(m1.index)) == pytest.approx(math.sqrt(n + 1))

    def test_truncation_overflow_names_state(self):
        reg, m1, _ = two_mode_registry(n_max=2)
        two = apply_creation(apply_creation(StateVector.vacuum(reg), m1), m1)
        with pytest.raises(ValueError, match=r"\|2,0>"):
            apply_creation(two, m1)


class TestInnerProduct:
    def test_vacuum_normalized(self):
        reg, _, _ = two_mode_registry()
        vac = StateVector.vacuum(reg)
        assert inner_product(vac, vac) == pytest.approx(1.0)

    def test_orthogonal_modes(self):
        reg, m1, m2 = two_mode_registry()
        assert inner_product(single_photon(reg, m1), single_photon(reg, m2)) == 0

    def test_one_photon_superposition_normalized(self):
        reg, m1, m2 = two_mode_registry()
        alpha, beta = 1 / math.sqrt(3), math.sqrt(2 / 3) * 1j
        psi = single_photon(reg, m1, alpha).plus(single_photon(reg, m2, beta))
        assert inner_product(psi, psi) == pytest.approx(1.0)

    def test_conjugate_symmetry_and_positivity(self):
        reg, _, _ = two_mode_registry()
        rng = np.random.default_rng(7)
        for _ in range(50):
            s1, s2 = random_state(reg, rng), random_state(reg, rng)
            lhs = inner_product(s1, s2)
            rhs = inner_product(s2, s1)
            assert lhs == pytest.approx(rhs.conjugate(), abs=1e-14)
            self_ip = inner_product(s1, s1)
            assert self_ip.imag == pytest.approx(0.0, abs=1e-14)
            assert self_ip.real >= 0.0

    def test_registry_mismatch_rejected(self):
        reg1, _, _ = two_mode_registry()
        reg2 = ModeRegistry()
        reg2.register("other", 1e14, "a")
        with pytest.raises(ValueError, match="registries"):
            inner_product(StateVector.vacuum(reg1), StateVector.vacuum(reg2))


class TestProjection:
    def test_project_own_mode(self):
        reg, m1, _ = two_mode_registry()
        assert project_single_photon(single_photon(reg, m1), m1) == pytest.approx(1.0)

    def test_project_absent_component_is_zero(self):
        # two-color input state has no component on the third color
        reg, m1, m2 = two_mode_registry()
        m3 = reg.register("g3", frequency_of_wavelength(630.8e-9), "a")
        psi = single_photon(reg, m1, 0.6).plus(single_photon(reg, m2, 0.8))
        assert project_single_photon(psi, m3) == 0.0


class TestSerialization:
    def test_round_trip_bit_exact(self):
        reg, m1, m2 = two_mode_registry()
        rng = np.random.default_rng(13)
        state = random_state(reg, rng)
        text = state.to_json()
        back = StateVector.from_json(text)
        assert back.registry == state.registry
        assert back.amplitudes == dict(state.amplitudes)
        # serializing again reproduces the exact same bytes
        assert back.to_json() == text

    def test_serialization_order_is_stable(self):
        reg, m1, m2 = two_mode_registry()
        a = single_photon(reg, m1, 0.6).plus(single_photon(reg, m2, 0.8))
        b = single_photon(reg, m2, 0.8).plus(single_photon(reg, m1, 0.6))
        assert a.to_json() == b.to_json()

    def test_pruning_drops_negligible_amplitudes(self):
        reg, m1, m2 = two_mode_registry()
        tiny = single_photon(reg, m2, 1e-16)
        state = single_photon(reg, m1, 1.0).plus(tiny)
        occupied = {s for s in state.amplitudes}
        assert FockBasisState((0, 1)) not in occupied

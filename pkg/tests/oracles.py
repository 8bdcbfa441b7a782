"""Independent brute-force references used to cross-check the package.

Everything here is deliberately written against the obvious definitions
(full-basis matrices, series-summed exponentials, pairwise loops) rather
than reusing any package shortcut, so agreement is meaningful.
"""

from __future__ import annotations

import math

import numpy as np

from chromatic_hbt.fock import FockBasisState, ModeRegistry, StateVector


def basis_list(registry: ModeRegistry) -> list[FockBasisState]:
    return registry.enumerate_basis()


def state_to_vector(state: StateVector, basis: list[FockBasisState]) -> np.ndarray:
    index = {b: i for i, b in enumerate(basis)}
    vec = np.zeros(len(basis), dtype=complex)
    for s, a in state.amplitudes.items():
        vec[index[s]] = a
    return vec


def vector_to_state(vec: np.ndarray, registry: ModeRegistry, basis: list[FockBasisState]) -> StateVector:
    return StateVector(registry, {b: complex(vec[i]) for i, b in enumerate(basis) if vec[i] != 0})


def lift_quadratic_hamiltonian(h: np.ndarray, basis: list[FockBasisState]) -> np.ndarray:
    """Matrix of sum_ij h[i,j] a_i^dag a_j on the truncated number basis."""
    n_modes = h.shape[0]
    index = {b: k for k, b in enumerate(basis)}
    big = np.zeros((len(basis), len(basis)), dtype=complex)
    for col, b in enumerate(basis):
        occ = b.occupation
        for j in range(n_modes):
            if occ[j] == 0 or not np.any(h[:, j]):
                continue
            for i in range(n_modes):
                if h[i, j] == 0:
                    continue
                lowered = list(occ)
                amp = math.sqrt(lowered[j])
                lowered[j] -= 1
                amp *= math.sqrt(lowered[i] + 1)
                lowered[i] += 1
                big[index[FockBasisState(tuple(lowered))], col] += h[i, j] * amp
    return big


def expm_series(m: np.ndarray, terms: int = 60) -> np.ndarray:
    """Matrix exponential by scaled-and-squared Taylor series."""
    norm = np.abs(m).sum(axis=1).max()
    squarings = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0 else 0
    scaled = m / (2**squarings)
    out = np.eye(m.shape[0], dtype=complex)
    term = np.eye(m.shape[0], dtype=complex)
    for k in range(1, terms + 1):
        term = term @ scaled / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


def quadratic_mixer_generator(
    n_modes: int, blocks: list[tuple[int, int, float, float]]
) -> np.ndarray:
    """Hermitian single-particle generator for disjoint two-mode mixers.

    Each block (low, high, angle, phase) contributes the anti-Hermitian-style
    coupling whose exponential rotates low -> cos(angle) low +
    e^{i phase} sin(angle) high.
    """
    h = np.zeros((n_modes, n_modes), dtype=complex)
    for low, high, angle, phase in blocks:
        h[high, low] += 1j * angle * np.exp(1j * phase)
        h[low, high] += -1j * angle * np.exp(-1j * phase)
    return h


def evolve_by_expm(state: StateVector, h_single: np.ndarray) -> StateVector:
    """Evolve a state by exp(-i H) with H the second-quantized lift of h_single."""
    basis = basis_list(state.registry)
    big_h = lift_quadratic_hamiltonian(h_single, basis)
    u = expm_series(-1j * big_h)
    vec = u @ state_to_vector(state, basis)
    return vector_to_state(vec, state.registry, basis)


def pairwise_coincidences(
    times_a: np.ndarray, times_b: np.ndarray, tau_ps: int, bin_width_ps: int
) -> int:
    """Count bins hit by both channels after shifting B, by explicit pair loops."""
    hit_bins = set()
    for ta in times_a:
        for tb in times_b:
            if ta // bin_width_ps == (tb + tau_ps) // bin_width_ps:
                hit_bins.add(ta // bin_width_ps)
    return len(hit_bins)

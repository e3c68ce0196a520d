"""Independent oracles used by the test suite.

Closed forms and brute-force checks kept apart from the production code
paths (they share only the hilbert kernel), so agreement with the library
is meaningful.
"""

from __future__ import annotations

import numpy as np


def damped_cavity_oracle(kappa: float, t, tau=0.0) -> dict:
    """Cavity initialized in |1> decaying at rate kappa.

    n(t) = exp(-kappa t); |g1(t, t+tau)| = exp(-kappa (t + tau/2));
    G2(t, tau) = 0 (a single photon cannot coincide with itself).
    """
    t = np.asarray(t, dtype=float)
    tau = np.asarray(tau, dtype=float)
    return {
        "n": np.exp(-kappa * t),
        "g1": np.exp(-kappa * (t + tau / 2.0)),
        "G2": np.zeros(np.broadcast(t, tau).shape),
    }


def damped_cavity_efficiency(kappa: float, window: tuple[float, float]) -> float:
    """kappa * integral of n(t) over the window for the initial |1> state."""
    t0, t1 = window
    return float(np.exp(-kappa * t0) - np.exp(-kappa * t1))


def diagonal_spectrum_oracle(delta1: float, delta2: float, n_max: int,
                             u1: float = 0.0, u2: float = 0.0,
                             omega: float = 1.0) -> np.ndarray:
    """Eigenvalues of the g = 0 Hamiltonian: diagonal in the product basis.

    E(n, s1, s2) = n omega + s1 delta1 + s2 delta2 + n (s1 u1 + s2 u2)
    with s = +-1.
    """
    vals = []
    for n in range(n_max + 1):
        for s1 in (-1, 1):
            for s2 in (-1, 1):
                vals.append(n * omega + s1 * delta1 + s2 * delta2
                            + n * (s1 * u1 + s2 * u2))
    return np.sort(np.array(vals))


def svd_rank_oracle(matrix: np.ndarray, threshold: float = 1e-10) -> int:
    """Rank = number of singular values above threshold * ||M||_2."""
    m = np.asarray(matrix, dtype=float)
    if not m.any():
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > threshold * s[0]))


def svd_nullspace_oracle(matrix: np.ndarray, threshold: float = 1e-10):
    """Orthonormal nullspace basis from the SVD (columns)."""
    m = np.asarray(matrix, dtype=float)
    u, s, vt = np.linalg.svd(m)
    keep = np.ones(vt.shape[0], dtype=bool)
    keep[: len(s)] = s <= threshold * max(s[0], 1e-300)
    return vt[keep].T


def rabi_flop_population(omega_rabi: float, duration: float) -> float:
    """Excited-state population of a resonantly driven two-level system.

    For the co-rotating drive (Omega/2)(s+ e^{-i w t} + h.c.) on resonance
    the flip is exact: P = sin^2(Omega t / 2).
    """
    return float(np.sin(omega_rabi * duration / 2.0) ** 2)


def coherent_state_vector(space, alpha: complex) -> np.ndarray:
    """Truncated coherent state in the cavity factor, qubits down."""
    from math import factorial

    vec = np.zeros(space.dim, dtype=complex)
    for n in range(space.fock_cutoff + 1):
        vec[space.index(n, 0, 0)] = alpha ** n / np.sqrt(factorial(n))
    return vec / np.linalg.norm(vec)


def finite_difference_hdot(schedule, space, t: float, eps: float = 1e-6):
    """Central finite-difference dH/dt along a schedule (cross-check)."""
    hp = schedule.hamiltonian_at(space, t + eps).matrix
    hm = schedule.hamiltonian_at(space, t - eps).matrix
    return (hp - hm) / (2.0 * eps)

"""One-photon dark states and the quasi-exact solution procedure.

On the manifold delta1+delta2 = omega, g1 = g2 = g the models admit
coupling-independent eigenstates containing at most one photon:

    Rabi / Rabi-Stark (E = omega):
        (delta1-delta2+u1-u2)|0,up,up> + g(|1,dn,up> - |1,up,dn>)
    JC (E = 0):
        (delta1-delta2)|1,dn,dn> + g(|0,dn,up> - |0,up,dn>)

The existence check runs the even-parity one-photon ansatz through the
eigenvalue equation: six projection rows in four coefficients, reduced by
elementary row transformations; a nontrivial nullspace appears exactly on
the manifold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import QuantumState, SystemSpace, pauli, annihilator, sigma_minus
from .models import MANIFOLD_TOL, ModelParams

__all__ = [
    "DarkState",
    "AnsatzMatrix",
    "ManifoldError",
    "dark_state",
    "dark_energy",
    "ansatz_matrix",
    "quasi_exact_solve",
    "row_reduce",
    "dark_matrix_element",
    "transfer_generator",
]

RANK_TOL = 1e-10  # relative to the spectral norm


class ManifoldError(ValueError):
    """Parameters violate delta1+delta2 = omega or g1 = g2."""


@dataclass(frozen=True)
class DarkState:
    """Closed-form dark state with its unnormalized coefficients."""

    coeff_up_up: float      # delta1-delta2 (+u1-u2 with Stark terms)
    coeff_singlet: float    # the common coupling g
    kind: str
    energy: float
    state: QuantumState


def _require_manifold(params: ModelParams):
    if not params.on_dark_manifold:
        raise ManifoldError(
            "dark states require delta1+delta2 = omega and g1 = g2; got "
            f"delta1+delta2 = {params.delta1 + params.delta2}, "
            f"g1 = {params.g1}, g2 = {params.g2}")


def dark_energy(params: ModelParams) -> float:
    """E = omega for Rabi/Rabi-Stark, 0 for the JC zero-excitation line."""
    return 0.0 if params.kind == "jc" else params.omega


def dark_state(space: SystemSpace, params: ModelParams) -> DarkState:
    """Normalized closed-form dark state on the manifold."""
    _require_manifold(params)
    g = params.g1
    if params.kind == "jc":
        # c0|1,dn,dn> + g|0,dn,up> - g|0,up,dn>
        c0 = params.delta1 - params.delta2
        vec = np.zeros(space.dim, dtype=complex)
        vec[space.index(1, 0, 0)] = c0
        vec[space.index(0, 0, 1)] = g
        vec[space.index(0, 1, 0)] = -g
    else:
        c0 = params.delta1 - params.delta2 + params.u1 - params.u2
        vec = np.zeros(space.dim, dtype=complex)
        vec[space.index(0, 1, 1)] = c0
        vec[space.index(1, 0, 1)] = g
        vec[space.index(1, 1, 0)] = -g
    nrm = np.linalg.norm(vec)
    if nrm < MANIFOLD_TOL:
        raise ManifoldError("dark-state coefficients vanish identically "
                            "(need delta1 != delta2 or g != 0)")
    return DarkState(
        coeff_up_up=float(c0),
        coeff_singlet=float(g),
        kind=params.kind,
        energy=dark_energy(params),
        state=QuantumState(space, "pure", vec / nrm, validate=False),
    )


# ---------------------------------------------------------------------------
# quasi-exact existence check (even-parity one-photon ansatz)

ANSATZ_ROWS = ("0uu", "0dd", "1du", "1ud", "2uu", "2dd")
ANSATZ_COLS = ("c0: |0uu>", "c1: |0dd>", "c2: |1du>", "c3: |1ud>")


@dataclass(frozen=True)
class AnsatzMatrix:
    """Projection rows of (H - E) applied to the one-photon ansatz."""

    matrix: np.ndarray  # (6, 4) real
    params: ModelParams
    energy: float

    @property
    def row_labels(self):
        return ANSATZ_ROWS

    @property
    def col_labels(self):
        return ANSATZ_COLS


def ansatz_matrix(params: ModelParams, energy: float) -> AnsatzMatrix:
    """The 6x4 system M c = 0 for |psi> = c0|0uu> + c1|0dd> + c2|1du> + c3|1ud>."""
    d1, d2 = params.delta1, params.delta2
    g1, g2 = params.g1, params.g2
    u1 = params.u1 if params.kind == "rabi_stark" else 0.0
    u2 = params.u2 if params.kind == "rabi_stark" else 0.0
    om, e = params.omega, energy
    r2 = np.sqrt(2.0)
    m = np.array([
        [d1 + d2 - e,        0.0,                g1,   g2],
        [0.0,                -d1 - d2 - e,       g2,   g1],
        [g1,                 g2,                 om - d1 + d2 - u1 + u2 - e, 0.0],
        [g2,                 g1,                 0.0,  om + d1 - d2 + u1 - u2 - e],
        [0.0,                0.0,                r2 * g1, r2 * g2],
        [0.0,                0.0,                r2 * g2, r2 * g1],
    ])
    return AnsatzMatrix(matrix=m, params=params, energy=float(energy))


def row_reduce(m: np.ndarray, rel_tol: float = RANK_TOL):
    """Gaussian elimination with partial pivoting.

    Returns (rank, pivot columns, reduced matrix).  Pivots smaller than
    rel_tol * ||M||_2 are treated as zero, so the rank decision is
    scale-free.
    """
    a = np.array(m, dtype=float, copy=True)
    nrow, ncol = a.shape
    norm = np.linalg.norm(a, 2)
    if norm == 0.0:
        return 0, [], a
    thresh = rel_tol * norm
    rank = 0
    pivots = []
    for col in range(ncol):
        p = rank + np.argmax(np.abs(a[rank:, col]))
        if abs(a[p, col]) <= thresh:
            continue
        a[[rank, p]] = a[[p, rank]]
        a[rank] /= a[rank, col]
        for i in range(nrow):
            if i != rank and a[i, col] != 0.0:
                a[i] -= a[i, col] * a[rank]
        pivots.append(col)
        rank += 1
        if rank == nrow:
            break
    return rank, pivots, a


def quasi_exact_solve(params: ModelParams, energy: float,
                      rel_tol: float = RANK_TOL) -> np.ndarray | None:
    """Nullspace vector of the ansatz system, or None when rank(M) = 4.

    On the manifold with E = omega this returns a vector proportional to
    (delta1-delta2+u1-u2, 0, g, -g); off the manifold the system has full
    column rank and no one-photon solution exists.
    """
    m = ansatz_matrix(params, energy).matrix
    rank, pivots, red = row_reduce(m, rel_tol)
    if rank >= m.shape[1]:
        return None
    free = [c for c in range(m.shape[1]) if c not in pivots]
    # back-substitute for the first free column
    vec = np.zeros(m.shape[1])
    fc = free[-1]
    vec[fc] = 1.0
    for r, pc in reversed(list(enumerate(pivots))):
        vec[pc] = -red[r, fc]
    nrm = np.linalg.norm(vec)
    return vec / nrm


# ---------------------------------------------------------------------------
# the vanishing transfer matrix element

def transfer_generator(space: SystemSpace, params: ModelParams,
                       delta1_dot: float, g_dot: float) -> np.ndarray:
    """dH/dt on the manifold: delta2 tracks -delta1, both couplings track g.

    Rabi/Rabi-Stark: d1dot (s1z - s2z) + gdot (a+ad)(s1x + s2x);
    JC: the coupling part uses the excitation-conserving form.
    """
    s1z = pauli(space, 1, "z").matrix
    s2z = pauli(space, 2, "z").matrix
    hdot = delta1_dot * (s1z - s2z)
    a = annihilator(space).matrix
    ad = a.conj().T
    if params.kind == "jc":
        sm1, sm2 = sigma_minus(space, 1).matrix, sigma_minus(space, 2).matrix
        sp1, sp2 = sm1.conj().T, sm2.conj().T
        hdot = hdot + g_dot * (sp1 @ a + sm1 @ ad + sp2 @ a + sm2 @ ad)
    else:
        s1x = pauli(space, 1, "x").matrix
        s2x = pauli(space, 2, "x").matrix
        hdot = hdot + g_dot * ((a + ad) @ (s1x + s2x))
    return hdot


def dark_matrix_element(space: SystemSpace, params: ModelParams,
                        delta1_dot: float, g_dot: float,
                        near_state: np.ndarray | None = None) -> complex:
    """<E_near| dH/dt |psi_dark> for the co-moving level at the dark energy.

    If ``near_state`` is not given, the nearest same-parity eigenstate of
    H at the dark energy (orthogonalized against the dark state) is taken
    from the spectrum module.
    """
    _require_manifold(params)
    dark = dark_state(space, params)
    if near_state is None:
        from .spectrum import comoving_eigenstate

        _, near_state = comoving_eigenstate(space, params)
    hdot = transfer_generator(space, params, delta1_dot, g_dot)
    return complex(near_state.conj() @ (hdot @ dark.state.data))

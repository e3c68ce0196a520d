"""Parity-resolved spectra, level tracking, gaps and the adiabatic criterion.

The parity P = s1z s2z exp(i pi n) is diagonal in the product basis, so
each Hamiltonian splits into two uncoupled blocks; sweeps diagonalize the
blocks point by point and track levels by eigenvector overlap between
neighbouring grid points (sorting by energy mislabels avoided crossings).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hilbert import SystemSpace, make_space, parity_diagonal
from .models import (ModelParams, Schedule, hamiltonian,
                     hamiltonian_from_coefficients, params_from_coefficients,
                     term_matrices)
from .darkstates import dark_state, dark_energy

__all__ = [
    "ConvergenceError",
    "SpectrumSweep",
    "GapReport",
    "sweep_spectrum",
    "schedule_sweep_spectrum",
    "min_gap_to_dark",
    "adiabaticity_ratio",
    "comoving_eigenstate",
    "parity_blocks",
    "eig_parity",
    "check_cutoff_convergence",
]

DARK_FLATNESS_TOL = 1e-8
TRACK_OVERLAP_MIN = 0.5


class ConvergenceError(RuntimeError):
    """Fock-cutoff doubling moved a tracked level by more than tolerance."""


def parity_blocks(space: SystemSpace) -> tuple[np.ndarray, np.ndarray]:
    """(even indices, odd indices) of the parity-diagonal basis."""
    par = parity_diagonal(space)
    return np.where(par > 0)[0], np.where(par < 0)[0]


def eig_parity(space: SystemSpace, h: np.ndarray):
    """Eigen-decomposition of both parity blocks.

    Returns dict with keys 'even'/'odd', each (eigenvalues, eigenvectors,
    basis indices); eigenvectors are columns in the block basis.
    """
    out = {}
    for label, idx in zip(("even", "odd"), parity_blocks(space)):
        block = h[np.ix_(idx, idx)]
        vals, vecs = np.linalg.eigh(block)
        out[label] = (vals, vecs, idx)
    return out


@dataclass
class SpectrumSweep:
    """Tracked eigenvalues along a one-parameter sweep."""

    sweep_name: str
    grid: np.ndarray
    energies: dict          # parity -> (n_levels, n_grid) tracked eigenvalues
    tracking_breaks: dict   # parity -> list of (grid index, level) with poor overlap
    dark_levels: list       # (parity, level index) flagged flat at the dark energy
    dark_energy: float
    space: SystemSpace
    params_at: object = field(repr=False, default=None)  # grid value -> ModelParams

    def levels(self, parity: str) -> np.ndarray:
        return self.energies[parity]


@dataclass(frozen=True)
class GapReport:
    min_gap: float
    location: float         # sweep value at the minimum
    level_pair: tuple       # ((parity, dark level), (parity, nearest level))


def _track_block(h_list):
    """Track one parity block across the grid by eigenvector overlap."""
    n_grid = len(h_list)
    vals0, vecs0 = np.linalg.eigh(h_list[0])
    n_lev = len(vals0)
    energies = np.empty((n_lev, n_grid))
    energies[:, 0] = vals0
    breaks = []
    prev_vecs = vecs0
    for k in range(1, n_grid):
        vals, vecs = np.linalg.eigh(h_list[k])
        overlap = np.abs(prev_vecs.conj().T @ vecs)  # (prev level, new level)
        order = np.full(n_lev, -1)
        taken = np.zeros(n_lev, dtype=bool)
        # greedy assignment, strongest overlaps first
        n_assigned = 0
        for flat in np.argsort(overlap, axis=None)[::-1]:
            i, j = divmod(flat, n_lev)
            if order[i] == -1 and not taken[j]:
                order[i] = j
                taken[j] = True
                n_assigned += 1
                if overlap[i, j] <= TRACK_OVERLAP_MIN:
                    breaks.append((k, int(i)))
                if n_assigned == n_lev:
                    break
        energies[:, k] = vals[order]
        prev_vecs = vecs[:, order]
    return energies, breaks


def _sweep_from_h_list(space, name, grid, h_eval, dark_e):
    even_idx, odd_idx = parity_blocks(space)
    h_even, h_odd = [], []
    for v in grid:
        h = h_eval(v)
        h_even.append(h[np.ix_(even_idx, even_idx)])
        h_odd.append(h[np.ix_(odd_idx, odd_idx)])
    energies, tracking_breaks = {}, {}
    for label, hl in (("even", h_even), ("odd", h_odd)):
        energies[label], tracking_breaks[label] = _track_block(hl)
    dark_levels = []
    for label in ("even", "odd"):
        e = energies[label]
        flat = np.abs(e - e[:, [0]]).max(axis=1) < DARK_FLATNESS_TOL
        pinned = np.abs(e[:, 0] - dark_e) < 1e-6
        for lev in np.where(flat & pinned)[0]:
            dark_levels.append((label, int(lev)))
    return SpectrumSweep(
        sweep_name=name, grid=np.asarray(grid, dtype=float),
        energies=energies, tracking_breaks=tracking_breaks,
        dark_levels=dark_levels, dark_energy=dark_e, space=space,
    )


def sweep_spectrum(space: SystemSpace, params_template: ModelParams,
                   sweep_name: str, grid) -> SpectrumSweep:
    """Eigenvalues vs one model parameter.

    sweep_name 'g' varies both couplings together; any other name is a
    ModelParams field.  Levels are tracked per parity block.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("sweep grid is empty")

    def params_of(v) -> ModelParams:
        if sweep_name == "g":
            return _replace(params_template, g1=v, g2=v)
        return _replace(params_template, **{sweep_name: v})

    sweep = _sweep_from_h_list(
        space, sweep_name, grid,
        lambda v: hamiltonian(space, params_of(v)).matrix,
        dark_energy(params_template))
    sweep.params_at = params_of
    return sweep


def schedule_sweep_spectrum(space: SystemSpace, schedule: Schedule,
                            times) -> SpectrumSweep:
    """Eigenvalues vs time along a schedule (drive terms excluded)."""
    return _sweep_from_h_list(
        space, "t", np.asarray(times, dtype=float),
        lambda t: schedule.hamiltonian_at(space, t).matrix,
        schedule.value("omega", 0.0))


def _replace(params: ModelParams, **kw) -> ModelParams:
    from dataclasses import replace

    return replace(params, **kw)


def min_gap_to_dark(sweep: SpectrumSweep) -> GapReport:
    """Minimum distance from the dark level to any same-parity level."""
    if not sweep.dark_levels:
        raise ValueError("sweep contains no dark-flagged level")
    parity, dark_lev = sweep.dark_levels[0]
    e = sweep.energies[parity]
    dark_row = e[dark_lev]
    others = np.delete(np.arange(e.shape[0]), dark_lev)
    gaps = np.abs(e[others] - dark_row)
    flat_idx = np.unravel_index(np.argmin(gaps), gaps.shape)
    other_lev = int(others[flat_idx[0]])
    return GapReport(
        min_gap=float(gaps[flat_idx]),
        location=float(sweep.grid[flat_idx[1]]),
        level_pair=((parity, dark_lev), (parity, other_lev)),
    )


def comoving_eigenstate(space: SystemSpace, params: ModelParams):
    """Eigenstate closest to the dark energy after removing the dark state.

    Returns (energy, vector in the full basis).  Degenerate companions of
    the dark level are orthogonalized against the analytic dark state.
    """
    h = hamiltonian(space, params).matrix
    dark = dark_state(space, params)
    e_dark = dark.energy
    even_idx, _ = parity_blocks(space)
    block = h[np.ix_(even_idx, even_idx)]
    vals, vecs = np.linalg.eigh(block)
    psi_b = dark.state.data[even_idx]
    # project the dark direction out of the eigenbasis, then take the
    # remaining vector with energy closest to the dark line
    candidates = []
    for i in range(len(vals)):
        v = vecs[:, i] - (psi_b.conj() @ vecs[:, i]) * psi_b
        nrm = np.linalg.norm(v)
        if nrm > 1e-6:
            candidates.append((abs(vals[i] - e_dark), -nrm, i, v / nrm))
    candidates.sort(key=lambda c: (c[0], c[1]))
    _, _, idx, v = candidates[0]
    full = np.zeros(space.dim, dtype=complex)
    full[even_idx] = v
    return float(vals[idx]), full


def adiabaticity_ratio(space: SystemSpace, schedule: Schedule, t: float,
                       detail: bool = False):
    """max_n |<E_n|dH/dt|psi_dark>| / (E_n - E_dark)^2 at schedule time t.

    dH/dt comes from the analytic schedule derivatives.  Levels degenerate
    with the dark state contribute 0 if the matrix element also vanishes
    and +inf otherwise.
    """
    coeffs = schedule.coefficients_at(t)
    derivs = schedule.derivatives_at(t)
    terms = term_matrices(space)
    h = hamiltonian_from_coefficients(space, coeffs).matrix
    hdot = np.zeros_like(h)
    for slot, mat in terms.items():
        dc = derivs.get(slot, 0.0)
        if dc != 0.0:
            hdot = hdot + dc * mat

    params = params_from_coefficients(coeffs)
    dark = dark_state(space, params)
    e_dark = dark.energy
    even_idx, _ = parity_blocks(space)
    block = h[np.ix_(even_idx, even_idx)]
    vals, vecs = np.linalg.eigh(block)
    psi_b = dark.state.data[even_idx]
    hdot_psi = (hdot @ dark.state.data)[even_idx]
    elements = np.abs(vecs.conj().T @ hdot_psi)
    overlaps = np.abs(vecs.conj().T @ psi_b)
    ratios = []
    for i in range(len(vals)):
        if overlaps[i] > 0.99:        # the dark level itself
            continue
        de = vals[i] - e_dark
        if abs(de) < 1e-12:
            ratios.append(0.0 if elements[i] < 1e-12 else np.inf)
        else:
            ratios.append(float(elements[i] / de**2))
    ratios = np.array(ratios)
    if detail:
        return ratios.max(), {"ratios": ratios, "energies": vals,
                              "elements": elements}
    return float(ratios.max())


def check_cutoff_convergence(space: SystemSpace, params_list,
                             window: tuple[float, float] = (-2.0, 3.0),
                             tol: float = DARK_FLATNESS_TOL) -> float:
    """Max eigenvalue shift inside the plot window when doubling the cutoff.

    Raises ConvergenceError when the shift exceeds ``tol``.
    """
    big = make_space(2 * space.fock_cutoff)
    worst = 0.0
    for params in params_list:
        e_small = np.linalg.eigvalsh(hamiltonian(space, params).matrix)
        e_big = np.linalg.eigvalsh(hamiltonian(big, params).matrix)
        # truncation raises eigenvalues, so low levels pair up by index
        count = int(np.sum(e_big <= window[1]))
        count = min(count, len(e_small))
        worst = max(worst, np.abs(e_small[:count] - e_big[:count]).max())
    if worst > tol:
        raise ConvergenceError(
            f"cutoff doubling moved a level by {worst:.3e} (> {tol:.0e}); "
            f"increase fock_cutoff beyond {space.fock_cutoff}")
    return worst

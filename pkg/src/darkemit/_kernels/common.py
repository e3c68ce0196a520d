"""Shared system compilation for the integration backends.

The master equation

    drho/dt = -i[H(t), rho] + kappa(t)/2 D[a] + sum_j gamma_j/2 D[sigma_j]
              + sum_j gamma_phi_j/2 (s_jz rho s_jz - rho)

with D[L] = 2 L rho Ldag - Ldag L rho - rho Ldag L is rewritten as

    drho/dt = G rho + rho Gdag + (jump terms)

where G = -iH(t) - V(t)/2 collects the Hamiltonian and the (diagonal)
anticommutator parts.  All jump operators of this problem are shifts or
sign flips in the fixed basis (index = 4n + 2*s1 + s2), so the jump terms
are elementwise operations; only G rho and rho Gdag need matrix products.
Both backends consume the :class:`CompiledSystem` produced here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..hilbert import SystemSpace
from ..models import H_SLOTS, Schedule, pauli, term_matrices

KAPPA_ROW = len(H_SLOTS)  # row of kappa_c in the schedule table


@dataclass
class CompiledSystem:
    """Plain-array form of (space, schedule, lindblad) for the kernels."""

    dim: int
    # schedule table
    times: np.ndarray          # (m+1,) breakpoints
    tvals: np.ndarray          # (n_slots, m+1) values at breakpoints
    codes: np.ndarray          # (m,) 0=linear, 1=smoothstep, 2=smootherstep
    period: float
    # Hamiltonian assembly
    h_const: np.ndarray        # (d, d) terms with constant coefficients
    var_rows: np.ndarray       # (Kv,) rows of tvals for the varying terms
    var_mats: np.ndarray       # (Kv, d, d)
    # dissipator data
    kappa_in: float
    v0: np.ndarray             # (d,) constant part of the anticommutator diag
    nvec: np.ndarray           # (d,) photon numbers (kappa_c couples to these)
    f4: np.ndarray             # (d-4,) cavity jump weights sqrt(n_i + 1)
    idx_s1_down: np.ndarray    # indices with qubit-1 spin down
    idx_s2_down: np.ndarray
    gamma1: float
    gamma2: float
    zw: np.ndarray             # (d, d) dephasing elementwise weights
    # optional qubit pump drive (4 sinusoidal terms)
    drive_mats: np.ndarray | None = None    # (4, d, d): s1x, s1y, s2x, s2y
    drive_params: np.ndarray | None = None  # (amp/2, wq1, wq2, t_on, t_off)

    def coefficients(self, t_local: float) -> np.ndarray:
        """Evaluate all schedule rows at a (period-local) time."""
        seg = int(np.clip(np.searchsorted(self.times, t_local, side="right") - 1,
                          0, len(self.times) - 2))
        t0, t1 = self.times[seg], self.times[seg + 1]
        s = min(max((t_local - t0) / (t1 - t0), 0.0), 1.0)
        if self.codes[seg] == 1:
            w = s * s * (3.0 - 2.0 * s)
        elif self.codes[seg] == 2:
            w = s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
        else:
            w = s
        v = self.tvals[:, seg]
        return v + (self.tvals[:, seg + 1] - v) * w


def compile_system(space: SystemSpace, schedule: Schedule, lindblad) -> CompiledSystem:
    """Flatten a schedule + Lindblad spec into kernel-ready arrays."""
    d = space.dim
    times, tvals, codes = schedule.table()
    terms = term_matrices(space)

    # split Hamiltonian slots into constant and time-varying coefficients
    h_const = np.zeros((d, d), dtype=complex)
    var_rows, var_mats = [], []
    for k, slot in enumerate(H_SLOTS):
        vals = tvals[k]
        if np.ptp(vals) == 0.0:
            if vals[0] != 0.0:
                h_const += vals[0] * terms[slot]
        else:
            var_rows.append(k)
            var_mats.append(terms[slot])

    nvec = space.photon_numbers()
    s1 = space.spin_bits(1)
    s2 = space.spin_bits(2)
    z1 = 2 * s1 - 1
    z2 = 2 * s2 - 1

    g1, g2 = lindblad.gamma1, lindblad.gamma2
    gp1, gp2 = lindblad.gamma_phi1, lindblad.gamma_phi2
    # dephasing enters as the collapse channel sqrt(gamma_phi) s_jz, i.e.
    # gamma_phi_j (s_jz rho s_jz - rho); V collects all anticommutator
    # diagonals, with the kappa(t) n part added per step (kappa_c varies)
    v0 = g1 * s1 + g2 * s2 + (gp1 + gp2) * np.ones(d)
    zw = gp1 * np.outer(z1, z1) + gp2 * np.outer(z2, z2)

    drive_mats = drive_params = None
    if schedule.drive is not None and schedule.drive.rabi_amplitude > 0:
        dp = schedule.drive
        drive_mats = np.stack([
            pauli(space, 1, "x").matrix,
            pauli(space, 1, "y").matrix,
            pauli(space, 2, "x").matrix,
            pauli(space, 2, "y").matrix,
        ])
        drive_params = np.array([dp.rabi_amplitude / 2.0, dp.wq1, dp.wq2,
                                 dp.t_on, dp.t_off])

    return CompiledSystem(
        dim=d,
        times=times,
        tvals=tvals,
        codes=codes,
        period=schedule.period,
        h_const=h_const,
        var_rows=np.array(var_rows, dtype=np.int64),
        var_mats=(np.stack(var_mats) if var_mats
                  else np.zeros((0, d, d), dtype=complex)),
        kappa_in=lindblad.kappa_in,
        v0=v0,
        nvec=nvec,
        f4=np.sqrt(nvec[4:]),
        idx_s1_down=np.where(s1 == 0)[0].astype(np.int64),
        idx_s2_down=np.where(s2 == 0)[0].astype(np.int64),
        gamma1=g1,
        gamma2=g2,
        zw=zw,
        drive_mats=drive_mats,
        drive_params=drive_params,
    )

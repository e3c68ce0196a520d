"""Pure-numpy integration backend (reference implementation).

Embedded Dormand-Prince 5(4) with adaptive step control on a stack of
density-like matrices sharing one time axis.  The compiled backend in
``_core.pyx`` implements exactly the same scheme; ``tests/test_kernels.py``
checks the two agree to integration tolerance.
"""

from __future__ import annotations

import numpy as np

from .common import KAPPA_ROW, CompiledSystem

BACKEND_NAME = "python"

# Dormand-Prince 5(4) tableau
C_NODES = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A_STAGE = [
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
E_COEF = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
                   -17253 / 339200, 22 / 525, -1 / 40])

MIN_STEP = 1e-12


class IntegrationError(RuntimeError):
    pass


class Stepper:
    """Adaptive propagation of a (B, d, d) complex stack through the schedule.

    Times passed to :meth:`advance` are global; ``t_shift`` is subtracted
    before evaluating schedule coefficients, so legs in later periods reuse
    the one-period table.  The step size persists across calls.
    """

    def __init__(self, system: CompiledSystem, rtol: float = 1e-8,
                 atol: float = 1e-10):
        self.system = system
        self.rtol = rtol
        self.atol = atol
        self.h = 1e-2
        self.stats = {"steps": 0, "rejected": 0, "rhs_evals": 0}

    def _rhs(self, t_local: float, y: np.ndarray) -> np.ndarray:
        sysd = self.system
        self.stats["rhs_evals"] += 1
        c = sysd.coefficients(t_local)
        h = sysd.h_const.copy()
        for k, row in enumerate(sysd.var_rows):
            ck = c[row]
            if ck != 0.0:
                h += ck * sysd.var_mats[k]
        if sysd.drive_mats is not None:
            amp2, wq1, wq2, t_on, t_off = sysd.drive_params
            if amp2 != 0.0 and t_on <= t_local <= t_off:
                h += (amp2 * np.cos(wq1 * t_local)) * sysd.drive_mats[0]
                h += (amp2 * np.sin(wq1 * t_local)) * sysd.drive_mats[1]
                h += (amp2 * np.cos(wq2 * t_local)) * sysd.drive_mats[2]
                h += (amp2 * np.sin(wq2 * t_local)) * sysd.drive_mats[3]
        kappa = sysd.kappa_in + c[KAPPA_ROW]
        g = -1j * h
        g[np.diag_indices_from(g)] -= 0.5 * (sysd.v0 + kappa * sysd.nvec)

        out = np.matmul(g, y)
        out += np.matmul(y, g.conj().T)
        if kappa != 0.0:
            f = sysd.f4
            out[..., :-4, :-4] += kappa * (f[:, None] * f[None, :]) * y[..., 4:, 4:]
        if sysd.gamma1 != 0.0:
            i0 = sysd.idx_s1_down
            out[..., i0[:, None], i0[None, :]] += sysd.gamma1 * \
                y[..., i0[:, None] + 2, i0[None, :] + 2]
        if sysd.gamma2 != 0.0:
            i0 = sysd.idx_s2_down
            out[..., i0[:, None], i0[None, :]] += sysd.gamma2 * \
                y[..., i0[:, None] + 1, i0[None, :] + 1]
        out += sysd.zw * y
        return out

    def advance(self, y: np.ndarray, t0: float, t1: float,
                t_shift: float = 0.0) -> np.ndarray:
        """Integrate the stack in place from t0 to t1 (t1 >= t0)."""
        if t1 <= t0 + 1e-13:
            return y
        t = t0
        h = min(self.h, t1 - t0)
        ks: list[np.ndarray | None] = [None] * 7
        ks[0] = self._rhs(t0 - t_shift, y)
        while t < t1 - 1e-13:
            h = min(h, t1 - t)
            if h < MIN_STEP:
                raise IntegrationError(f"step size underflow at t={t}")
            for i in range(1, 7):
                yi = y + (h * A_STAGE[i - 1][0]) * ks[0]
                for j in range(1, i):
                    aij = A_STAGE[i - 1][j]
                    if aij != 0.0:
                        yi += (h * aij) * ks[j]
                ks[i] = self._rhs(t - t_shift + C_NODES[i] * h, yi)
            ynew = yi  # stage 7 is evaluated at the 5th-order solution
            err = (h * E_COEF[0]) * ks[0]
            for j in range(2, 7):
                err += (h * E_COEF[j]) * ks[j]
            scale = self.atol + self.rtol * max(np.abs(y).max(),
                                                np.abs(ynew).max())
            enorm = np.abs(err).max() / scale
            self.stats["steps"] += 1
            if enorm <= 1.0:
                t += h
                y[...] = ynew
                ks[0] = ks[6]  # FSAL
            else:
                self.stats["rejected"] += 1
            factor = 0.9 * enorm ** -0.2 if enorm > 0 else 5.0
            h *= min(5.0, max(0.2, factor))
        self.h = max(h, MIN_STEP)
        return y

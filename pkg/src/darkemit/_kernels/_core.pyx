# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration backend.

Same Dormand-Prince 5(4) scheme as pyref.py, with the right-hand side
written out explicitly: G rho + rho Gdag via BLAS zgemm plus elementwise
jump terms.  The heavy loop releases the GIL so correlation sweeps can
run columns on threads.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, sqrt
from scipy.linalg.cython_blas cimport zgemm

from .common import KAPPA_ROW, CompiledSystem

cnp.import_array()

BACKEND_NAME = "compiled"

ctypedef double complex zcomplex

DEF NSTAGE = 7

# Dormand-Prince tableau (flattened lower triangle, row i has i entries)
cdef double[21] A_FLAT
cdef double[7] C_NODES
cdef double[7] E_COEF

A_FLAT[0] = 1.0 / 5
A_FLAT[1] = 3.0 / 40;        A_FLAT[2] = 9.0 / 40
A_FLAT[3] = 44.0 / 45;       A_FLAT[4] = -56.0 / 15;      A_FLAT[5] = 32.0 / 9
A_FLAT[6] = 19372.0 / 6561;  A_FLAT[7] = -25360.0 / 2187
A_FLAT[8] = 64448.0 / 6561;  A_FLAT[9] = -212.0 / 729
A_FLAT[10] = 9017.0 / 3168;  A_FLAT[11] = -355.0 / 33
A_FLAT[12] = 46732.0 / 5247; A_FLAT[13] = 49.0 / 176
A_FLAT[14] = -5103.0 / 18656
A_FLAT[15] = 35.0 / 384;     A_FLAT[16] = 0.0
A_FLAT[17] = 500.0 / 1113;   A_FLAT[18] = 125.0 / 192
A_FLAT[19] = -2187.0 / 6784; A_FLAT[20] = 11.0 / 84

C_NODES[0] = 0.0; C_NODES[1] = 1.0 / 5; C_NODES[2] = 3.0 / 10
C_NODES[3] = 4.0 / 5; C_NODES[4] = 8.0 / 9; C_NODES[5] = 1.0; C_NODES[6] = 1.0

E_COEF[0] = 71.0 / 57600;  E_COEF[1] = 0.0
E_COEF[2] = -71.0 / 16695; E_COEF[3] = 71.0 / 1920
E_COEF[4] = -17253.0 / 339200
E_COEF[5] = 22.0 / 525;    E_COEF[6] = -1.0 / 40

MIN_STEP = 1e-12


class IntegrationError(RuntimeError):
    pass


cdef struct SysView:
    int d, B
    int n_bp          # number of breakpoints
    int n_var         # number of varying Hamiltonian terms
    int n_slots
    double kappa_in
    double gamma1, gamma2
    double *times
    double *tvals     # (n_slots, n_bp) C order
    int *codes
    long *var_rows
    zcomplex *h_const
    zcomplex *var_mats    # (n_var, d, d)
    double *v0
    double *nvec
    double *f4
    long *idx1            # qubit-1 spin-down indices
    long *idx2
    int n_idx1, n_idx2
    double *zw            # (d, d)
    # drive
    int has_drive
    zcomplex *drive_mats  # (4, d, d)
    double amp2, wq1, wq2, t_on, t_off


cdef double _eval_coeff(SysView *sv, int row, double t) noexcept nogil:
    cdef int lo = 0, hi = sv.n_bp - 1, mid
    cdef double t0, t1, s, w
    if t <= sv.times[0]:
        return sv.tvals[row * sv.n_bp]
    if t >= sv.times[sv.n_bp - 1]:
        return sv.tvals[row * sv.n_bp + sv.n_bp - 1]
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if sv.times[mid] <= t:
            lo = mid
        else:
            hi = mid
    t0 = sv.times[lo]
    t1 = sv.times[lo + 1]
    s = (t - t0) / (t1 - t0)
    if sv.codes[lo] == 1:
        w = s * s * (3.0 - 2.0 * s)
    elif sv.codes[lo] == 2:
        w = s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    else:
        w = s
    cdef double v0 = sv.tvals[row * sv.n_bp + lo]
    cdef double v1 = sv.tvals[row * sv.n_bp + lo + 1]
    return v0 + (v1 - v0) * w


cdef void _assemble_g(SysView *sv, double t, zcomplex *g) noexcept nogil:
    """g = -i H(t) - V(t)/2 (dense d*d, C order)."""
    cdef int d = sv.d, i, j, k, n2 = sv.d * sv.d
    cdef double ck, kappa, tr
    cdef zcomplex mi = -1j
    for i in range(n2):
        g[i] = mi * sv.h_const[i]
    for k in range(sv.n_var):
        ck = _eval_coeff(sv, <int> sv.var_rows[k], t)
        if ck != 0.0:
            for i in range(n2):
                g[i] = g[i] + (mi * ck) * sv.var_mats[k * n2 + i]
    if sv.has_drive and sv.amp2 != 0.0 and sv.t_on <= t <= sv.t_off:
        tr = sv.amp2 * cos(sv.wq1 * t)
        for i in range(n2):
            g[i] = g[i] + (mi * tr) * sv.drive_mats[i]
        tr = sv.amp2 * sin(sv.wq1 * t)
        for i in range(n2):
            g[i] = g[i] + (mi * tr) * sv.drive_mats[n2 + i]
        tr = sv.amp2 * cos(sv.wq2 * t)
        for i in range(n2):
            g[i] = g[i] + (mi * tr) * sv.drive_mats[2 * n2 + i]
        tr = sv.amp2 * sin(sv.wq2 * t)
        for i in range(n2):
            g[i] = g[i] + (mi * tr) * sv.drive_mats[3 * n2 + i]
    kappa = sv.kappa_in + _eval_coeff(sv, sv.n_slots - 1, t)
    for i in range(d):
        g[i * d + i] = g[i * d + i] - 0.5 * (sv.v0[i] + kappa * sv.nvec[i])


cdef void _matmul(zcomplex *a, zcomplex *b, zcomplex *c, int d,
                  zcomplex alpha, zcomplex beta) noexcept nogil:
    # C-order m=k=n=d: compute C^T = B^T A^T via Fortran zgemm
    cdef char nn = b'N'
    zgemm(&nn, &nn, &d, &d, &d, &alpha, b, &d, a, &d, &beta, c, &d)


cdef void _rhs(SysView *sv, double t, zcomplex *y, zcomplex *out,
               zcomplex *g, zcomplex *gh) noexcept nogil:
    """out = L(t)[y] for the whole stack; g, gh are d*d scratch."""
    cdef int d = sv.d, n2 = sv.d * sv.d, b, i, j, ii, jj
    cdef double kappa
    cdef zcomplex one = 1.0, zero = 0.0
    cdef zcomplex *yb
    cdef zcomplex *ob
    _assemble_g(sv, t, g)
    for i in range(d):
        for j in range(d):
            gh[i * d + j] = g[j * d + i].real - 1j * g[j * d + i].imag
    kappa = sv.kappa_in + _eval_coeff(sv, sv.n_slots - 1, t)
    for b in range(sv.B):
        yb = y + b * n2
        ob = out + b * n2
        _matmul(g, yb, ob, d, one, zero)
        _matmul(yb, gh, ob, d, one, one)
        if kappa != 0.0:
            for i in range(d - 4):
                for j in range(d - 4):
                    ob[i * d + j] = ob[i * d + j] + \
                        kappa * sv.f4[i] * sv.f4[j] * yb[(i + 4) * d + (j + 4)]
        if sv.gamma1 != 0.0:
            for i in range(sv.n_idx1):
                ii = <int> sv.idx1[i]
                for j in range(sv.n_idx1):
                    jj = <int> sv.idx1[j]
                    ob[ii * d + jj] = ob[ii * d + jj] + \
                        sv.gamma1 * yb[(ii + 2) * d + (jj + 2)]
        if sv.gamma2 != 0.0:
            for i in range(sv.n_idx2):
                ii = <int> sv.idx2[i]
                for j in range(sv.n_idx2):
                    jj = <int> sv.idx2[j]
                    ob[ii * d + jj] = ob[ii * d + jj] + \
                        sv.gamma2 * yb[(ii + 1) * d + (jj + 1)]
        for i in range(n2):
            ob[i] = ob[i] + sv.zw[i] * yb[i]


cdef double _max_abs(zcomplex *x, int n) noexcept nogil:
    cdef double m = 0.0, v
    cdef int i
    for i in range(n):
        v = x[i].real * x[i].real + x[i].imag * x[i].imag
        if v > m:
            m = v
    return sqrt(m)


class Stepper:
    """Compiled counterpart of pyref.Stepper (same public surface)."""

    def __init__(self, system, rtol=1e-8, atol=1e-10):
        self.system = system
        self.rtol = float(rtol)
        self.atol = float(atol)
        self.h = 1e-2
        self.stats = {"steps": 0, "rejected": 0, "rhs_evals": 0}
        d = system.dim
        # keep contiguous copies alive on the instance
        self._times = np.ascontiguousarray(system.times, dtype=float)
        self._tvals = np.ascontiguousarray(system.tvals, dtype=float)
        self._codes = np.ascontiguousarray(system.codes, dtype=np.int32)
        self._var_rows = np.ascontiguousarray(system.var_rows, dtype=np.int64)
        self._h_const = np.ascontiguousarray(system.h_const, dtype=complex)
        self._var_mats = np.ascontiguousarray(system.var_mats, dtype=complex)
        self._v0 = np.ascontiguousarray(system.v0, dtype=float)
        self._nvec = np.ascontiguousarray(system.nvec, dtype=float)
        self._f4 = np.ascontiguousarray(system.f4, dtype=float)
        self._idx1 = np.ascontiguousarray(system.idx_s1_down, dtype=np.int64)
        self._idx2 = np.ascontiguousarray(system.idx_s2_down, dtype=np.int64)
        self._zw = np.ascontiguousarray(system.zw, dtype=float)
        if system.drive_mats is not None:
            self._drive = np.ascontiguousarray(system.drive_mats, dtype=complex)
            self._dpar = np.ascontiguousarray(system.drive_params, dtype=float)
        else:
            self._drive = None
            self._dpar = None
        self._work = None

    def _ensure_work(self, batch, d):
        if self._work is None or self._work[0].shape[0] != batch:
            n2 = batch * d * d
            self._work = (
                np.empty((batch, d, d), dtype=complex),   # ynew
                np.empty((7, batch, d, d), dtype=complex),  # stages
                np.empty((d, d), dtype=complex),          # g
                np.empty((d, d), dtype=complex),          # gh
            )

    def advance(self, y, t0, t1, t_shift=0.0):
        cdef double ct0 = t0, ct1 = t1, cshift = t_shift
        if ct1 <= ct0 + 1e-13:
            return y
        y = np.ascontiguousarray(y, dtype=complex)
        if y.ndim == 2:
            yv = y[None, :, :]
        else:
            yv = y
        cdef int B = yv.shape[0]
        cdef int d = yv.shape[1]
        self._ensure_work(B, d)

        cdef SysView sv
        cdef double[::1] times = self._times
        cdef double[:, ::1] tvals = self._tvals
        cdef int[::1] codes = self._codes
        cdef long[::1] var_rows = self._var_rows
        cdef zcomplex[:, ::1] h_const = self._h_const
        cdef zcomplex[:, :, ::1] var_mats = self._var_mats
        cdef double[::1] v0 = self._v0
        cdef double[::1] nvec = self._nvec
        cdef double[::1] f4 = self._f4
        cdef long[::1] idx1 = self._idx1
        cdef long[::1] idx2 = self._idx2
        cdef double[:, ::1] zw = self._zw

        sv.d = d
        sv.B = B
        sv.n_bp = times.shape[0]
        sv.n_var = var_rows.shape[0]
        sv.n_slots = tvals.shape[0]
        sv.kappa_in = self.system.kappa_in
        sv.gamma1 = self.system.gamma1
        sv.gamma2 = self.system.gamma2
        sv.times = &times[0]
        sv.tvals = &tvals[0, 0]
        sv.codes = &codes[0]
        sv.var_rows = &var_rows[0] if sv.n_var else NULL
        sv.h_const = &h_const[0, 0]
        sv.var_mats = &var_mats[0, 0, 0] if sv.n_var else NULL
        sv.v0 = &v0[0]
        sv.nvec = &nvec[0]
        sv.f4 = &f4[0]
        sv.idx1 = &idx1[0]
        sv.idx2 = &idx2[0]
        sv.n_idx1 = idx1.shape[0]
        sv.n_idx2 = idx2.shape[0]
        sv.zw = &zw[0, 0]
        cdef zcomplex[:, :, ::1] dmats
        cdef double[::1] dpar
        if self._drive is not None:
            dmats = self._drive
            dpar = self._dpar
            sv.has_drive = 1
            sv.drive_mats = &dmats[0, 0, 0]
            sv.amp2 = dpar[0]
            sv.wq1 = dpar[1]
            sv.wq2 = dpar[2]
            sv.t_on = dpar[3]
            sv.t_off = dpar[4]
        else:
            sv.has_drive = 0
            sv.drive_mats = NULL

        ynew_arr, k_arr, g_arr, gh_arr = self._work
        cdef zcomplex[:, :, ::1] yv_m = yv
        cdef zcomplex[:, :, ::1] ynew_m = ynew_arr
        cdef zcomplex[:, :, :, ::1] k_m = k_arr
        cdef zcomplex[:, ::1] g_m = g_arr
        cdef zcomplex[:, ::1] gh_m = gh_arr

        cdef zcomplex *yp = &yv_m[0, 0, 0]
        cdef zcomplex *ynew = &ynew_m[0, 0, 0]
        cdef zcomplex *kp = &k_m[0, 0, 0, 0]
        cdef zcomplex *gp = &g_m[0, 0]
        cdef zcomplex *ghp = &gh_m[0, 0]

        cdef double rtol = self.rtol, atol = self.atol
        cdef double t = ct0, h = self.h, enorm, scale, factor, hcur
        cdef int n2 = B * d * d
        cdef int i, j, stage, arow
        cdef long steps = 0, rejected = 0, evals = 0
        cdef bint fsal_valid = 0
        cdef zcomplex acc

        if h > ct1 - ct0:
            h = ct1 - ct0
        with nogil:
            _rhs(&sv, t - cshift, yp, kp, gp, ghp)
            evals += 1
            while t < ct1 - 1e-13:
                if h > ct1 - t:
                    h = ct1 - t
                if h < 1e-12:
                    break
                # stages 2..7
                arow = 0
                for stage in range(1, NSTAGE):
                    for i in range(n2):
                        acc = 0.0
                        for j in range(stage):
                            if A_FLAT[arow + j] != 0.0:
                                acc = acc + A_FLAT[arow + j] * kp[j * n2 + i]
                        ynew[i] = yp[i] + h * acc
                    _rhs(&sv, t - cshift + C_NODES[stage] * h,
                         ynew, kp + stage * n2, gp, ghp)
                    evals += 1
                    arow += stage
                # ynew currently holds the 5th-order solution (stage-7 point)
                enorm = 0.0
                scale = _max_abs(yp, n2)
                factor = _max_abs(ynew, n2)
                if factor > scale:
                    scale = factor
                scale = atol + rtol * scale
                for i in range(n2):
                    acc = 0.0
                    for j in range(NSTAGE):
                        if E_COEF[j] != 0.0:
                            acc = acc + E_COEF[j] * kp[j * n2 + i]
                    factor = h * (acc.real * acc.real + acc.imag * acc.imag) ** 0.5
                    if factor > enorm:
                        enorm = factor
                enorm /= scale
                steps += 1
                if enorm <= 1.0:
                    t += h
                    for i in range(n2):
                        yp[i] = ynew[i]
                    for i in range(n2):
                        kp[i] = kp[6 * n2 + i]  # FSAL
                else:
                    rejected += 1
                if enorm > 0.0:
                    factor = 0.9 * enorm ** -0.2
                else:
                    factor = 5.0
                if factor > 5.0:
                    factor = 5.0
                if factor < 0.2:
                    factor = 0.2
                h *= factor

        if t < ct1 - 1e-13:
            raise IntegrationError(f"step size underflow at t={t}")
        self.h = h if h > MIN_STEP else MIN_STEP
        self.stats["steps"] += steps
        self.stats["rejected"] += rejected
        self.stats["rhs_evals"] += evals
        return y

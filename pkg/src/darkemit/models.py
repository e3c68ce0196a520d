"""Model Hamiltonians and time-dependent parameter schedules.

Three model kinds share one coefficient representation:

    H(t) = omega*n + delta1*s1z + delta2*s2z
           + g1R*(a+ad)s1x + g2R*(a+ad)s2x          (Rabi couplings)
           + g1J*(s1+ a + s1- ad) + g2J*(...)        (JC couplings)
           + u1*n*s1z + u2*n*s2z                     (Stark shifts)

A :class:`Schedule` stores piecewise breakpoint tables (linear, cubic or
quintic segments) for every coefficient plus the output-coupler rate
kappa_c(t).  All energies/rates are in units of the resonator frequency
omega, times in units of 1/omega.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .hilbert import (
    Operator,
    SystemSpace,
    annihilator,
    number_op,
    pauli,
    sigma_minus,
    sigma_plus,
)

__all__ = [
    "MANIFOLD_TOL",
    "H_SLOTS",
    "ModelParams",
    "params_from_coefficients",
    "DriveParams",
    "Schedule",
    "ScheduleBuilder",
    "hamiltonian",
    "hamiltonian_from_coefficients",
    "drive_hamiltonian",
    "term_matrices",
    "protocol_schedule",
    "stark_protocol_schedule",
]

MANIFOLD_TOL = 1e-12

# Coefficient slots of the Hamiltonian, in the order the kernels expect.
H_SLOTS = (
    "omega", "delta1", "delta2",
    "g1_rabi", "g2_rabi", "g1_jc", "g2_jc",
    "u1", "u2",
)
ALL_SLOTS = H_SLOTS + ("kappa_c",)

MODEL_KINDS = ("rabi", "jc", "rabi_stark")


@dataclass(frozen=True)
class ModelParams:
    """Static model parameters; deltas are *half* level splittings."""

    delta1: float
    delta2: float
    g1: float
    g2: float
    u1: float = 0.0
    u2: float = 0.0
    kind: str = "rabi"
    omega: float = 1.0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        for name in ("delta1", "delta2", "g1", "g2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.kind != "rabi_stark" and (self.u1 != 0 or self.u2 != 0):
            raise ValueError("Stark couplings require kind='rabi_stark'")
        if self.stark_unstable:
            warnings.warn(
                f"U1+U2 = {self.u1 + self.u2} > omega: outside the Stark "
                "stability region", stacklevel=2)

    @property
    def stark_unstable(self) -> bool:
        return self.u1 + self.u2 > self.omega + MANIFOLD_TOL

    @property
    def on_dark_manifold(self) -> bool:
        """True when delta1+delta2 = omega and g1 = g2 (to 1e-12)."""
        return (abs(self.delta1 + self.delta2 - self.omega) < MANIFOLD_TOL
                and abs(self.g1 - self.g2) < MANIFOLD_TOL)

    def coefficients(self) -> dict[str, float]:
        c = dict.fromkeys(ALL_SLOTS, 0.0)
        c["omega"] = self.omega
        c["delta1"] = self.delta1
        c["delta2"] = self.delta2
        if self.kind == "jc":
            c["g1_jc"], c["g2_jc"] = self.g1, self.g2
        else:
            c["g1_rabi"], c["g2_rabi"] = self.g1, self.g2
        if self.kind == "rabi_stark":
            c["u1"], c["u2"] = self.u1, self.u2
        return c


@dataclass(frozen=True)
class DriveParams:
    """Qubit pump pulse: (Omega/2)(s1+ e^{-i wq1 t} + h.c. + same for qubit 2)."""

    rabi_amplitude: float
    wq1: float
    wq2: float
    t_on: float
    t_off: float

    def __post_init__(self):
        if self.rabi_amplitude < 0:
            raise ValueError("rabi_amplitude must be >= 0")
        if not self.t_off > self.t_on:
            raise ValueError("t_off must be > t_on")


# ---------------------------------------------------------------------------
# Hamiltonian builders


def term_matrices(space: SystemSpace) -> dict[str, np.ndarray]:
    """Constant matrices multiplying each coefficient slot."""
    a = annihilator(space).matrix
    ad = a.conj().T
    n = number_op(space).matrix
    s1z = pauli(space, 1, "z").matrix
    s2z = pauli(space, 2, "z").matrix
    s1x = pauli(space, 1, "x").matrix
    s2x = pauli(space, 2, "x").matrix
    sp1, sm1 = sigma_plus(space, 1).matrix, sigma_minus(space, 1).matrix
    sp2, sm2 = sigma_plus(space, 2).matrix, sigma_minus(space, 2).matrix
    x = a + ad
    return {
        "omega": n,
        "delta1": s1z,
        "delta2": s2z,
        "g1_rabi": x @ s1x,
        "g2_rabi": x @ s2x,
        "g1_jc": sp1 @ a + sm1 @ ad,
        "g2_jc": sp2 @ a + sm2 @ ad,
        "u1": n @ s1z,
        "u2": n @ s2z,
    }


def hamiltonian_from_coefficients(space: SystemSpace,
                                  coeffs: dict[str, float]) -> Operator:
    terms = term_matrices(space)
    h = np.zeros((space.dim, space.dim), dtype=complex)
    for slot, mat in terms.items():
        c = coeffs.get(slot, 0.0)
        if c != 0.0:
            h += c * mat
    return Operator(space, h, hermitian=True)


def hamiltonian(space: SystemSpace, params: ModelParams) -> Operator:
    """Model Hamiltonian for the given parameters on the truncated space."""
    return hamiltonian_from_coefficients(space, params.coefficients())


def params_from_coefficients(coeffs: dict) -> ModelParams:
    """Inverse of ModelParams.coefficients for schedule snapshots.

    Assumes at most one coupling family is active (the protocol switches
    model kind only while the couplings vanish).
    """
    if coeffs.get("g1_jc", 0.0) or coeffs.get("g2_jc", 0.0):
        return ModelParams(delta1=coeffs["delta1"], delta2=coeffs["delta2"],
                           g1=coeffs["g1_jc"], g2=coeffs["g2_jc"],
                           kind="jc", omega=coeffs["omega"])
    stark = bool(coeffs.get("u1", 0.0) or coeffs.get("u2", 0.0))
    return ModelParams(delta1=coeffs["delta1"], delta2=coeffs["delta2"],
                       g1=coeffs.get("g1_rabi", 0.0), g2=coeffs.get("g2_rabi", 0.0),
                       u1=coeffs.get("u1", 0.0) if stark else 0.0,
                       u2=coeffs.get("u2", 0.0) if stark else 0.0,
                       kind="rabi_stark" if stark else "rabi",
                       omega=coeffs["omega"])


def drive_hamiltonian(space: SystemSpace, drive: DriveParams, t: float) -> Operator:
    """Pump-pulse Hamiltonian at time t (zero outside [t_on, t_off])."""
    d = space.dim
    if drive.rabi_amplitude == 0 or not (drive.t_on <= t <= drive.t_off):
        return Operator(space, np.zeros((d, d), dtype=complex), hermitian=True)
    h = np.zeros((d, d), dtype=complex)
    half = drive.rabi_amplitude / 2.0
    for qubit, wq in ((1, drive.wq1), (2, drive.wq2)):
        sp = sigma_plus(space, qubit).matrix
        h += half * np.exp(-1j * wq * t) * sp
        h += half * np.exp(+1j * wq * t) * sp.conj().T
    return Operator(space, h, hermitian=True)


# ---------------------------------------------------------------------------
# schedules

INTERP_CODES = {"linear": 0, "smoothstep": 1, "smootherstep": 2}


def _ramp_weight(s: np.ndarray, code) -> np.ndarray:
    """Interpolation weight on [0, 1]: linear, cubic (C1) or quintic (C2)."""
    return np.choose(code, [
        s,
        s * s * (3.0 - 2.0 * s),
        s * s * s * (10.0 + s * (-15.0 + 6.0 * s)),
    ])


def _ramp_weight_deriv(s: np.ndarray, code) -> np.ndarray:
    return np.choose(code, [
        np.ones_like(s),
        6.0 * s * (1.0 - s),
        30.0 * s * s * (1.0 - s) ** 2,
    ])


@dataclass
class Schedule:
    """Piecewise-smooth coefficient tables over one protocol period.

    Evaluation is periodic: value(slot, t) uses t mod period.  The
    preparation event (applied by the dynamics driver at the start of
    every period) is recorded in ``prep``.
    """

    times: np.ndarray
    values: dict[str, np.ndarray]
    interps: list[str]
    prep: str = "none"
    drive: DriveParams | None = None
    dark_manifold: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or len(self.times) < 2:
            raise ValueError("need at least two breakpoints")
        if not np.all(np.diff(self.times) > 0):
            raise ValueError("breakpoint times must be strictly increasing")
        if len(self.interps) != len(self.times) - 1:
            raise ValueError("need one interpolation mode per segment")
        for mode in self.interps:
            if mode not in INTERP_CODES:
                raise ValueError(f"unknown interpolation {mode!r}")
        for slot in ALL_SLOTS:
            vals = np.asarray(self.values.get(slot, np.zeros_like(self.times)),
                              dtype=float)
            if vals.shape != self.times.shape:
                raise ValueError(f"values for {slot!r} do not match breakpoints")
            self.values[slot] = vals

    @property
    def period(self) -> float:
        return float(self.times[-1])

    def _fold(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return t - self.period * np.floor(t / self.period)

    def _segment_state(self, t):
        tt = self._fold(t)
        seg = np.clip(np.searchsorted(self.times, tt, side="right") - 1,
                      0, len(self.times) - 2)
        t0 = self.times[seg]
        dt = self.times[seg + 1] - t0
        s = (tt - t0) / dt
        return seg, s, dt

    def _codes(self):
        return np.array([INTERP_CODES[m] for m in self.interps])

    def value(self, slot: str, t):
        """Coefficient value at time t (scalar or array), periodic in t."""
        seg, s, _ = self._segment_state(t)
        v0 = self.values[slot][seg]
        v1 = self.values[slot][seg + 1]
        w = _ramp_weight(s, self._codes()[seg])
        out = v0 + (v1 - v0) * w
        return float(out) if np.isscalar(t) else out

    def derivative(self, slot: str, t):
        """Analytic d(coefficient)/dt at time t."""
        seg, s, dt = self._segment_state(t)
        v0 = self.values[slot][seg]
        v1 = self.values[slot][seg + 1]
        w = _ramp_weight_deriv(s, self._codes()[seg])
        out = (v1 - v0) * w / dt
        return float(out) if np.isscalar(t) else out

    def coefficients_at(self, t: float) -> dict[str, float]:
        return {slot: self.value(slot, t) for slot in ALL_SLOTS}

    def derivatives_at(self, t: float) -> dict[str, float]:
        return {slot: self.derivative(slot, t) for slot in ALL_SLOTS}

    def kappa_c(self, t):
        return self.value("kappa_c", t)

    def hamiltonian_at(self, space: SystemSpace, t: float) -> Operator:
        return hamiltonian_from_coefficients(space, self.coefficients_at(t))

    def check_dark_manifold(self, n_samples: int = 257) -> None:
        """Verify delta1+delta2 = omega and g1 = g2 on a dense time grid."""
        ts = np.linspace(0.0, self.period, n_samples)
        d1 = self.value("delta1", ts)
        d2 = self.value("delta2", ts)
        om = self.value("omega", ts)
        if np.abs(d1 + d2 - om).max() > 1e-9:
            raise ValueError("schedule leaves the dark manifold: delta1+delta2 != omega")
        for fam in ("rabi", "jc"):
            g1 = self.value(f"g1_{fam}", ts)
            g2 = self.value(f"g2_{fam}", ts)
            if np.abs(g1 - g2).max() > 1e-9:
                raise ValueError("schedule leaves the dark manifold: g1 != g2")

    def table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(breakpoints, values[nslots, npts], interp codes) for the kernels."""
        vals = np.vstack([self.values[slot] for slot in ALL_SLOTS])
        codes = np.array([INTERP_CODES[m] for m in self.interps], dtype=np.int32)
        return self.times.copy(), vals, codes


class ScheduleBuilder:
    """Incremental construction of a Schedule from an initial snapshot."""

    def __init__(self, initial: dict[str, float], default_interp: str = "smoothstep"):
        snap = dict.fromkeys(ALL_SLOTS, 0.0)
        snap.update(initial)
        self._snapshots = [snap]
        self._times = [0.0]
        self._interps: list[str] = []
        self._default = default_interp

    @property
    def t(self) -> float:
        return self._times[-1]

    def ramp_to(self, t: float, interp: str | None = None, **changes) -> "ScheduleBuilder":
        """Append a segment ending at time t with the named slots changed."""
        if t <= self.t:
            raise ValueError(f"breakpoint {t} not after {self.t}")
        snap = dict(self._snapshots[-1])
        for slot, value in changes.items():
            if slot not in snap:
                raise KeyError(f"unknown slot {slot!r}")
            snap[slot] = float(value)
        self._snapshots.append(snap)
        self._times.append(float(t))
        self._interps.append(interp or self._default)
        return self

    def hold_until(self, t: float) -> "ScheduleBuilder":
        return self.ramp_to(t, interp="linear")

    def build(self, **kwargs) -> Schedule:
        values = {slot: np.array([s[slot] for s in self._snapshots])
                  for slot in ALL_SLOTS}
        return Schedule(np.array(self._times), values, list(self._interps), **kwargs)


# ---------------------------------------------------------------------------
# the operating timelines of the photon source


def protocol_schedule(config) -> Schedule:
    """Full one-period timeline of the two-photon emission protocol.

    Phases: (i) preparation event at t=0; (ii) ramp from (delta split, g=0)
    to (degenerate deltas, g=g_max) along the one-photon dark state;
    then g back to 0 while the qubit singlet is decoupled; (iii) coupler
    on, first photon emitted; (iv) JC coupling bump and reverse ramp,
    second photon emitted through the open coupler; (v) idle, coupler off
    at the period end.  Interfaces: see ProtocolConfig for the knobs.
    """
    c = config
    half = c.omega / 2.0
    sw = c.kappa_switch_time
    split0 = c.delta1_start - c.delta2_start

    # explicit pump pulses get their own phase before the first ramp;
    # with ideal preparation the excitation event is instantaneous at t=0
    t_prep = c.pulse_t_off if c.prep == "pulse" else 0.0
    t_ramp1_end = t_prep + c.t_ramp1
    t_emit1_start = t_ramp1_end + c.t_hold
    t_emit1_end = t_emit1_start + c.t_emit1
    t_bump_end = t_emit1_end + c.t_bump
    t_ramp2_end = t_bump_end + c.t_ramp2
    period = t_ramp2_end + c.t_idle

    builder = ScheduleBuilder(
        {
            "omega": c.omega,
            "delta1": c.delta1_start,
            "delta2": c.delta2_start,
            "u1": c.u1,
            "u2": c.u2,
        },
        default_interp=c.interp,
    )
    if t_prep > 0.0:
        builder.hold_until(t_prep)
    # (ii) adiabatic transfer |0,up,up> -> |1> x singlet, coupler closed.
    # The shaped ramp keeps the crossing through the near-degenerate
    # partner level slow while the coupling (and with it the protecting
    # level splitting) is still small.
    for frac, dfrac, g in c.ramp1_profile:
        d = split0 * dfrac
        builder.ramp_to(t_prep + frac * c.t_ramp1, delta1=half + d / 2.0,
                        delta2=half - d / 2.0, g1_rabi=g, g2_rabi=g)
    builder.ramp_to(t_ramp1_end, delta1=half, delta2=half,
                    g1_rabi=c.g_end, g2_rabi=c.g_end)
    # singlet is decoupled: remove the coupling (better purity), drop any
    # Stark shift while the coupler is still closed
    builder.ramp_to(t_emit1_start - sw, g1_rabi=0.0, g2_rabi=0.0, u1=0.0, u2=0.0)
    builder.hold_until(t_emit1_start)
    # (iii) coupler opens at the window start (fast but finite switch);
    # the first photon leaks into the line
    builder.ramp_to(t_emit1_start + sw, kappa_c=c.kappa_c_on)
    builder.hold_until(t_emit1_end)
    # (iv) JC coupling bump (singlet stays dark), then reverse ramp: the
    # second photon is generated and emitted while the coupler stays open
    builder.ramp_to(t_bump_end, g1_jc=c.g2_max, g2_jc=c.g2_max)
    builder.ramp_to(t_ramp2_end, g1_jc=0.0, g2_jc=0.0,
                    delta1=c.delta1_start, delta2=c.delta2_start)
    # (v) idle; close the coupler at the period boundary
    builder.hold_until(period - sw)
    builder.ramp_to(period, kappa_c=0.0)

    drive = None
    if c.prep == "pulse":
        drive = DriveParams(
            rabi_amplitude=c.rabi_amplitude,
            wq1=2.0 * c.delta1_start,
            wq2=2.0 * c.delta2_start,
            t_on=c.pulse_t_on,
            t_off=c.pulse_t_off,
        )
    sched = builder.build(prep=c.prep, drive=drive, dark_manifold=True)
    sched.check_dark_manifold()
    return sched


def stark_protocol_schedule(config) -> Schedule:
    """Protocol timeline with Stark shifts: the first transfer runs in
    stark_t_ramp1 (default 12/omega) with U1 = U2 = stark_u held constant
    across it; the Stark terms are removed while the singlet is decoupled.
    """
    c = config
    stark = replace(
        c,
        u1=c.stark_u,
        u2=c.stark_u,
        t_ramp1=c.stark_t_ramp1,
        ramp1_profile=c.stark_ramp1_profile,
        g_end=c.stark_g_end,
        interp=c.stark_interp,
    )
    return protocol_schedule(stark)

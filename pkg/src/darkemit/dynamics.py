"""Time-dependent Lindblad integration along a schedule.

The master equation matches the simulation model of the source protocol:
cavity decay at kappa_in + kappa_c(t), qubit relaxation at gamma_j, and
pure dephasing entering as (gamma_phi_j/2)(s_jz rho s_jz - rho).  The
preparation event (an ideal simultaneous pi pulse on both qubits,
i.e. the X1 X2 unitary) is applied at every period boundary unless the
schedule asks for explicit pump pulses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from . import _kernels
from .hilbert import QuantumState, SystemSpace, basis_state, fidelity, singlet_state
from .models import Schedule, params_from_coefficients, protocol_schedule, stark_protocol_schedule
from .darkstates import dark_state

__all__ = [
    "LindbladSpec",
    "Trajectory",
    "ProtocolResult",
    "FitResult",
    "DegenerateFitError",
    "PeriodicPropagator",
    "evolve",
    "run_protocol",
    "emission_efficiency",
    "fit_waveform",
    "stark_fast_transfer",
]

TRACE_TOL = 1e-6


@dataclass(frozen=True)
class LindbladSpec:
    """Dissipation rates in units of the resonator frequency.

    kappa_c(t) comes from the schedule; the collapse channels are the
    cavity mode (kappa_in + kappa_c), each qubit's relaxation and each
    qubit's pure dephasing.
    """

    kappa_in: float = 1e-4
    gamma1: float = 1e-5
    gamma2: float = 1e-5
    gamma_phi1: float = 2e-5
    gamma_phi2: float = 2e-5

    def __post_init__(self):
        for name in ("kappa_in", "gamma1", "gamma2", "gamma_phi1", "gamma_phi2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @classmethod
    def from_config(cls, config) -> "LindbladSpec":
        return cls(kappa_in=config.kappa_in,
                   gamma1=config.gamma1, gamma2=config.gamma2,
                   gamma_phi1=config.gamma_phi1, gamma_phi2=config.gamma_phi2)


def prep_permutation(space: SystemSpace) -> np.ndarray:
    """Index permutation of the ideal preparation unitary X1 X2."""
    perm = np.empty(space.dim, dtype=np.int64)
    for i in range(space.dim):
        n, s1, s2 = space.unindex(i)
        perm[i] = space.index(n, 1 - s1, 1 - s2)
    return perm


class PeriodicPropagator:
    """Advances density-matrix stacks through the periodic schedule.

    Integration legs are split at period boundaries and at schedule
    breakpoints (the coefficients are polynomial inside each segment).
    When the schedule carries the ideal preparation event, it is applied
    exactly once per period boundary, on departure into the new period;
    one propagator instance therefore serves one forward trajectory.
    """

    def __init__(self, space: SystemSpace, schedule: Schedule, lindblad: LindbladSpec,
                 rtol: float = 1e-8, atol: float = 1e-10, backend: str | None = None,
                 system=None):
        self.space = space
        self.schedule = schedule
        self.lindblad = lindblad
        self.system = system if system is not None else \
            _kernels.compile_system(space, schedule, lindblad)
        stepper_cls = _kernels.get_stepper_class(backend)
        self.stepper = stepper_cls(self.system, rtol=rtol, atol=atol)
        self._perm = prep_permutation(space)
        self._eps = 1e-9 * max(1.0, schedule.period)
        self._prepped: set[int] = set()

    def apply_prep(self, y: np.ndarray) -> np.ndarray:
        y[...] = y[..., self._perm, :][..., :, self._perm]
        return y

    def _boundary_index(self, t: float) -> int | None:
        k = round(t / self.schedule.period)
        if abs(t - k * self.schedule.period) < self._eps:
            return int(k)
        return None

    def prep_if_pending(self, y: np.ndarray, t: float) -> None:
        """Apply the preparation event if t sits on an unvisited boundary."""
        if self.schedule.prep != "ideal":
            return
        k = self._boundary_index(t)
        if k is not None and k not in self._prepped:
            self.apply_prep(y)
            self._prepped.add(k)

    def advance(self, y: np.ndarray, t0: float, t1: float) -> np.ndarray:
        """Integrate the stack in place from t0 to t1 (global times)."""
        period = self.schedule.period
        eps = self._eps
        t = float(t0)
        while t < t1 - eps:
            self.prep_if_pending(y, t)
            k = int(np.floor((t + eps) / period))
            shift = k * period
            leg_end = min(t1, (k + 1) * period)
            # split at the schedule breakpoints inside this leg
            inner = shift + self.schedule.times
            cuts = inner[(inner > t + eps) & (inner < leg_end - eps)]
            a = t
            for b in list(cuts) + [leg_end]:
                self.stepper.advance(y, a, b, t_shift=shift)
                a = b
            t = leg_end
        return y


@dataclass
class Trajectory:
    """Sampled observables (and optionally states) of one evolution."""

    times: np.ndarray
    observables: dict[str, np.ndarray]
    schedule: Schedule = field(repr=False)
    states: list | None = field(default=None, repr=False)

    def __getitem__(self, key: str) -> np.ndarray:
        return self.observables[key]


def _observable_pack(space: SystemSpace):
    nvec = space.photon_numbers()
    tags = {
        "p_ground": basis_state(space, 0, 0, 0).data,
        "p_excited": basis_state(space, 0, 1, 1).data,
        "p_singlet1": singlet_state(space, 1).data,
        "p_singlet0": singlet_state(space, 0).data,
    }
    return nvec, tags


def evolve(space: SystemSpace, initial: QuantumState, schedule: Schedule,
           lindblad: LindbladSpec, t_span: tuple[float, float],
           output_grid=None, *, rtol: float = 1e-8, atol: float = 1e-10,
           store_states: bool = False, backend: str | None = None) -> Trajectory:
    """Integrate the master equation and sample observables on a grid.

    Records populations of the protocol's tagged states, the photon
    number, the outgoing flux kappa_c(t) <n>(t) and the trace.  Samples
    falling on interior period boundaries are taken before the
    preparation event of the next period; the event at t_span[0] itself
    (if any) is applied before the first sample.  Raises
    _kernels.IntegrationError when the trace drifts beyond 1e-6.
    """
    t0, t1 = map(float, t_span)
    if output_grid is None:
        output_grid = np.arange(t0, t1 + 1e-9, 0.25)
    grid = np.asarray(output_grid, dtype=float)
    if grid[0] < t0 - 1e-12 or grid[-1] > t1 + 1e-12:
        raise ValueError("output grid must lie inside t_span")

    pp = PeriodicPropagator(space, schedule, lindblad, rtol=rtol, atol=atol,
                            backend=backend)
    y = initial.to_density().data[None, :, :].copy()
    pp.prep_if_pending(y, t0)
    nvec, tags = _observable_pack(space)
    out = {k: np.empty(len(grid)) for k in
           ("n", "flux", "trace", *tags.keys())}
    states = [] if store_states else None

    t = t0
    for j, ts in enumerate(grid):
        if ts > t:
            pp.advance(y, t, ts)
            t = ts
        rho = y[0]
        tr = np.trace(rho).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise _kernels.IntegrationError(
                f"trace drifted to {tr} at t={ts}")
        diag = np.einsum("ii->i", rho).real
        out["trace"][j] = tr
        out["n"][j] = float(diag @ nvec)
        out["flux"][j] = out["n"][j] * schedule.kappa_c(ts)
        for name, vec in tags.items():
            out[name][j] = float((vec.conj() @ (rho @ vec)).real)
        if store_states:
            states.append(rho.copy())
    return Trajectory(times=grid, observables=out, schedule=schedule,
                      states=states)


# ---------------------------------------------------------------------------
# protocol-level drivers


@dataclass
class ProtocolResult:
    trajectory: Trajectory
    period: float
    windows: dict                  # name -> (t0, t1) within one period
    efficiencies: list             # per period: {"first": eta1, "second": eta2}
    reset_fidelities: list         # per period: fidelity to |0,dn,dn> at the end
    fits: dict | None = None       # waveform fits of the first period


def emission_efficiency(traj: Trajectory, window: tuple[float, float]) -> float:
    """eta = integral of kappa_c(t) <n>(t) over the window (a probability)."""
    t0, t1 = window
    t = traj.times
    if t0 < t[0] - 1e-9 or t1 > t[-1] + 1e-9:
        raise ValueError("window outside trajectory range")
    flux = traj["flux"]
    grid = t[(t >= t0 - 1e-12) & (t <= t1 + 1e-12)]
    vals = flux[(t >= t0 - 1e-12) & (t <= t1 + 1e-12)]
    # close partially covered endpoints by linear interpolation
    if grid[0] > t0 + 1e-12:
        grid = np.concatenate([[t0], grid])
        vals = np.concatenate([[np.interp(t0, t, flux)], vals])
    if grid[-1] < t1 - 1e-12:
        grid = np.concatenate([grid, [t1]])
        vals = np.concatenate([vals, [np.interp(t1, t, flux)]])
    return float(np.trapezoid(vals, grid))


def run_protocol(space: SystemSpace, config, periods: int = 1, *,
                 stark: bool = False, store_states: bool = False,
                 backend: str | None = None) -> ProtocolResult:
    """Evolve the full photon-source timeline for the given number of periods."""
    if periods < 1:
        raise ValueError("periods must be >= 1")
    schedule = stark_protocol_schedule(config) if stark else protocol_schedule(config)
    lindblad = LindbladSpec.from_config(config)
    period = schedule.period
    grid = np.arange(0.0, periods * period + 1e-9, config.traj_dt)
    traj = evolve(space, basis_state(space, 0, 0, 0), schedule, lindblad,
                  (0.0, periods * period), grid, rtol=config.rtol,
                  atol=config.atol, store_states=store_states, backend=backend)

    w1 = config.emission_window1
    w2 = config.emission_window2
    efficiencies, resets = [], []
    ground = basis_state(space, 0, 0, 0).data
    for k in range(periods):
        off = k * period
        efficiencies.append({
            "first": emission_efficiency(traj, (w1[0] + off, w1[1] + off)),
            "second": emission_efficiency(traj, (w2[0] + off, w2[1] + off)),
        })
        j_end = int(np.argmin(np.abs(traj.times - (off + period))))
        resets.append(float(traj["p_ground"][j_end]))

    fits = {}
    sel1 = (traj.times >= w1[0]) & (traj.times <= w1[1])
    sel2 = (traj.times >= w2[0]) & (traj.times <= w2[1])
    try:
        fits["first"] = fit_waveform(traj.times[sel1], traj["flux"][sel1],
                                     "exponential")
        fits["second"] = fit_waveform(traj.times[sel2], traj["flux"][sel2],
                                      "gaussian")
    except DegenerateFitError:
        fits = None
    return ProtocolResult(trajectory=traj, period=period,
                          windows={"first": w1, "second": w2},
                          efficiencies=efficiencies, reset_fidelities=resets,
                          fits=fits)


def stark_fast_transfer(space: SystemSpace, config, *, output_dt: float = 0.1,
                        backend: str | None = None):
    """Fidelity vs time along the Stark-assisted fast first transfer.

    Returns (times, fidelity to the co-moving dark state, final value).
    """
    schedule = stark_protocol_schedule(config)
    lindblad = LindbladSpec.from_config(config)
    t_end = config.stark_t_ramp1
    grid = np.arange(0.0, t_end + 1e-9, output_dt)
    traj = evolve(space, basis_state(space, 0, 0, 0), schedule, lindblad,
                  (0.0, t_end), grid, rtol=config.rtol, atol=config.atol,
                  store_states=True, backend=backend)
    fids = np.empty(len(grid))
    for j, ts in enumerate(grid):
        params = params_from_coefficients(schedule.coefficients_at(ts))
        target = dark_state(space, params).state
        fids[j] = fidelity(QuantumState(space, "density", traj.states[j],
                                        validate=False), target)
    return grid, fids, float(fids[-1])


# ---------------------------------------------------------------------------
# waveform fits


class DegenerateFitError(RuntimeError):
    pass


@dataclass(frozen=True)
class FitResult:
    model: str
    params: dict
    rms_residual: float
    peak: float

    @property
    def relative_rms(self) -> float:
        return self.rms_residual / self.peak


def fit_waveform(times, values, model: str) -> FitResult:
    """Least-squares fit of a photon flux waveform.

    'exponential': A exp(-kappa (t - t_start)); 'gaussian':
    A exp(-(t-t0)^2 / (2 s^2)).  Raises DegenerateFitError when the data
    cannot constrain the parameters.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.size < 4:
        raise DegenerateFitError("need at least 4 samples")
    peak = float(v.max())
    if peak <= 0:
        raise DegenerateFitError("waveform is empty")
    try:
        if model == "exponential":
            tref = t[0]

            def f(x, amp, kappa):
                return amp * np.exp(-kappa * (x - tref))

            pos = v > peak * 1e-6
            slope = np.polyfit(t[pos], np.log(v[pos]), 1)[0]
            p0 = (peak, max(-slope, 1e-4))
            popt, _ = curve_fit(f, t, v, p0=p0, maxfev=10000)
            params = {"amplitude": float(popt[0]), "kappa": float(popt[1]),
                      "t_ref": float(tref)}
        elif model == "gaussian":

            def f(x, amp, t0, s):
                return amp * np.exp(-((x - t0) ** 2) / (2 * s ** 2))

            w = v / v.sum()
            t0_guess = float(w @ t)
            s_guess = float(np.sqrt(w @ (t - t0_guess) ** 2))
            popt, _ = curve_fit(f, t, v, p0=(peak, t0_guess, max(s_guess, 1e-3)),
                                maxfev=10000)
            params = {"amplitude": float(popt[0]), "t_peak": float(popt[1]),
                      "sigma": float(abs(popt[2]))}
        else:
            raise ValueError(f"unknown fit model {model!r}")
    except (RuntimeError, np.linalg.LinAlgError, TypeError) as exc:
        raise DegenerateFitError(str(exc)) from exc
    resid = v - f(t, *popt)
    return FitResult(model=model, params=params,
                     rms_residual=float(np.sqrt(np.mean(resid ** 2))),
                     peak=peak)

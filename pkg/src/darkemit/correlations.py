"""Two-time photon correlations via the quantum regression theorem.

For the Markovian master equation, <A^dag(t) M(t+tau) A(t)> follows from
propagating the conditioned operator A rho(t) A^dag (or A rho(t) for
first-order coherence) forward by tau under the same time-ordered
generator, then tracing with the late-time observable.  One sweep over
the measurement period yields the raw cavity correlators; the detected
(transmission-line) quantities are obtained by gating with the output
coupler profile kappa_c(t), which is also how the two emission windows
are routed into separate channels.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .dynamics import LindbladSpec, PeriodicPropagator, evolve
from .hilbert import QuantumState, SystemSpace, annihilator, basis_state, number_op
from .models import Schedule, protocol_schedule
from . import _kernels

__all__ = [
    "CorrelationGrid",
    "MeritReport",
    "CorrelationData",
    "two_time_correlator",
    "compute_correlation_data",
    "hbt_g2",
    "channel_separated_g2",
    "hom_correlation",
    "indistinguishability",
]

SKIP_NORM = 1e-12
PEAK_PROMINENCE = 0.02


@dataclass
class CorrelationGrid:
    """Sampled two-time function G(t, tau) and its t-marginal."""

    t_grid: np.ndarray
    tau_grid: np.ndarray
    values: np.ndarray              # (n_t, n_tau)
    marginal: np.ndarray            # trapezoidal t-integral per tau column
    normalization: float = 1.0      # peak used for normalized views

    @classmethod
    def build(cls, t_grid, tau_grid, values) -> "CorrelationGrid":
        marginal = np.trapezoid(values, t_grid, axis=0)
        return cls(np.asarray(t_grid), np.asarray(tau_grid), values, marginal)

    def normalized_marginal(self) -> np.ndarray:
        return self.marginal / self.normalization


@dataclass
class MeritReport:
    g2_zero: float | None = None
    indistinguishability: float | None = None
    efficiencies: dict = field(default_factory=dict)
    peak_positions: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# regression engine


def _column_sweep(system, schedule, lindblad, space, seeds, observables,
                  horizons, t_start, dt, rtol, atol, backend):
    """Propagate one column's conditioned stack over its tau horizons.

    seeds: (n_seed, d, d) stack ordered by descending horizon (in steps);
    observables: matching (d, d) observable matrices.  Returns one complex
    row of length horizon+1 per seed.
    """
    pp = PeriodicPropagator(space, schedule, lindblad, rtol=rtol, atol=atol,
                            backend=backend, system=system)
    n_seed = len(seeds)
    # Tr(A Y) = A^T (flattened) . Y (flattened): one dot per sample
    obs_flat = [np.ascontiguousarray(ob.T).reshape(-1) for ob in observables]
    rows = [np.zeros(h + 1, dtype=complex) for h in horizons]
    stack = np.ascontiguousarray(seeds)
    for k in range(n_seed):
        rows[k][0] = obs_flat[k] @ stack[k].reshape(-1)
    active = n_seed
    t = t_start
    max_h = horizons[0]
    for j in range(1, max_h + 1):
        pp.advance(stack[:active], t, t_start + j * dt)
        t = t_start + j * dt
        for k in range(active):
            rows[k][j] = obs_flat[k] @ stack[k].reshape(-1)
        while active > 1 and horizons[active - 1] <= j:
            active -= 1
    return rows


def two_time_correlator(space: SystemSpace, schedule: Schedule,
                        lindblad: LindbladSpec, initial: QuantumState,
                        a_op: np.ndarray, obs_op: np.ndarray,
                        t_grid, tau_grid, *, one_sided: bool = False,
                        rtol: float = 1e-8, atol: float = 1e-10,
                        backend: str | None = None) -> CorrelationGrid:
    """<A^dag(t) B(t+tau) A(t)> (or <B(t+tau) A(t)> when one_sided).

    The tau grid must be uniform starting at 0.  The schedule is extended
    periodically beyond its period, including the preparation event.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    tau_grid = np.asarray(tau_grid, dtype=float)
    if tau_grid[0] != 0.0 or len(tau_grid) < 2:
        raise ValueError("tau grid must start at 0 with at least two points")
    dts = np.diff(tau_grid)
    if not np.allclose(dts, dts[0]):
        raise ValueError("tau grid must be uniform")
    dt = float(dts[0])

    base = evolve(space, initial, schedule, lindblad,
                  (min(0.0, t_grid[0]), t_grid[-1]), t_grid,
                  rtol=rtol, atol=atol, store_states=True, backend=backend)
    system = _kernels.compile_system(space, schedule, lindblad)
    values = np.zeros((len(t_grid), len(tau_grid)), dtype=complex)
    a_dag = a_op.conj().T
    horizon = len(tau_grid) - 1
    for i, t_i in enumerate(t_grid):
        rho = base.states[i]
        seed = a_op @ rho if one_sided else a_op @ rho @ a_dag
        rows = _column_sweep(system, schedule, lindblad, space,
                             seed[None, :, :], [obs_op], [horizon],
                             t_i, dt, rtol, atol, backend)
        values[i] = rows[0]
    if not one_sided:
        values = values.real.astype(float)
    return CorrelationGrid.build(t_grid, tau_grid, values)


# ---------------------------------------------------------------------------
# protocol correlation bundle (one sweep serves HBT, HOM and I)


@dataclass
class CorrelationData:
    """Raw regression output for one measured period of the protocol."""

    config: object
    space: SystemSpace
    schedule: Schedule = field(repr=False)
    t_grid: np.ndarray = None          # absolute column times (one period)
    tau_grid: np.ndarray = None        # lags for the photon-pair correlator
    tau_grid_g1: np.ndarray = None     # shorter lags for the coherence
    g2_cav: np.ndarray = None          # <adag(t) adag(t+tau) a(t+tau) a(t)>
    g1_cav: np.ndarray = None          # <adag(t+tau) a(t)>
    times_full: np.ndarray = None      # fine grid covering t and t+tau
    n_full: np.ndarray = None          # <n>(t) on times_full
    gate_full: np.ndarray = None       # kappa_c(t)/kappa_c_on on times_full

    @property
    def dt(self) -> float:
        return float(self.t_grid[1] - self.t_grid[0])

    def full_index(self, t) -> np.ndarray:
        idx = np.rint((np.asarray(t) - self.times_full[0]) / self.dt).astype(int)
        return np.clip(idx, 0, len(self.times_full) - 1)

    def window_indicator(self, which: str, times) -> np.ndarray:
        """Channel routing: 1 inside the named emission window(s), periodic."""
        cfg = self.config
        local = np.asarray(times) % cfg.period
        w1, w2 = cfg.emission_window1, cfg.emission_window2
        in1 = (local >= w1[0]) & (local < w1[1])
        in2 = (local >= w2[0]) & (local < w2[1])
        if which == "first":
            return in1.astype(float)
        if which == "second":
            return in2.astype(float)
        if which == "both":
            return (in1 | in2).astype(float)
        raise ValueError(f"unknown channel {which!r}")


def compute_correlation_data(space: SystemSpace, config, *,
                             backend: str | None = None,
                             n_threads: int = 2) -> CorrelationData:
    """Run the regression sweep for one measured period of the protocol.

    The base trajectory covers warmup_periods + 1 periods plus the tau
    horizon; correlator columns are seeded over the first period after
    warmup.  Column times with no gated emission are skipped (their
    contribution is removed by the coupler gate anyway).
    """
    schedule = protocol_schedule(config)
    lindblad = LindbladSpec.from_config(config)
    period = schedule.period
    dt = config.corr_dt
    n_t = int(round(period / dt))
    t0 = config.warmup_periods * period
    t_grid = t0 + np.arange(n_t) * dt
    n_tau = int(round(config.corr_tau_periods * period / dt))
    tau_grid = np.arange(n_tau + 1) * dt
    span2 = config.emission_window2[1] - config.emission_window2[0]
    span1 = config.emission_window1[1] - config.emission_window1[0]
    n_tau_g1 = int(np.ceil(max(span1, span2) / dt))
    tau_grid_g1 = np.arange(n_tau_g1 + 1) * dt

    t_end = t_grid[-1] + tau_grid[-1] + dt
    times_full = t0 + np.arange(int(round((t_end - t0) / dt)) + 1) * dt
    base = evolve(space, basis_state(space, 0, 0, 0), schedule, lindblad,
                  (0.0, times_full[-1]), np.concatenate([[0.0], times_full]),
                  rtol=config.rtol, atol=config.atol, store_states=True,
                  backend=backend)
    n_full = base["n"][1:]
    gate_full = schedule.kappa_c(times_full) / max(config.kappa_c_on, 1e-300)
    states = base.states[1:]

    system = _kernels.compile_system(space, schedule, lindblad)
    a_mat = annihilator(space).matrix
    ad_mat = a_mat.conj().T
    n_mat = number_op(space).matrix

    g2 = np.zeros((n_t, n_tau + 1))
    g1 = np.zeros((n_t, n_tau_g1 + 1), dtype=complex)

    def work(i):
        rho = states[i]
        n_i = float(np.trace(n_mat @ rho).real)
        if gate_full[i] * n_i < SKIP_NORM:
            return i, None, None
        seeds = np.stack([(a_mat @ rho @ ad_mat) / n_i, (a_mat @ rho) / n_i])
        rows = _column_sweep(system, schedule, lindblad, space, seeds,
                             [n_mat, ad_mat], [n_tau, n_tau_g1],
                             float(t_grid[i]), dt, config.rtol, config.atol,
                             backend)
        return i, n_i * rows[0].real, n_i * rows[1]

    # many tiny BLAS calls: per-call threading only adds overhead here
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        from contextlib import nullcontext

        def threadpool_limits(_):
            return nullcontext()

    with threadpool_limits(1):
        if n_threads > 1:
            with ThreadPoolExecutor(max_workers=n_threads) as ex:
                results = list(ex.map(work, range(n_t)))
        else:
            results = [work(i) for i in range(n_t)]
    for i, row2, row1 in results:
        if row2 is not None:
            g2[i] = row2
            g1[i] = row1

    return CorrelationData(
        config=config, space=space, schedule=schedule,
        t_grid=t_grid, tau_grid=tau_grid, tau_grid_g1=tau_grid_g1,
        g2_cav=g2, g1_cav=g1,
        times_full=times_full, n_full=n_full, gate_full=gate_full,
    )


# ---------------------------------------------------------------------------
# detected-field quantities


def _gate_products(data: CorrelationData, channel: str, tau_grid):
    """(mask over t, mask over t+tau) for the chosen channel routing."""
    t = data.t_grid
    gate_t = data.gate_full[data.full_index(t)] * \
        data.window_indicator(channel, t)
    tt = t[:, None] + np.asarray(tau_grid)[None, :]
    gate_tt = data.gate_full[data.full_index(tt)] * \
        data.window_indicator(channel, tt)
    return gate_t, gate_tt


def hbt_g2(data: CorrelationData, channel: str = "both"):
    """Intensity autocorrelation of the detected stream (HBT).

    Returns (CorrelationGrid, MeritReport); the grid holds the gated
    G2(t, tau), the marginal is normalized to its highest peak.
    """
    gate_t, gate_tt = _gate_products(data, channel, data.tau_grid)
    values = data.g2_cav * gate_t[:, None] * gate_tt
    grid = CorrelationGrid.build(data.t_grid, data.tau_grid, values)
    peaks, positions = _marginal_peaks(grid.tau_grid, grid.marginal)
    grid.normalization = peaks.max() if len(peaks) else grid.marginal.max()
    report = MeritReport(
        g2_zero=float(grid.marginal[0] / grid.normalization),
        peak_positions=positions,
    )
    return grid, report


def channel_separated_g2(data: CorrelationData, channel: str):
    """HBT statistics of one routed output channel."""
    if channel not in ("first", "second"):
        raise ValueError("channel must be 'first' or 'second'")
    return hbt_g2(data, channel)


def _marginal_peaks(tau, marginal):
    scale = marginal.max()
    if scale <= 0:
        return np.array([]), []
    idx, _ = find_peaks(marginal, prominence=PEAK_PROMINENCE * scale)
    return marginal[idx], [float(tau[i]) for i in idx]


def _same_window_domain(data: CorrelationData, channel: str):
    """Indicator over (t, tau<=g1 horizon) of pairs inside one window pass."""
    cfg = data.config
    w = cfg.emission_window1 if channel == "first" else cfg.emission_window2
    local = data.t_grid % cfg.period
    in_w = (local >= w[0]) & (local < w[1])
    remain = w[1] - local                      # allowed lag within the window
    tau = data.tau_grid_g1
    dom = in_w[:, None] & (tau[None, :] < remain[:, None])
    return dom.astype(float)


def indistinguishability(data: CorrelationData, channel: str) -> float:
    """Mode overlap of successive photons of one channel.

    I = integral |<adag(t+tau) a(t)>|^2 / integral <n(t+tau)><n(t)>, both
    over one pass of the channel window (t ordered before t+tau); the
    coupler gate cancels in the ratio up to its brief switching flanks.
    """
    dom = _same_window_domain(data, channel)
    gate_t, gate_tt = _gate_products(data, channel, data.tau_grid_g1)
    w = dom * gate_t[:, None] * gate_tt
    if not w.any():
        raise ValueError(f"channel {channel!r} has no gated emission")
    n_t = data.n_full[data.full_index(data.t_grid)]
    tt = data.t_grid[:, None] + data.tau_grid_g1[None, :]
    n_tt = data.n_full[data.full_index(tt)]
    num = np.abs(data.g1_cav) ** 2 * w
    den = n_t[:, None] * n_tt * w
    num_int = np.trapezoid(np.trapezoid(num, data.tau_grid_g1, axis=1),
                           data.t_grid)
    den_int = np.trapezoid(np.trapezoid(den, data.tau_grid_g1, axis=1),
                           data.t_grid)
    if den_int <= 0:
        raise ValueError(f"channel {channel!r} has no emission")
    return float(num_int / den_int)


def hom_correlation(data: CorrelationData, channel: str):
    """Two-photon interference of one channel with its one-period delay.

    The two beam-splitter inputs are modeled as statistically identical,
    mutually independent copies of the channel stream: within one window
    pass the coincidence density is (G2_s + n n' - |g1_s|^2)/2, while
    pairs from different passes contribute the uncorrelated n n' with the
    single-period intensity tiled periodically.  Normalized to the
    highest peak, like the HBT marginals.
    """
    cfg = data.config
    period = cfg.period
    dom = _same_window_domain(data, channel)
    gate_t, gate_tt = _gate_products(data, channel, data.tau_grid_g1)
    w = dom * gate_t[:, None] * gate_tt

    # channel intensity over one period, tiled
    ind_t = data.window_indicator(channel, data.t_grid)
    n_ch = data.n_full[data.full_index(data.t_grid)] * \
        data.gate_full[data.full_index(data.t_grid)] * ind_t
    tt = data.t_grid[:, None] + data.tau_grid[None, :]
    local_idx = np.rint(((tt - data.t_grid[0]) % period) / data.dt).astype(int)
    local_idx = np.clip(local_idx, 0, len(n_ch) - 1)
    n_tiled = n_ch[local_idx]

    values = n_ch[:, None] * n_tiled  # uncorrelated cross-pass background
    n_short = data.tau_grid_g1.size
    g2_w = data.g2_cav[:, :n_short] * w
    n_t = data.n_full[data.full_index(data.t_grid)]
    tt_s = data.t_grid[:, None] + data.tau_grid_g1[None, :]
    n_tt = data.n_full[data.full_index(tt_s)]
    within = 0.5 * (g2_w + (n_t[:, None] * n_tt) * w
                    - np.abs(data.g1_cav) ** 2 * w)
    values[:, :n_short] = np.where(w > 0, within, values[:, :n_short])

    grid = CorrelationGrid.build(data.t_grid, data.tau_grid, values)
    peaks, positions = _marginal_peaks(grid.tau_grid, grid.marginal)
    grid.normalization = peaks.max() if len(peaks) else max(grid.marginal.max(), 1e-300)
    return grid

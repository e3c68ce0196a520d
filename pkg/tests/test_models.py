import numpy as np
import pytest

from darkemit.config import ProtocolConfig
from darkemit.hilbert import (basis_state, expectation, make_space,
                              parity_operator, sigma_minus)
from darkemit.models import (DriveParams, ModelParams, drive_hamiltonian,
                             hamiltonian, protocol_schedule,
                             stark_protocol_schedule)

from oracles import diagonal_spectrum_oracle

SPACE = make_space(6)


def test_decoupled_excited_state_energy():
    p = ModelParams(delta1=0.8, delta2=0.2, g1=0.0, g2=0.0)
    h = hamiltonian(SPACE, p)
    uu = basis_state(SPACE, 0, 1, 1)
    assert expectation(uu, h) == pytest.approx(1.0, abs=1e-14)


def test_stark_degenerate_ground_family():
    # U1+U2 = omega, delta1+delta2 = omega: every |n,dn,dn> sits at -omega
    p = ModelParams(delta1=0.8, delta2=0.2, g1=0.0, g2=0.0,
                    u1=0.6, u2=0.4, kind="rabi_stark")
    h = hamiltonian(SPACE, p)
    for n in range(SPACE.fock_cutoff + 1):
        ket = basis_state(SPACE, n, 0, 0)
        assert expectation(ket, h) == pytest.approx(-1.0, abs=1e-13)


def test_jc_equals_rabi_minus_counter_rotating():
    rng = np.random.default_rng(3)
    from darkemit.hilbert import annihilator, sigma_plus

    a = annihilator(SPACE).matrix
    ad = a.conj().T
    for _ in range(10):
        d1, d2, g1v, g2v = rng.uniform(0.05, 1.0, size=4)
        rabi = hamiltonian(SPACE, ModelParams(delta1=d1, delta2=d2, g1=g1v, g2=g2v))
        jc = hamiltonian(SPACE, ModelParams(delta1=d1, delta2=d2, g1=g1v,
                                            g2=g2v, kind="jc"))
        cr = np.zeros_like(rabi.matrix)
        for q, g in ((1, g1v), (2, g2v)):
            sp = sigma_plus(SPACE, q).matrix
            sm = sigma_minus(SPACE, q).matrix
            cr += g * (sp @ ad + sm @ a)
        assert np.abs(rabi.matrix - jc.matrix - cr).max() < 1e-12


def test_all_hamiltonians_hermitian_and_parity_conserving():
    rng = np.random.default_rng(7)
    par = parity_operator(SPACE)
    for kind in ("rabi", "jc", "rabi_stark"):
        for _ in range(5):
            d1, d2, g1v, g2v = rng.uniform(0.0, 1.0, size=4)
            u1v, u2v = (rng.uniform(0, 0.5, size=2) if kind == "rabi_stark"
                        else (0.0, 0.0))
            h = hamiltonian(SPACE, ModelParams(delta1=d1, delta2=d2, g1=g1v,
                                               g2=g2v, u1=u1v, u2=u2v, kind=kind))
            assert np.abs(h.matrix - h.matrix.conj().T).max() < 1e-12
            assert h.commutator_norm(par) < 1e-12


def test_g0_spectrum_matches_diagonal_oracle():
    p = ModelParams(delta1=0.7, delta2=0.3, g1=0.0, g2=0.0,
                    u1=0.25, u2=0.15, kind="rabi_stark")
    evals = np.sort(np.linalg.eigvalsh(hamiltonian(SPACE, p).matrix))
    want = diagonal_spectrum_oracle(0.7, 0.3, SPACE.fock_cutoff, 0.25, 0.15)
    assert np.allclose(evals, want, atol=1e-13)


def test_stark_stability_warning():
    with pytest.warns(UserWarning):
        ModelParams(delta1=0.5, delta2=0.5, g1=0.1, g2=0.1,
                    u1=0.7, u2=0.5, kind="rabi_stark")


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(delta1=-0.1, delta2=0.2, g1=0.0, g2=0.0)
    with pytest.raises(ValueError):
        ModelParams(delta1=0.1, delta2=0.2, g1=0.0, g2=0.0, kind="dicke")
    with pytest.raises(ValueError):
        ModelParams(delta1=0.1, delta2=0.2, g1=0.0, g2=0.0, u1=0.3)


def test_drive_window_and_zero_amplitude():
    drive = DriveParams(rabi_amplitude=0.2, wq1=1.6, wq2=0.4, t_on=5.0, t_off=15.0)
    h_out = drive_hamiltonian(SPACE, drive, 20.0)
    assert np.abs(h_out.matrix).max() == 0.0
    h_in = drive_hamiltonian(SPACE, drive, 10.0)
    assert np.abs(h_in.matrix).max() > 0.0
    assert np.abs(h_in.matrix - h_in.matrix.conj().T).max() < 1e-14
    zero = DriveParams(rabi_amplitude=0.0, wq1=1.6, wq2=0.4, t_on=0.0, t_off=1.0)
    assert np.abs(drive_hamiltonian(SPACE, zero, 0.5).matrix).max() == 0.0


def test_drive_params_validation():
    with pytest.raises(ValueError):
        DriveParams(rabi_amplitude=0.1, wq1=1.0, wq2=1.0, t_on=2.0, t_off=1.0)


class TestProtocolSchedule:
    cfg = ProtocolConfig()
    sched = protocol_schedule(cfg)

    def test_start_parameters(self):
        c = self.sched.coefficients_at(0.0)
        assert c["delta1"] == pytest.approx(0.8)
        assert c["delta2"] == pytest.approx(0.2)
        assert c["g1_rabi"] == 0.0
        assert c["kappa_c"] == 0.0

    def test_end_of_first_ramp(self):
        c = self.sched.coefficients_at(self.cfg.t_ramp1)
        assert c["delta1"] == pytest.approx(0.5)
        assert c["delta2"] == pytest.approx(0.5)
        assert c["g1_rabi"] == pytest.approx(self.cfg.g_end)
        assert c["g1_rabi"] == c["g2_rabi"]

    def test_coupler_during_emission(self):
        # kappa_c = 0.1 omega = 1000 kappa_in across the emission window
        w1 = self.cfg.emission_window1
        mid = 0.5 * (w1[0] + w1[1])
        assert self.sched.kappa_c(mid) == pytest.approx(0.1)
        assert self.sched.kappa_c(mid) == pytest.approx(1000 * self.cfg.kappa_in)
        assert self.sched.kappa_c(0.0) == 0.0
        assert self.sched.kappa_c(self.sched.period) == 0.0

    def test_dark_manifold_held_everywhere(self):
        ts = np.linspace(0, self.sched.period, 701)
        d1 = self.sched.value("delta1", ts)
        d2 = self.sched.value("delta2", ts)
        assert np.abs(d1 + d2 - 1.0).max() < 1e-12
        for fam in ("rabi", "jc"):
            gg1 = self.sched.value(f"g1_{fam}", ts)
            gg2 = self.sched.value(f"g2_{fam}", ts)
            assert np.abs(gg1 - gg2).max() < 1e-12

    def test_continuity(self):
        # evaluation is continuous across every breakpoint
        for tb in self.sched.times[1:-1]:
            for slot in ("delta1", "g1_rabi", "g1_jc", "kappa_c"):
                left = self.sched.value(slot, tb - 1e-9)
                right = self.sched.value(slot, tb + 1e-9)
                assert abs(left - right) < 1e-7

    def test_periodic_evaluation(self):
        t = 12.3
        assert self.sched.value("delta1", t) == pytest.approx(
            self.sched.value("delta1", t + self.sched.period))

    def test_derivative_matches_finite_difference(self):
        rng = np.random.default_rng(0)
        for t in rng.uniform(1.0, self.sched.period - 1.0, size=12):
            eps = 1e-6
            for slot in ("delta1", "g1_rabi", "kappa_c"):
                fd = (self.sched.value(slot, t + eps)
                      - self.sched.value(slot, t - eps)) / (2 * eps)
                # skip points straddling a breakpoint
                seg = np.searchsorted(self.sched.times, [t - eps, t + eps])
                if seg[0] != seg[1]:
                    continue
                assert self.sched.derivative(slot, t) == pytest.approx(fd, abs=1e-6)


def test_stark_schedule_holds_u_across_fast_ramp():
    cfg = ProtocolConfig()
    sched = stark_protocol_schedule(cfg)
    for t in np.linspace(0, cfg.stark_t_ramp1, 13):
        assert sched.value("u1", t) == pytest.approx(0.5)
        assert sched.value("u2", t) == pytest.approx(0.5)
    # Stark terms are removed before the JC stage
    w2 = cfg.emission_window2
    assert sched.value("u1", cfg.stark_t_ramp1 + cfg.t_hold) == 0.0


def test_builder_rejects_nonincreasing_times():
    from darkemit.models import ScheduleBuilder

    b = ScheduleBuilder({"omega": 1.0})
    b.ramp_to(5.0, delta1=0.5)
    with pytest.raises(ValueError):
        b.ramp_to(5.0, delta1=0.6)


def test_schedule_dark_state_residual_at_sample_times():
    # along both transfer legs the instantaneous dark state stays an
    # eigenstate of the schedule Hamiltonian at the dark energy
    from darkemit.models import params_from_coefficients
    from darkemit.darkstates import dark_state

    cfg = ProtocolConfig()
    sched = protocol_schedule(cfg)
    space = make_space(8)
    w2 = cfg.emission_window2
    leg1 = np.linspace(0.5, cfg.t_ramp1 - 0.5, 9)
    leg2 = np.linspace(w2[0] + cfg.t_bump / 2, w2[0] + cfg.t_bump + cfg.t_ramp2 - 0.5, 9)
    for t in np.concatenate([leg1, leg2]):
        params = params_from_coefficients(sched.coefficients_at(float(t)))
        ds = dark_state(space, params)
        h = sched.hamiltonian_at(space, float(t)).matrix
        resid = np.linalg.norm(h @ ds.state.data - ds.energy * ds.state.data)
        assert resid < 1e-10, f"t={t}: residual {resid}"

import numpy as np
import pytest

from darkemit._kernels import backend_name, compile_system, get_stepper_class
from darkemit.dynamics import LindbladSpec
from darkemit.hilbert import basis_state, make_space, singlet_state
from darkemit.models import DriveParams, ScheduleBuilder, protocol_schedule
from darkemit.config import ProtocolConfig

SPACE = make_space(6)


def both_backends():
    try:
        compiled = get_stepper_class("compiled")
    except ImportError:
        pytest.skip("compiled backend not built")
    return [compiled, get_stepper_class("python")]


def protocol_system():
    cfg = ProtocolConfig()
    sched = protocol_schedule(cfg)
    lind = LindbladSpec.from_config(cfg)
    return compile_system(SPACE, sched, lind), sched


def test_backend_is_reported():
    assert backend_name() in ("compiled", "python")


def test_coefficient_evaluation_matches_schedule():
    system, sched = protocol_system()
    rng = np.random.default_rng(0)
    for t in rng.uniform(0, sched.period, size=50):
        c = system.coefficients(t)
        want = sched.coefficients_at(t)
        for k, slot in enumerate(("omega", "delta1", "delta2", "g1_rabi",
                                  "g2_rabi", "g1_jc", "g2_jc", "u1", "u2",
                                  "kappa_c")):
            assert c[k] == pytest.approx(want[slot], abs=1e-12)


def test_backends_agree_on_protocol_segment():
    system, _ = protocol_system()
    rho = basis_state(SPACE, 0, 1, 1).density_matrix()[None]
    outs = []
    for cls in both_backends():
        st = cls(system, rtol=1e-9, atol=1e-12)
        y = rho.copy()
        st.advance(y, 0.0, 30.0)
        outs.append(y[0])
    assert np.abs(outs[0] - outs[1]).max() < 1e-9


def test_backends_agree_with_drive_and_batch():
    drive = DriveParams(rabi_amplitude=0.15, wq1=1.6, wq2=0.4,
                        t_on=0.0, t_off=12.0)
    b = ScheduleBuilder({"omega": 1.0, "delta1": 0.8, "delta2": 0.2})
    sched = b.hold_until(40.0).build()
    sched.drive = drive
    lind = LindbladSpec(kappa_in=1e-3, gamma1=1e-4, gamma2=2e-4,
                        gamma_phi1=3e-4, gamma_phi2=1e-4)
    system = compile_system(SPACE, sched, lind)
    stack = np.stack([basis_state(SPACE, 0, 0, 0).density_matrix(),
                      singlet_state(SPACE, 1).density_matrix(),
                      basis_state(SPACE, 2, 1, 0).density_matrix()])
    outs = []
    for cls in both_backends():
        st = cls(system, rtol=1e-9, atol=1e-12)
        y = stack.copy()
        st.advance(y, 0.0, 15.0)
        outs.append(y.copy())
    assert np.abs(outs[0] - outs[1]).max() < 1e-9


def test_backends_agree_on_nonhermitian_seed():
    # conditioned operators a rho are not Hermitian; the generator is linear
    system, _ = protocol_system()
    rng = np.random.default_rng(4)
    seed = rng.normal(size=(1, SPACE.dim, SPACE.dim)) + \
        1j * rng.normal(size=(1, SPACE.dim, SPACE.dim))
    seed /= np.abs(seed).max()
    outs = []
    for cls in both_backends():
        st = cls(system, rtol=1e-9, atol=1e-12)
        y = seed.astype(complex).copy()
        st.advance(y, 100.0, 130.0)
        outs.append(y[0])
    assert np.abs(outs[0] - outs[1]).max() < 1e-8


def test_linearity_of_propagation():
    system, _ = protocol_system()
    cls = both_backends()[0]
    rng = np.random.default_rng(9)
    a = rng.normal(size=(SPACE.dim, SPACE.dim)) * (1 + 0.5j)
    b = rng.normal(size=(SPACE.dim, SPACE.dim)) * (0.3 - 1j)
    stack = np.stack([a, b, 0.25 * a + 0.5 * b]).astype(complex)
    st = cls(system, rtol=1e-10, atol=1e-13)
    st.advance(stack, 0.0, 20.0)
    assert np.abs(0.25 * stack[0] + 0.5 * stack[1] - stack[2]).max() < 1e-8


def test_step_statistics_and_persistence():
    system, _ = protocol_system()
    cls = both_backends()[0]
    st = cls(system, rtol=1e-8, atol=1e-10)
    y = basis_state(SPACE, 0, 1, 1).density_matrix()[None].copy()
    st.advance(y, 0.0, 10.0)
    assert st.stats["steps"] > 0
    assert st.stats["rhs_evals"] > st.stats["steps"]
    h_after = st.h
    assert h_after > 1e-6


def test_tolerance_controls_accuracy():
    # halving the tolerance changes the result less than the tolerance
    system, _ = protocol_system()
    cls = both_backends()[0]
    results = {}
    for rtol in (1e-6, 1e-8, 1e-10):
        st = cls(system, rtol=rtol, atol=rtol * 1e-2)
        y = basis_state(SPACE, 0, 1, 1).density_matrix()[None].copy()
        st.advance(y, 0.0, 40.0)
        results[rtol] = y[0]
    err_loose = np.abs(results[1e-6] - results[1e-10]).max()
    err_tight = np.abs(results[1e-8] - results[1e-10]).max()
    assert err_tight < err_loose
    assert err_tight < 1e-6

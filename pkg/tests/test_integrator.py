import math

import numpy as np
import pytest

from hkc.core import Kind, Params, WaveVector
from hkc.diagnostics import lyapunov_ball, nusselt_series
from hkc.dynamics import compile_model
from hkc.hierarchy import build_hkc
from hkc.integrator import (BlowUpError, IntegratorConfig, StepSizeError,
                            Trajectory, _integrate_python, concat_trajectories,
                            integrate, step_embedded, write_trajectory_csv)

K1 = 1 / math.sqrt(2)


def test_config_validation():
    IntegratorConfig()
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(dt_init=1.0, dt_max=0.1)
    with pytest.raises(ValueError):
        IntegratorConfig(t_final=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(sample_stride=0)


def test_step_scalar_exponential():
    x1, err = step_embedded(lambda x: -x, np.array([1.0]), 0.0, 0.1)
    assert abs(x1[0] - math.exp(-0.1)) <= 1e-8
    assert abs(err[0]) < 1e-6


def test_step_rotating_shear_pair_closed_form():
    P, S = 10.0, 3.0
    model = compile_model(build_hkc(1), Params(R=50.0, S=S, P=P, k1=K1))
    x = np.zeros(6)
    x[0], x[2] = 1.0, 0.5  # the decoupled shear pair
    dt = 0.002
    xn, _ = step_embedded(model, x, 0.0, dt)
    z = complex(1.0, 0.5) * np.exp(-P * dt) * np.exp(-1j * P * S * dt)
    assert abs(xn[0] - z.real) <= 1e-8
    assert abs(xn[2] - z.imag) <= 1e-8


def test_embedded_error_order():
    # quintic-in-time manufactured problem: the embedded difference is the
    # local error of the 4th-order solution, which scales as dt^5
    def f(x):
        return np.array([5.0 * x[1] ** 4, 1.0])

    errs = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        _, e = step_embedded(f, np.array([0.0, 1.0]), 0.0, dt)
        errs.append(abs(e[0]))
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(abs(r - 5.0) < 0.1 for r in rates)


def test_integrate_decay_below_onset():
    model = compile_model(build_hkc(1), Params(R=5.0, S=0.0, P=10.0, k1=K1))
    x0 = np.full(6, 0.1)
    traj = integrate(model, x0, IntegratorConfig(t_final=50.0))
    assert np.linalg.norm(traj.states[-1]) <= 1e-6 * np.linalg.norm(x0)
    norms = np.linalg.norm(traj.states, axis=1)
    late = norms[len(norms) // 2:]
    assert np.all(np.diff(late) <= 1e-12)


def test_integrate_chaotic_regime_stays_in_ball():
    spec = build_hkc(1)
    params = Params(R=180.0, S=0.0, P=10.0, k1=K1)
    model = compile_model(spec, params)
    x0 = np.array([0.0, 1.0, 0.0, 0.5, 0.3, -0.2])
    traj = integrate(model, x0, IntegratorConfig(t_final=100.0))
    assert np.all(np.isfinite(traj.states))
    # once inside the attracting ball the weighted norm stays bounded
    h0 = [lyapunov_ball(spec, s, params)["weighted_h0"] for s in traj.states[::200]]
    assert max(h0[len(h0) // 2:]) <= 2.0 * max(h0)
    th_block = traj.states[:, 4:6]
    assert np.max(np.abs(th_block)) < 1e3


def test_integrate_deterministic():
    model = compile_model(build_hkc(1), Params(R=180.0, S=1.0, P=10.0, k1=K1))
    x0 = np.array([0.0, 1.0, 0.0, 0.5, 0.3, -0.2])
    cfg = IntegratorConfig(t_final=5.0)
    a = integrate(model, x0, cfg)
    b = integrate(model, x0, cfg)
    assert np.array_equal(a.times, b.times)
    assert np.array_equal(a.states, b.states)
    assert a.n_accepted == b.n_accepted and a.n_rejected == b.n_rejected


def test_kernel_and_python_paths_agree_short_horizon():
    model = compile_model(build_hkc(1), Params(R=28.0, S=0.5, P=10.0, k1=K1))
    x0 = np.array([0.05, 0.2, -0.1, 0.15, 0.01, -0.02])
    cfg = IntegratorConfig(t_final=0.5)
    fast = integrate(model, x0, cfg)
    slow = _integrate_python(model.rhs, x0, cfg, 0.0)
    assert len(fast) == len(slow)
    assert np.max(np.abs(fast.states - slow.states)) < 1e-11


def test_sample_stride():
    model = compile_model(build_hkc(1), Params(R=100.0, S=0.0, P=10.0, k1=K1))
    x0 = np.full(6, 0.1)
    dense = integrate(model, x0, IntegratorConfig(t_final=2.0))
    strided = integrate(model, x0, IntegratorConfig(t_final=2.0, sample_stride=5))
    assert len(strided) < len(dense)
    assert strided.times[-1] == dense.times[-1]
    assert np.allclose(strided.states[-1], dense.states[-1])


def test_blowup_carries_partial_trajectory():
    # the truncation missing the stratified temperature mode is linearly
    # unstable and unbounded: the classical failure this family repairs
    broken = build_hkc(1).without(Kind.THETA, WaveVector(0, 2))
    model = compile_model(broken, Params(R=180.0, S=0.0, P=10.0, k1=K1),
                          override=True)
    with pytest.raises(BlowUpError) as err:
        integrate(model, np.full(5, 0.1), IntegratorConfig(t_final=80.0))
    assert err.value.trajectory is not None
    assert len(err.value.trajectory) > 10
    assert np.all(np.isfinite(err.value.state))


def test_stiffness_error():
    def f(x):
        return np.array([-1e12 * (x[0] - math.sin(x[1])), 1.0])

    with pytest.raises(StepSizeError):
        _integrate_python(f, np.array([2.0, 0.0]),
                          IntegratorConfig(t_final=1.0, dt_min=1e-4, dt_init=1e-3), 0.0)


def test_tolerance_halving_changes_nu_weakly():
    spec = build_hkc(1)
    params = Params(R=180.0, S=0.0, P=10.0, k1=K1)
    model = compile_model(spec, params)
    x0 = np.array([0.0, 1.0, 0.0, 0.5, 0.3, -0.2])
    nus = []
    for tol in (1e-8, 5e-9):
        traj = integrate(model, x0, IntegratorConfig(rel_tol=tol, abs_tol=tol,
                                                     t_final=60.0))
        nus.append(nusselt_series(traj, spec, params.k1).values[-1])
    assert abs(nus[1] - nus[0]) <= 0.05 * abs(nus[0])


def test_concat_trajectories():
    model = compile_model(build_hkc(1), Params(R=100.0, S=0.0, P=10.0, k1=K1))
    x0 = np.full(6, 0.1)
    first = integrate(model, x0, IntegratorConfig(t_final=1.0))
    second = integrate(model, first.final_state, IntegratorConfig(t_final=1.0),
                       t0=float(first.times[-1]))
    joined = concat_trajectories(first, second)
    assert joined.times[-1] == pytest.approx(2.0)
    assert np.all(np.diff(joined.times) > 0)
    whole = integrate(model, x0, IntegratorConfig(t_final=2.0))
    assert np.allclose(joined.states[-1], whole.states[-1], atol=1e-7)


def test_trajectory_csv(tmp_path):
    spec = build_hkc(1)
    model = compile_model(spec, Params(R=100.0, S=0.0, P=10.0, k1=K1))
    traj = integrate(model, np.full(6, 0.1), IntegratorConfig(t_final=0.5))
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,u_0_1,u_1_1,w_0_1,w_1_1,th_0_2,th_1_1"
    assert len(lines) == 1 + len(traj)
    row = [float(v) for v in lines[-1].split(",")]
    assert row[0] == pytest.approx(0.5)

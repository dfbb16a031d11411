import math

import numpy as np
import pytest

from conftest import gauss_mesh, locked_modes

from hkc.basis import GridSpec, eval_theta_basis, mesh, quadrature_weights, velocity_basis_gradient
from hkc.core import Kind, ModeIndex, Params, WaveVector, km_norm, normalizer_eta
from hkc.diagnostics import (ScalarSeries, balance_residuals, balance_scales,
                             converged, energy_functionals, lyapunov_ball,
                             nusselt_from_flux, nusselt_series,
                             write_diagnostics_csv)
from hkc.dynamics import compile_model, find_equilibrium
from hkc.hierarchy import build_hkc
from hkc.integrator import IntegratorConfig, Trajectory, integrate

K1 = 1 / math.sqrt(2)
PARAMS = Params(R=180.0, S=7.0, P=10.0, k1=K1)


def random_state_trajectory(spec, rng, n=40, scale=20.0):
    X = rng.normal(scale=scale, size=(n, spec.dimension))
    return Trajectory(np.arange(float(n)), X, PARAMS, spec)


def test_energy_functionals_zero_state():
    spec = build_hkc(3)
    out = energy_functionals(spec, np.zeros(spec.dimension), PARAMS)
    assert out["kinetic"] == out["theta_variance"] == out["potential"] == 0.0
    assert out["heat_flux"] == 0.0
    assert np.all(out["vorticity_mean"] == 0)


def test_heat_flux_sign():
    spec = build_hkc(1)
    x = np.zeros(6)
    x[spec.slot(ModeIndex(Kind.U, WaveVector(1, 1), 1))] = 1.0
    x[spec.slot(ModeIndex(Kind.THETA, WaveVector(1, 1), 1))] = 1.0
    out = energy_functionals(spec, x, PARAMS)
    assert out["heat_flux"] == pytest.approx(-K1 / math.sqrt(K1**2 + 1), rel=1e-12)
    assert out["heat_flux"] == pytest.approx(-1 / math.sqrt(3), rel=1e-12)


def test_potential_matches_fine_quadrature():
    spec = build_hkc(3)
    state = np.random.default_rng(11).normal(size=spec.dimension)
    out = energy_functionals(spec, state, PARAMS)
    # non-trigonometric weight (1 - x3/pi): use a dense trapezoid in x3
    grid = GridSpec(16, 20001)
    X1, X3 = mesh(grid, K1)
    W = quadrature_weights(grid, K1)
    theta = np.zeros_like(X1)
    for slot, n in enumerate(spec.layout):
        if n.kind is Kind.THETA and state[slot] != 0.0:
            theta += state[slot] * eval_theta_basis(n, (X1, X3), K1)
    quad = float(np.sum((1.0 - X3 / math.pi) * theta * W))
    assert out["potential"] == pytest.approx(quad, abs=1e-8)


def test_vorticity_mean_spot_value():
    spec = build_hkc(1)
    x = np.zeros(6)
    x[spec.slot(ModeIndex(Kind.W, WaveVector(0, 1), 2))] = 2.0
    x[spec.slot(ModeIndex(Kind.U, WaveVector(0, 1), 2))] = -1.0
    out = energy_functionals(spec, x, PARAMS)
    pref = 4.0 / math.sqrt(K1)
    assert out["vorticity_mean"][0] == pytest.approx(pref * 2.0)
    assert out["vorticity_mean"][1] == pytest.approx(pref * 1.0)


def test_vorticity_production_matches_quadrature(rng):
    # the quadratic form behind the mean-vorticity balance, pair by pair,
    # against a quadrature rule that integrates odd sines exactly enough
    X1, X3, W = gauss_mesh(32, 60, K1)
    modes = locked_modes(3, kinds=(Kind.U, Kind.W))
    vg = {n: velocity_basis_gradient(n, (X1, X3), K1) for n in modes}

    def production(a, b):
        c1 = -vg[a][1, 1]
        c3 = vg[a][1, 0]
        g = vg[b]
        return np.array([float(np.sum((c1 * g[c, 0] + c3 * g[c, 1]) * W))
                         for c in range(3)])

    checked = 0
    for a in modes:
        for b in modes:
            quad = production(a, b)
            if a.kind is Kind.W and b.kind is Kind.W:
                assert np.max(np.abs(quad + production(b, a))) < 1e-10
                continue
            if (a.kind is Kind.W and b.kind is Kind.U and a.m.m1 == b.m.m1
                    and a.m.m1 > 0 and (a.m.m3 + b.m.m3) % 2 == 1
                    and a.p1 != b.p1):
                coeff = ((-1) ** a.p1 * (4 * K1 * a.m.m1 / math.pi)
                         * normalizer_eta(a.m) * normalizer_eta(b.m)
                         * b.m.m3 / km_norm(b.m, K1))
                assert quad[0] == pytest.approx(coeff, abs=1e-10)
                checked += 1
            else:
                assert np.max(np.abs(quad)) < 1e-10
    assert checked >= 10


@pytest.mark.parametrize("M", [1, 3, 6, 10])
def test_balance_residuals_vanish_on_consistent_models(M, rng):
    spec = build_hkc(M)
    model = compile_model(spec, PARAMS)
    traj = random_state_trajectory(spec, rng)
    res = balance_residuals(model, traj)
    sc = balance_scales(model, traj)
    assert np.max(res.kinetic.values / sc["kinetic"]) < 1e-9
    assert np.max(res.variance.values / sc["variance"]) < 1e-9
    assert np.max(res.potential.values / sc["potential"]) < 1e-9
    assert np.max(res.vorticity_x.values / sc["vorticity"]) < 1e-9
    assert np.max(res.vorticity_y.values / sc["vorticity"]) < 1e-9


def test_residuals_scale_linearly_with_state(rng):
    # algebraic identities: rounding residuals grow linearly in magnitude,
    # with no hidden truncation floor
    spec = build_hkc(3)
    model = compile_model(spec, PARAMS)
    base = rng.normal(size=(10, spec.dimension))
    r_small = balance_residuals(model, Trajectory(np.arange(10.0), base, PARAMS, spec))
    r_big = balance_residuals(model, Trajectory(np.arange(10.0), 1e6 * base, PARAMS, spec))
    small = np.median(r_small.kinetic.values) + 1e-300
    big = np.median(r_big.kinetic.values)
    assert big <= 1e20 * small  # cubic scaling of the terms, not worse


def test_broken_model_potential_residual(rng):
    spec = build_hkc(1)
    broken = spec.without(Kind.THETA, WaveVector(0, 2))
    model = compile_model(broken, PARAMS, override=True)
    X = rng.normal(scale=20.0, size=(40, broken.dimension))
    traj = Trajectory(np.arange(40.0), X, PARAMS, broken)
    res = balance_residuals(model, traj)
    sc = balance_scales(model, traj)
    assert np.median(res.potential.values / sc["potential"]) > 1e-3
    # kinetic and variance balances never needed the stratified mode
    assert np.max(res.kinetic.values / sc["kinetic"]) < 1e-9
    assert np.max(res.variance.values / sc["variance"]) < 1e-9


def test_broken_shear_vorticity_residual(rng):
    broken = build_hkc(3).without(Kind.W, WaveVector(0, 3))
    params = Params(R=180.0, S=7.0, P=10.0, k1=K1)
    model = compile_model(broken, params, override=True)
    X = rng.normal(scale=20.0, size=(40, broken.dimension))
    traj = Trajectory(np.arange(40.0), X, params, broken)
    res = balance_residuals(model, traj)
    sc = balance_scales(model, traj)
    worst = max(np.median(res.vorticity_x.values / sc["vorticity"]),
                np.median(res.vorticity_y.values / sc["vorticity"]))
    assert worst > 1e-6


def test_nusselt_zero_trajectory():
    spec = build_hkc(1)
    traj = Trajectory(np.linspace(0, 10, 50), np.zeros((50, 6)), PARAMS, spec)
    nu = nusselt_series(traj, spec, K1)
    assert np.all(nu.values == 1.0)


def test_nusselt_fixed_point_value():
    spec = build_hkc(1)
    params = Params(R=100.0, S=0.0, P=10.0, k1=K1)
    model = compile_model(spec, params)
    guess = np.zeros(6)
    guess[1], guess[5], guess[4] = -60.0, 5.0, -6.0
    fp = find_equilibrium(model, guess, tol=1e-13)
    n = 30
    traj = Trajectory(np.linspace(0, 20, n), np.tile(fp, (n, 1)), params, spec)
    nu = nusselt_series(traj, spec, K1)
    th02 = fp[4]
    expected = 1.0 - (math.sqrt(K1) * 2.0 / math.pi) * th02
    assert nu.values[-1] == pytest.approx(expected, rel=1e-12)
    # equilibrium transport exceeds conduction and matches the flux form
    assert expected > 1.0
    assert nusselt_from_flux(traj, spec, params) == pytest.approx(expected, rel=1e-10)


def test_converged_rule():
    t = np.linspace(0, 10, 101)
    assert converged(ScalarSeries(t, np.full(101, 2.0)))
    wob = 2.0 + 0.2 * np.sin(t)
    assert not converged(ScalarSeries(t, wob))
    # borderline: tail deviation exactly under the threshold passes
    vals = np.full(101, 2.0)
    vals[50:] = 2.0 + 0.038 * np.sign(np.sin(9 * t[50:]))
    series = ScalarSeries(t, vals)
    tail = vals[t >= 5.0]
    assert np.std(tail) <= 0.02 * abs(vals[-1])
    assert converged(series)
    with pytest.raises(ValueError):
        converged(ScalarSeries(np.arange(3.0), np.ones(3)))


def test_lyapunov_ball_values():
    spec = build_hkc(1)
    params = Params(R=180.0, S=0.0, P=10.0, k1=K1)
    out = lyapunov_ball(spec, np.zeros(6), params)
    assert out["rho_sq"] == pytest.approx(4 * math.pi**2 / K1, rel=1e-12)
    # centered off the origin: the zero state carries the shift energy
    l_coeff = 2.0 / (math.sqrt(K1) * 2.0)
    assert out["weighted_h0"] == pytest.approx(0.5 * (2 * math.pi * l_coeff) ** 2,
                                               rel=1e-12)
    with pytest.raises(ValueError):
        lyapunov_ball(spec.without(Kind.THETA, WaveVector(0, 2)), np.zeros(5), params)


def test_lyapunov_ball_monotone_outside(rng):
    spec = build_hkc(1)
    params = Params(R=180.0, S=0.0, P=10.0, k1=K1)
    model = compile_model(spec, params)
    x0 = rng.normal(scale=300.0, size=6)
    traj = integrate(model, x0, IntegratorConfig(t_final=2.0))
    h0 = np.array([lyapunov_ball(spec, s, params)["weighted_h0"] for s in traj.states])
    deficit = np.array([lyapunov_ball(spec, s, params)["weighted_h1_deficit"]
                        for s in traj.states])
    dh = np.diff(h0)
    strict = deficit[:-1] > 1e-6
    assert np.all(dh[strict] < 0)


def test_diagnostics_csv(tmp_path):
    spec = build_hkc(1)
    params = Params(R=100.0, S=0.0, P=10.0, k1=K1)
    model = compile_model(spec, params)
    traj = integrate(model, np.full(6, 0.1), IntegratorConfig(t_final=1.0))
    path = tmp_path / "diag.csv"
    write_diagnostics_csv(model, traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ("t,kinetic,variance,potential,heat_flux,nu,"
                       "res_kin,res_var,res_pot,res_vort1,res_vort2")
    assert len(lines) == 1 + len(traj)

"""Scalar functionals along trajectories: energies, balances, heat transport.

The balance residuals are algebraic identities, not finite differences:
the time derivative of each functional is its gradient dotted with the
analytic right-hand side, and the comparison side is assembled from
spectral sums.  Balance-consistent models therefore produce residuals at
rounding level regardless of integrator tolerances, while truncations
missing a required stratified mode show order-one defects.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import Kind, Params, km_norm, km_norm_sq, normalizer_eta
from .dynamics import CompiledModel, rhs_batch
from .hierarchy import ModelSpec, criteria_report
from .integrator import Trajectory


@dataclass
class ScalarSeries:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values lengths differ")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return self.times.size


@dataclass
class BalanceResiduals:
    kinetic: ScalarSeries
    variance: ScalarSeries
    potential: ScalarSeries
    vorticity_x: ScalarSeries
    vorticity_y: ScalarSeries


@lru_cache(maxsize=64)
def _index(spec: ModelSpec, k1: float):
    """Slot bookkeeping reused by every functional on a given model."""
    layout = spec.layout
    vel = np.array([i for i, n in enumerate(layout) if n.kind.is_velocity], dtype=np.intp)
    th = np.array([i for i, n in enumerate(layout) if n.kind is Kind.THETA], dtype=np.intp)
    ksq = np.array([km_norm_sq(n.m, k1) for n in layout])

    slot_of = {(n.kind, n.m.as_tuple()): i for i, n in enumerate(layout)}
    fi_u, fi_t, fc = [], [], []
    for i, n in enumerate(layout):
        if n.kind is Kind.U and n.m.m1 > 0 and n.m.m3 > 0:
            j = slot_of.get((Kind.THETA, n.m.as_tuple()))
            if j is not None:
                fi_u.append(i)
                fi_t.append(j)
                fc.append((-1) ** n.p1 * k1 * n.m.m1 / km_norm(n.m, k1))
    flux = (np.array(fi_u, dtype=np.intp), np.array(fi_t, dtype=np.intp), np.array(fc))

    pot_slots, pot_c, pot_m3 = [], [], []
    for i, n in enumerate(layout):
        if n.kind is Kind.THETA and n.m.m1 == 0:
            pot_slots.append(i)
            pot_c.append(2.0 / (math.sqrt(k1) * n.m.m3))
            pot_m3.append(n.m.m3)
    potential = (np.array(pot_slots, dtype=np.intp), np.array(pot_c), np.array(pot_m3))

    shear_u, shear_w, shear_m3 = [], [], []
    for n in layout:
        if n.kind is Kind.U and n.m.m1 == 0 and n.m.m3 % 2 == 1:
            j = slot_of.get((Kind.W, n.m.as_tuple()))
            shear_u.append(slot_of[(Kind.U, n.m.as_tuple())])
            shear_w.append(-1 if j is None else j)
            shear_m3.append(n.m.m3)
    for n in layout:  # transverse shear modes without an in-plane partner
        if n.kind is Kind.W and n.m.m1 == 0 and n.m.m3 % 2 == 1:
            if (Kind.U, n.m.as_tuple()) not in slot_of:
                shear_u.append(-1)
                shear_w.append(slot_of[(Kind.W, n.m.as_tuple())])
                shear_m3.append(n.m.m3)
    shear = (np.array(shear_u, dtype=np.intp), np.array(shear_w, dtype=np.intp),
             np.array(shear_m3))

    # mean-vorticity production <(curl u . grad) u>: quadratic form over
    # ordered pairs (transverse advector, advected velocity mode) sharing an
    # interior horizontal wave number, with opposite phases and odd m3 sum.
    # Transverse-transverse pairs cancel pairwise and are skipped.
    vq_comp, vq_a, vq_b, vq_c = [], [], [], []
    for i, na in enumerate(layout):
        if na.kind is not Kind.W or na.m.m1 == 0:
            continue
        for j, nb in enumerate(layout):
            if nb.kind is not Kind.U:
                continue
            if nb.m.m1 != na.m.m1 or (na.m.m3 + nb.m.m3) % 2 == 0 or na.p1 == nb.p1:
                continue
            coeff = ((-1) ** na.p1 * (4.0 * k1 * na.m.m1 / math.pi)
                     * normalizer_eta(na.m) * normalizer_eta(nb.m)
                     * nb.m.m3 / km_norm(nb.m, k1))
            vq_comp.append(0)
            vq_a.append(i)
            vq_b.append(j)
            vq_c.append(coeff)
    vort_quad = (np.array(vq_comp, dtype=np.intp), np.array(vq_a, dtype=np.intp),
                 np.array(vq_b, dtype=np.intp), np.array(vq_c))
    return vel, th, ksq, flux, potential, shear, vort_quad


def _heat_flux(spec, k1, X):
    _, _, _, (iu, it, fc), _, _, _ = _index(spec, k1)
    if iu.size == 0:
        return np.zeros(X.shape[0])
    return (fc * X[:, iu] * X[:, it]).sum(axis=1)


def energy_functionals(spec: ModelSpec, state, params: Params) -> dict:
    """Kinetic energy, temperature variance, potential functional, vertical
    heat flux and the mean-vorticity vector of one state."""
    x = np.asarray(state, dtype=float)
    if x.shape != (len(spec.layout),):
        raise ValueError("state length does not match layout")
    k1 = params.k1
    vel, th, _, _, (ps, pc, _), (su, sw, _), _ = _index(spec, k1)
    X = x[None, :]
    pref = 4.0 / math.sqrt(k1)
    wsum = sum(x[j] for j in sw if j >= 0)
    usum = sum(x[j] for j in su if j >= 0)
    return {
        "kinetic": 0.5 * float(np.sum(x[vel] ** 2)),
        "theta_variance": 0.5 * float(np.sum(x[th] ** 2)),
        "potential": float(np.sum(pc * x[ps])),
        "heat_flux": float(_heat_flux(spec, k1, X)[0]),
        "vorticity_mean": np.array([pref * wsum, -pref * usum]),
    }


def _vorticity_production(spec, k1, X):
    _, _, _, _, _, _, (comp, ia, ib, c) = _index(spec, k1)
    qx = np.zeros(X.shape[0])
    if ia.size:
        qx += (c * X[:, ia] * X[:, ib]).sum(axis=1)
    return qx  # the transverse component of the production integral is zero


def balance_residuals(model: CompiledModel, traj: Trajectory) -> BalanceResiduals:
    """Absolute residual of each balance identity at every sample."""
    spec, params = model.spec, model.params
    k1, P, R, S = params.k1, params.P, params.R, params.S
    X = np.asarray(traj.states, dtype=float)
    t = np.asarray(traj.times, dtype=float)
    F = rhs_batch(model, X)
    vel, th, ksq, _, (ps, pc, pm3), (su, sw, sm3), _ = _index(spec, k1)
    flux = _heat_flux(spec, k1, X)

    kin_lhs = (X[:, vel] * F[:, vel]).sum(axis=1)
    kin_rhs = -P * (ksq[vel] * X[:, vel] ** 2).sum(axis=1) + P * R * flux

    var_lhs = (X[:, th] * F[:, th]).sum(axis=1)
    var_rhs = -(ksq[th] * X[:, th] ** 2).sum(axis=1) + flux

    pot_lhs = (pc * F[:, ps]).sum(axis=1) if ps.size else np.zeros(len(t))
    pot_diss = -(2.0 * pm3 / math.sqrt(k1) * X[:, ps]).sum(axis=1) if ps.size else 0.0
    pot_rhs = pot_diss - flux / math.pi

    pref = 4.0 / math.sqrt(k1)

    def shear_sum(A, slots, weights=None):
        out = np.zeros(A.shape[0])
        for idx, j in enumerate(slots):
            if j >= 0:
                w = 1.0 if weights is None else weights[idx]
                out += w * A[:, j]
        return out

    m3sq = sm3.astype(float) ** 2
    vx_lhs = pref * shear_sum(F, sw)
    vx_rhs = (-P * pref * shear_sum(X, sw, m3sq)
              + _vorticity_production(spec, k1, X)
              - P * S * pref * shear_sum(X, su))
    vy_lhs = -pref * shear_sum(F, su)
    vy_rhs = (P * pref * shear_sum(X, su, m3sq)
              - P * S * pref * shear_sum(X, sw))

    def series(lhs, rhs_):
        return ScalarSeries(t, np.abs(lhs - rhs_))

    return BalanceResiduals(
        kinetic=series(kin_lhs, kin_rhs),
        variance=series(var_lhs, var_rhs),
        potential=series(pot_lhs, pot_rhs),
        vorticity_x=series(vx_lhs, vx_rhs),
        vorticity_y=series(vy_lhs, vy_rhs),
    )


def balance_scales(model: CompiledModel, traj: Trajectory) -> dict:
    """Magnitude of the terms entering each balance, for relative residuals."""
    spec, params = model.spec, model.params
    k1, P, R = params.k1, params.P, params.R
    X = np.asarray(traj.states, dtype=float)
    vel, th, ksq, _, (ps, pc, pm3), (su, sw, sm3), _ = _index(spec, k1)
    flux = np.abs(_heat_flux(spec, k1, X))
    kin = P * (ksq[vel] * X[:, vel] ** 2).sum(axis=1) + P * R * flux
    var = (ksq[th] * X[:, th] ** 2).sum(axis=1) + flux
    pot = ((np.abs(2.0 * pm3 / math.sqrt(k1) * X[:, ps])).sum(axis=1) if ps.size else 0.0) \
        + flux / math.pi
    pref = 4.0 / math.sqrt(k1)
    vort = np.zeros(X.shape[0])
    for idx, j in enumerate(sw):
        if j >= 0:
            vort += P * pref * sm3[idx] ** 2 * np.abs(X[:, j])
    for j in su:
        if j >= 0:
            vort += P * pref * np.abs(X[:, j])
    vort += np.abs(_vorticity_production(spec, k1, X))
    floor = 1e-30
    return {"kinetic": kin + floor, "variance": var + floor,
            "potential": pot + floor, "vorticity": vort + floor}


def nusselt_series(traj: Trajectory, spec: ModelSpec, k1: float) -> ScalarSeries:
    """Finite-time heat transport from the stratified temperature modes.

    Nu(t) = 1 - sum over stratified modes of sqrt(k1)*m3/pi times the
    running time average of the mode amplitude; the t = 0 value is 1.
    """
    if len(traj.times) == 0:
        raise ValueError("empty trajectory")
    t = np.asarray(traj.times, dtype=float)
    X = np.asarray(traj.states, dtype=float)
    _, _, _, _, (ps, _, pm3), _, _ = _index(spec, k1)
    nu = np.ones(len(t))
    if ps.size and len(t) > 1:
        elapsed = t - t[0]
        dt = np.diff(elapsed)
        for slot, m3 in zip(ps, pm3):
            theta = X[:, slot]
            cum = np.concatenate([[0.0], np.cumsum(0.5 * dt * (theta[1:] + theta[:-1]))])
            avg = np.zeros_like(cum)
            avg[1:] = cum[1:] / elapsed[1:]
            nu -= (math.sqrt(k1) * m3 / math.pi) * avg
    return ScalarSeries(t, nu)


def nusselt_from_flux(traj: Trajectory, spec: ModelSpec, params: Params) -> float:
    """Heat transport from the time-averaged vertical convective flux."""
    t = np.asarray(traj.times, dtype=float)
    flux = _heat_flux(spec, params.k1, np.asarray(traj.states, dtype=float))
    if len(t) < 2:
        return 1.0 + params.k1 / (2.0 * math.pi ** 2) * float(flux[0])
    mean = np.trapezoid(flux, t) / (t[-1] - t[0])
    return 1.0 + params.k1 / (2.0 * math.pi ** 2) * float(mean)


def converged(nu: ScalarSeries, threshold: float = 0.02) -> bool:
    """Fluctuation test: the standard deviation of the series over the second
    half of the time window must not exceed ``threshold`` times the final
    cumulative value."""
    if len(nu) < 4:
        raise ValueError("need at least 4 samples to judge convergence")
    t_mid = 0.5 * (nu.times[0] + nu.times[-1])
    tail = nu.values[nu.times >= t_mid]
    return float(np.std(tail)) <= threshold * abs(float(nu.values[-1]))


def lyapunov_ball(spec: ModelSpec, state, params: Params) -> dict:
    """Attracting-ball functional: the weighted norm that decays outside a ball.

    Returns the shifted weighted H0 functional, the dissipation deficit
    (H1 part minus the constant source rho^2) and rho^2 itself.  The H0
    functional decreases along trajectories whenever the deficit is
    positive, which is what makes the ball forward invariant.
    """
    report = criteria_report(spec, rotating=params.S != 0.0)
    if not report.energy_ok:
        raise ValueError("attracting-ball functional needs an energy-consistent model")
    x = np.asarray(state, dtype=float)
    k1, P, R = params.k1, params.P, params.R
    vel, th, ksq, _, (ps, pc, _), _, _ = _index(spec, k1)
    l_coeffs = np.zeros(len(spec.layout))
    l_coeffs[ps] = pc
    shifted2 = x[th] + 2.0 * math.pi * l_coeffs[th]
    shifted1 = x[th] + math.pi * l_coeffs[th]
    h0 = 0.5 * (np.sum(x[vel] ** 2) / (P * R) + np.sum(shifted2 ** 2))
    h1 = np.sum(ksq[vel] * x[vel] ** 2) / R + np.sum(ksq[th] * shifted1 ** 2)
    rho_sq = (4.0 * math.pi ** 2 / k1) * ps.size
    return {"weighted_h0": float(h0), "weighted_h1_deficit": float(h1 - rho_sq),
            "rho_sq": float(rho_sq)}


def write_diagnostics_csv(model: CompiledModel, traj: Trajectory, path,
                          banner: str | None = None) -> None:
    spec, params = model.spec, model.params
    X = np.asarray(traj.states, dtype=float)
    res = balance_residuals(model, traj)
    nu = nusselt_series(traj, spec, params.k1)
    with open(path, "w") as fh:
        if banner:
            fh.write(banner)
        fh.write("t,kinetic,variance,potential,heat_flux,nu,"
                 "res_kin,res_var,res_pot,res_vort1,res_vort2\n")
        for i, t in enumerate(traj.times):
            fn = energy_functionals(spec, X[i], params)
            row = (t, fn["kinetic"], fn["theta_variance"], fn["potential"],
                   fn["heat_flux"], nu.values[i], res.kinetic.values[i],
                   res.variance.values[i], res.potential.values[i],
                   res.vorticity_x.values[i], res.vorticity_y.values[i])
            fh.write(",".join("%.17g" % v for v in row) + "\n")

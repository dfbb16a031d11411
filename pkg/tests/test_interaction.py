import math

import numpy as np
import pytest

from conftest import locked_modes

from hkc.basis import (GridSpec, eval_theta_basis, eval_velocity_basis, mesh,
                       quadrature_weights, theta_basis_gradient,
                       velocity_basis_gradient)
from hkc.core import (Kind, ModeIndex, Params, WaveVector, box_volume_norm,
                      km_norm, normalizer_eta)
from hkc.interaction import (Triad, coeff_theta, coeff_velocity,
                             is_compatible, linear_couplings, sign_coeff, zeta)

K1 = 1 / math.sqrt(2)


def _hkc1_triad():
    return Triad(
        ModeIndex(Kind.THETA, WaveVector(0, 2), 1),
        ModeIndex(Kind.U, WaveVector(1, 1), 1),
        ModeIndex(Kind.THETA, WaveVector(1, 1), 1),
    )


def test_is_compatible_cases():
    assert is_compatible(_hkc1_triad())
    bad_m3 = Triad(
        ModeIndex(Kind.THETA, WaveVector(0, 2), 1),
        ModeIndex(Kind.U, WaveVector(1, 1), 1),
        ModeIndex(Kind.THETA, WaveVector(1, 3), 2),
    )
    assert not is_compatible(bad_m3)
    w_advector = Triad(
        ModeIndex(Kind.THETA, WaveVector(0, 2), 1),
        ModeIndex(Kind.W, WaveVector(1, 1), 1),
        ModeIndex(Kind.THETA, WaveVector(1, 1), 1),
    )
    assert not is_compatible(w_advector)


def test_sign_coeff_cases():
    assert sign_coeff((2, 1, 1), 4) == 1    # pattern S^{m'', m, m'}: 1 != 2+1
    assert sign_coeff((0, 1, 1), 4) == -1   # 1 == 0+1
    assert sign_coeff((2, 1, 1), 2) == -1   # 2 == 1+1
    assert sign_coeff((5, 2, 3), 1) == 1


def test_zeta_values():
    t = _hkc1_triad()
    assert zeta(t, 3) == pytest.approx(-2.0, abs=0)
    with pytest.raises(ValueError):
        zeta(t, 2)
    incompatible = Triad(
        ModeIndex(Kind.THETA, WaveVector(0, 2), 1),
        ModeIndex(Kind.U, WaveVector(1, 1), 1),
        ModeIndex(Kind.THETA, WaveVector(1, 3), 2),
    )
    with pytest.raises(ValueError):
        zeta(incompatible, 3)


def test_energy_neutrality_of_coefficient_sums(rng):
    # the advective coupling moves energy between modes without creating it:
    # the cubic contraction vanishes separately on each variable block
    from hkc.hierarchy import build_hkc

    spec = build_hkc(3)
    layout = spec.layout
    advs = [n for n in layout if n.kind is Kind.U]
    pairs = [(n, npp) for n in layout for npp in layout if npp.kind is n.kind]
    for _ in range(5):
        x = {n: rng.normal() for n in layout}
        total_theta = 0.0
        total_vel = 0.0
        for n, npp in pairs:
            for np_ in advs:
                t = Triad(n, np_, npp)
                if n.kind is Kind.THETA:
                    total_theta += x[n] * coeff_theta(t, K1) * x[np_] * x[npp]
                else:
                    total_vel += x[n] * coeff_velocity(t, K1) * x[np_] * x[npp]
        scale = sum(abs(v) for v in x.values()) ** 3
        assert abs(total_theta) <= 1e-10 * scale
        assert abs(total_vel) <= 1e-10 * scale


def test_coeff_theta_hkc1_value_and_antisymmetry():
    t = _hkc1_triad()
    V = box_volume_norm(K1)
    expected = -K1 / (math.sqrt(2 * (K1**2 + 1)) * V)
    assert coeff_theta(t, K1) == pytest.approx(expected, rel=1e-14)
    swapped = Triad(t.n_dprime, t.n_prime, t.n)
    assert coeff_theta(swapped, K1) == pytest.approx(-expected, rel=1e-14)


def test_coeff_zero_when_incompatible():
    t = Triad(
        ModeIndex(Kind.W, WaveVector(2, 2), 1),
        ModeIndex(Kind.U, WaveVector(1, 1), 1),
        ModeIndex(Kind.W, WaveVector(2, 2), 1),
    )
    assert coeff_velocity(t, K1) == 0.0


@pytest.fixture(scope="module")
def oracle_fields():
    grid = GridSpec(32, 33)
    X1, X3 = mesh(grid, K1)
    W = quadrature_weights(grid, K1)
    modes = locked_modes(3)
    vf, vg, tf, tg = {}, {}, {}, {}
    for n in modes:
        if n.kind is Kind.THETA:
            tf[n] = eval_theta_basis(n, (X1, X3), K1)
            tg[n] = theta_basis_gradient(n, (X1, X3), K1)
        else:
            vf[n] = eval_velocity_basis(n, (X1, X3), K1)
            vg[n] = velocity_basis_gradient(n, (X1, X3), K1)
    return W, vf, vg, tf, tg


def test_oracle_equivalence_theta(oracle_fields):
    W, vf, vg, tf, tg = oracle_fields
    thetas = sorted(tf, key=lambda n: (n.m.m1, n.m.m3))
    advs = sorted(vf, key=lambda n: (n.kind.value, n.m.m1, n.m.m3))
    n_checked = 0
    for n in thetas:
        for npp in thetas:
            for np_ in advs:
                if np_.kind is not Kind.U:
                    continue
                t = Triad(n, np_, npp)
                adv = vf[np_]
                g = tg[npp]
                quad = float(np.sum(tf[n] * (adv[0] * g[0] + adv[2] * g[1]) * W))
                assert coeff_theta(t, K1) == pytest.approx(quad, abs=1e-8)
                n_checked += 1
    assert n_checked > 500


def test_oracle_equivalence_velocity(oracle_fields):
    W, vf, vg, tf, tg = oracle_fields
    vels = sorted(vf, key=lambda n: (n.kind.value, n.m.m1, n.m.m3))
    n_checked = 0
    for n in vels:
        for npp in vels:
            if npp.kind is not n.kind:
                continue
            for np_ in vels:
                if np_.kind is not Kind.U:
                    continue
                t = Triad(n, np_, npp)
                adv = vf[np_]
                g = vg[npp]
                integrand = sum(vf[n][c] * (adv[0] * g[c, 0] + adv[2] * g[c, 1])
                                for c in range(3))
                quad = float(np.sum(integrand * W))
                assert coeff_velocity(t, K1) == pytest.approx(quad, abs=1e-8)
                n_checked += 1
    assert n_checked > 2000


def test_velocity_antisymmetry():
    modes = [n for n in locked_modes(3) if n.kind is Kind.W]
    advs = [n for n in locked_modes(3) if n.kind is Kind.U]
    for n in modes:
        for npp in modes:
            for np_ in advs:
                f = coeff_velocity(Triad(n, np_, npp), K1)
                b = coeff_velocity(Triad(npp, np_, n), K1)
                assert f == pytest.approx(-b, abs=1e-12)


def test_theta_antisymmetry():
    modes = [n for n in locked_modes(3) if n.kind is Kind.THETA]
    advs = [n for n in locked_modes(3) if n.kind is Kind.U]
    for n in modes:
        for npp in modes:
            for np_ in advs:
                f = coeff_theta(Triad(n, np_, npp), K1)
                b = coeff_theta(Triad(npp, np_, n), K1)
                assert f == pytest.approx(-b, abs=1e-12)


def test_linear_couplings_hkc1():
    params = Params(R=100.0, S=3.0, P=10.0, k1=K1)
    norm = math.sqrt(K1**2 + 1)
    u11 = ModeIndex(Kind.U, WaveVector(1, 1), 1)
    terms = linear_couplings(u11, params)
    assert terms["diffusion"] == pytest.approx(-10.0 * (K1**2 + 1))
    partner, coeff = terms["buoyancy"]
    assert partner == ModeIndex(Kind.THETA, WaveVector(1, 1), 1)
    assert coeff == pytest.approx(-10.0 * 100.0 * K1 / norm)
    partner, coeff = terms["coriolis"]
    assert partner == ModeIndex(Kind.W, WaveVector(1, 1), 1)
    assert coeff == pytest.approx(10.0 * 3.0 / norm)

    w11 = ModeIndex(Kind.W, WaveVector(1, 1), 1)
    terms = linear_couplings(w11, params)
    partner, coeff = terms["coriolis"]
    assert partner == u11
    assert coeff == pytest.approx(-10.0 * 3.0 / norm)
    assert terms["buoyancy"] is None

    th02 = ModeIndex(Kind.THETA, WaveVector(0, 2), 1)
    terms = linear_couplings(th02, params)
    assert terms["diffusion"] == pytest.approx(-4.0)
    assert terms["buoyancy"] is None
    assert terms["coriolis"] is None

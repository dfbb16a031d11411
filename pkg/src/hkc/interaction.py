"""Closed-form linear and quadratic coupling coefficients.

The advective nonlinearity projected on the trigonometric basis couples
triads (n, n', n'') where n' is the advecting in-plane velocity mode and
n'' carries the same kind as the output n.  A triad interacts only when
its wave numbers satisfy convolution conditions, its phase triple matches
one of four sign patterns and its components satisfy c' = 1, c'' = c.
When they do, the coefficient is a product of a normalization ``C`` and a
signed integer combination ``zeta`` assembled from the sign coefficients
below.  Every value produced here is cross-checked against the quadrature
oracle in the test suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import (Kind, ModeIndex, WaveVector, box_volume_norm, km_norm,
                   km_norm_sq, mod2, normalizer_eta)

# The four admissible phase triples (odd parity patterns), 1-indexed.
_XI = {
    1: (1, 1, 1),
    2: (1, 2, 2),
    3: (2, 1, 2),
    4: (2, 2, 1),
}
_XI_INDEX = {v: k for k, v in _XI.items()}

# Phase shifts applied to a triple before the x1 sign lookup; the index
# cycles mod 4 in {1..4}.
_RHO_SHIFT = {
    1: (1, 1, 0),
    2: (1, 0, 1),
    3: (0, 1, 1),
    4: (0, 0, 0),
}


@dataclass(frozen=True)
class Triad:
    """Interaction triple: output mode, advecting velocity, advected mode."""

    n: ModeIndex
    n_prime: ModeIndex
    n_dprime: ModeIndex


@dataclass(frozen=True)
class CoefficientRecord:
    triad: Triad
    value: float


def _convolves(m: int, mp: int, mpp: int) -> bool:
    return m == mp + mpp or m == abs(mp - mpp)


def phase_pattern(phi: tuple[int, int, int]):
    """Index of the sign pattern a phase triple belongs to, or None."""
    return _XI_INDEX.get(tuple(mod2(p) for p in phi))


def is_compatible(t: Triad) -> bool:
    """True iff all four compatibility clauses hold for the triad."""
    m, mp, mpp = t.n.m, t.n_prime.m, t.n_dprime.m
    if not (_convolves(m.m1, mp.m1, mpp.m1) and _convolves(m.m3, mp.m3, mpp.m3)):
        return False
    if phase_pattern((t.n.p1, t.n_prime.p1, t.n_dprime.p1)) is None:
        return False
    return t.n_prime.c == 1 and t.n_dprime.c == t.n.c


def sign_coeff(mu: tuple[int, int, int], xi_index: int) -> int:
    """Sign produced by the product of three sinusoids with wave triple mu.

    Pattern 1 gives +1; patterns 2..4 give -1 exactly when the
    distinguished wave number equals the sum of the other two.
    """

    def S(a1, a2, a3):
        return -1 if a1 == a2 + a3 else 1

    m, mp, mpp = mu
    if xi_index == 1:
        return 1
    if xi_index == 2:
        return S(m, mp, mpp)
    if xi_index == 3:
        return S(mp, mpp, m)
    if xi_index == 4:
        return S(mpp, m, mp)
    raise ValueError(f"sign pattern index out of range: {xi_index}")


def _sign_for_phase(mu, phi) -> int:
    idx = phase_pattern(phi)
    if idx is None:
        raise ValueError(f"phase triple {phi} matches no sign pattern")
    return sign_coeff(mu, idx)


def zeta(t: Triad, j: int) -> float:
    """Signed wave-number combination entering the coupling coefficients.

    Only j in {1, 3} occurs (j+1 in {2, 4}); other values are unreachable
    in the projected equations and are rejected.
    """
    if j not in (1, 3):
        raise ValueError(f"zeta index must be 1 or 3, got {j}")
    if not is_compatible(t):
        raise ValueError("zeta of an incompatible triad")
    n, np_, npp = t.n, t.n_prime, t.n_dprime
    mu1 = (n.m.m1, np_.m.m1, npp.m.m1)
    mu3 = (n.m.m3, np_.m.m3, npp.m.m3)
    phi = (n.p1, np_.p1, npp.p1)

    def shifted(phi, r):
        return tuple(mod2(p + d) for p, d in zip(phi, _RHO_SHIFT[r]))

    jn = j + 1  # wraps inside {1..4} because j in {1, 3}
    term1 = ((-1) ** npp.p1) * np_.m.m3 * npp.m.m1 \
        * _sign_for_phase(mu1, shifted(phi, j)) * sign_coeff(mu3, j)
    term2 = ((-1) ** np_.p1) * np_.m.m1 * npp.m.m3 \
        * _sign_for_phase(mu1, shifted(phi, jn)) * sign_coeff(mu3, jn)
    return float(term1 + term2)


def _norm_const(t: Triad, k1: float) -> float:
    etas = normalizer_eta(t.n.m) * normalizer_eta(t.n_prime.m) * normalizer_eta(t.n_dprime.m)
    return k1 / (4.0 * etas * km_norm(t.n_prime.m, k1) * box_volume_norm(k1))


def coeff_theta(t: Triad, k1: float) -> float:
    """Interaction coefficient for a temperature output mode (0 if incompatible)."""
    if t.n.kind is not Kind.THETA or t.n_dprime.kind is not Kind.THETA:
        raise ValueError("coeff_theta needs theta output and advected modes")
    if t.n_prime.kind is not Kind.U:
        return 0.0
    if not is_compatible(t):
        return 0.0
    return _norm_const(t, k1) * zeta(t, 3)


def coeff_velocity(t: Triad, k1: float) -> float:
    """Interaction coefficient for a velocity output mode (0 if incompatible)."""
    if t.n.kind is Kind.THETA or t.n_dprime.kind is Kind.THETA:
        raise ValueError("coeff_velocity needs velocity output and advected modes")
    if t.n_prime.kind is not Kind.U:
        return 0.0
    if not is_compatible(t):
        return 0.0
    C = _norm_const(t, k1)
    if t.n.c == 2:
        return -C * zeta(t, 1)
    m, mpp = t.n.m, t.n_dprime.m
    num = (-m.m3 * mpp.m3 * zeta(t, 1)
           + (-1) ** (t.n.p1 + t.n_dprime.p1) * k1 ** 2 * m.m1 * mpp.m1 * zeta(t, 3))
    return C * num / (km_norm(m, k1) * km_norm(mpp, k1))


def interaction_coeff(t: Triad, k1: float) -> float:
    if t.n.kind is Kind.THETA:
        return coeff_theta(t, k1)
    return coeff_velocity(t, k1)


def linear_couplings(n: ModeIndex, params) -> dict:
    """Linear terms of the projected equation for mode n.

    Returns the diffusion rate, the buoyancy coefficient together with its
    partner mode (zero/None when m1 = 0 or the mode is transverse), and the
    Coriolis partner/coefficient (None when it vanishes identically).
    """
    m, k1 = n.m, params.k1
    ksq = km_norm_sq(m, k1)
    out: dict = {
        "diffusion": -ksq if n.kind is Kind.THETA else -params.P * ksq,
        "buoyancy": None,
        "coriolis": None,
    }
    if m.m1 > 0 and n.c == 1:
        base = (-1) ** n.p1 * k1 * m.m1 / km_norm(m, k1)
        if n.kind is Kind.THETA:
            out["buoyancy"] = (ModeIndex(Kind.U, m, n.p1), base)
        else:
            out["buoyancy"] = (ModeIndex(Kind.THETA, m, n.p1), params.P * params.R * base)
    if n.kind is not Kind.THETA and m.m3 > 0:
        partner_kind = Kind.W if n.kind is Kind.U else Kind.U
        coeff = -((-1) ** n.c) * params.P * params.S * m.m3 / km_norm(m, k1)
        out["coriolis"] = (ModeIndex(partner_kind, m, n.p1), coeff)
    return out

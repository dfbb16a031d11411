"""Trigonometric basis evaluation, field reconstruction and quadrature.

The quadrature here is the numerical oracle used to validate every closed
form in :mod:`hkc.interaction` and :mod:`hkc.diagnostics`: a tensor-product
trapezoidal rule that is exact (to rounding) for trigonometric polynomials
once the grid resolves the Nyquist condition ``n1 > 2*max(m1)``,
``n3 > 2*max(m3)``.  Under-resolved grids are the caller's responsibility.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Kind, ModeIndex, box_volume_norm, km_norm, normalizer_eta


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid: n1 points on [0, 2*pi/k1) periodic, n3 on [0, pi]."""

    n1: int
    n3: int

    def __post_init__(self):
        if self.n1 < 4 or self.n3 < 4:
            raise ValueError(f"grid too coarse: n1={self.n1}, n3={self.n3} (need >= 4)")


def x1_nodes(grid: GridSpec, k1: float) -> np.ndarray:
    return np.arange(grid.n1) * (2.0 * math.pi / k1 / grid.n1)


def x3_nodes(grid: GridSpec) -> np.ndarray:
    return np.linspace(0.0, math.pi, grid.n3)


def mesh(grid: GridSpec, k1: float) -> tuple[np.ndarray, np.ndarray]:
    """Meshgrid (X1, X3) with shape (n1, n3)."""
    return np.meshgrid(x1_nodes(grid, k1), x3_nodes(grid), indexing="ij")


def quadrature_weights(grid: GridSpec, k1: float) -> np.ndarray:
    """Tensor weights: rectangle rule in periodic x1, trapezoid in x3."""
    w1 = np.full(grid.n1, 2.0 * math.pi / k1 / grid.n1)
    h3 = math.pi / (grid.n3 - 1)
    w3 = np.full(grid.n3, h3)
    w3[0] *= 0.5
    w3[-1] *= 0.5
    return np.outer(w1, w3)


def _h(m: int, p1: int, y):
    """The sinusoid family: p1=1 -> cos(m y), p1=2 -> sin(m y)."""
    return np.cos(m * y) if p1 % 2 == 1 else np.sin(m * y)


def _dh(m: int, p1: int, y):
    """d/dy of ``_h``."""
    return -m * np.sin(m * y) if p1 % 2 == 1 else m * np.cos(m * y)


def eval_theta_basis(n: ModeIndex, x, k1: float):
    """Temperature basis function at points x = (x1, x3)."""
    if n.kind is not Kind.THETA:
        raise ValueError(f"not a temperature mode: {n}")
    x1, x3 = x
    pref = normalizer_eta(n.m) / box_volume_norm(k1)
    return pref * _h(n.m.m1, n.p1, k1 * np.asarray(x1)) * np.sin(n.m.m3 * np.asarray(x3))


def eval_velocity_basis(n: ModeIndex, x, k1: float):
    """Divergence-free velocity basis field (3 components) at x = (x1, x3)."""
    if n.kind is Kind.THETA:
        raise ValueError(f"not a velocity mode: {n}")
    x1 = k1 * np.asarray(x[0], dtype=float)
    x3 = np.asarray(x[1], dtype=float)
    m1, m3, p1 = n.m.m1, n.m.m3, n.p1
    eta = normalizer_eta(n.m)
    V = box_volume_norm(k1)
    zero = np.zeros(np.broadcast(x1, x3).shape)
    if n.kind is Kind.W:
        v2 = (eta / V) * _h(m1, p1 + 1, x1) * np.cos(m3 * x3)
        return np.stack([zero, v2 + zero, zero])
    norm = km_norm(n.m, k1)
    v1 = (eta / (norm * V)) * m3 * _h(m1, p1 + 1, x1) * np.cos(m3 * x3)
    v3 = (eta / (norm * V)) * (-1) ** p1 * k1 * m1 * _h(m1, p1, x1) * np.sin(m3 * x3)
    return np.stack([v1 + zero, zero, v3 + zero])


def theta_basis_gradient(n: ModeIndex, x, k1: float):
    """(d/dx1, d/dx3) of the temperature basis function."""
    if n.kind is not Kind.THETA:
        raise ValueError(f"not a temperature mode: {n}")
    x1 = np.asarray(x[0], dtype=float)
    x3 = np.asarray(x[1], dtype=float)
    m1, m3, p1 = n.m.m1, n.m.m3, n.p1
    pref = normalizer_eta(n.m) / box_volume_norm(k1)
    g1 = pref * k1 * _dh(m1, p1, k1 * x1) * np.sin(m3 * x3)
    g3 = pref * m3 * _h(m1, p1, k1 * x1) * np.cos(m3 * x3)
    return np.stack([g1 + 0.0 * x3, g3 + 0.0 * x1])


def velocity_basis_gradient(n: ModeIndex, x, k1: float):
    """Gradients of the velocity basis: shape (3 components, 2 directions, ...)."""
    if n.kind is Kind.THETA:
        raise ValueError(f"not a velocity mode: {n}")
    x1 = np.asarray(x[0], dtype=float)
    x3 = np.asarray(x[1], dtype=float)
    m1, m3, p1 = n.m.m1, n.m.m3, n.p1
    eta = normalizer_eta(n.m)
    V = box_volume_norm(k1)
    shape = np.broadcast(x1, x3).shape
    out = np.zeros((3, 2) + shape)
    if n.kind is Kind.W:
        pref = eta / V
        out[1, 0] = pref * k1 * _dh(m1, p1 + 1, k1 * x1) * np.cos(m3 * x3)
        out[1, 1] = pref * _h(m1, p1 + 1, k1 * x1) * (-m3) * np.sin(m3 * x3)
        return out
    pref = eta / (km_norm(n.m, k1) * V)
    sgn = (-1) ** p1
    out[0, 0] = pref * m3 * k1 * _dh(m1, p1 + 1, k1 * x1) * np.cos(m3 * x3)
    out[0, 1] = pref * m3 * _h(m1, p1 + 1, k1 * x1) * (-m3) * np.sin(m3 * x3)
    out[2, 0] = pref * sgn * k1 * m1 * k1 * _dh(m1, p1, k1 * x1) * np.sin(m3 * x3)
    out[2, 1] = pref * sgn * k1 * m1 * _h(m1, p1, k1 * x1) * m3 * np.cos(m3 * x3)
    return out


def _evaluate(fn, X1, X3):
    if isinstance(fn, np.ndarray):
        return fn
    return np.asarray(fn(X1, X3))


def quadrature_inner_product(fn_a, fn_b, grid: GridSpec, k1: float) -> float:
    """Volume integral of the (dot) product of two fields over the box.

    Each argument is either a callable of the meshgrid arrays (X1, X3)
    returning a scalar field or a stacked 3-component field, or an already
    evaluated array of the same shapes.
    """
    X1, X3 = mesh(grid, k1)
    a = _evaluate(fn_a, X1, X3)
    b = _evaluate(fn_b, X1, X3)
    if a.ndim == b.ndim + 1:
        b = b[None] * np.ones((a.shape[0],) + (1,) * b.ndim)
    if b.ndim == a.ndim + 1:
        a = a[None] * np.ones((b.shape[0],) + (1,) * a.ndim)
    prod = a * b
    if prod.ndim == 3:
        prod = prod.sum(axis=0)
    return float(np.sum(prod * quadrature_weights(grid, k1)))


@dataclass
class FieldSnapshot:
    """Physical fields on a grid; arrays indexed [i1, i3]."""

    grid: GridSpec
    k1: float
    x1: np.ndarray
    x3: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    theta: np.ndarray
    T: np.ndarray


def reconstruct_fields(spec, state, grid: GridSpec, k1: float) -> FieldSnapshot:
    """Sum coefficient * basis over the model layout and rebuild T.

    ``spec`` is a :class:`hkc.hierarchy.ModelSpec`; ``state`` a vector laid
    out per ``spec.layout``.  The total temperature is the conduction
    profile plus the deviation: T = 1 - x3/pi + theta/pi.
    """
    state = np.asarray(state, dtype=float)
    if state.shape != (len(spec.layout),):
        raise ValueError(f"state length {state.shape} does not match layout ({len(spec.layout)})")
    X1, X3 = mesh(grid, k1)
    u = np.zeros((3,) + X1.shape)
    theta = np.zeros_like(X1)
    for slot, n in enumerate(spec.layout):
        coeff = state[slot]
        if coeff == 0.0:
            continue
        if n.kind is Kind.THETA:
            theta += coeff * eval_theta_basis(n, (X1, X3), k1)
        else:
            u += coeff * eval_velocity_basis(n, (X1, X3), k1)
    T = 1.0 - X3 / math.pi + theta / math.pi
    return FieldSnapshot(grid, k1, x1_nodes(grid, k1), x3_nodes(grid), u[0], u[1], u[2], theta, T)


def write_snapshot_csv(snap: FieldSnapshot, path, banner: str | None = None) -> None:
    """CSV export: columns x1, x3, u1, u2, u3, theta, T; x3 is the outer loop."""
    with open(path, "w") as fh:
        if banner:
            fh.write(banner)
        fh.write("x1,x3,u1,u2,u3,theta,T\n")
        for j in range(snap.grid.n3):
            for i in range(snap.grid.n1):
                row = (snap.x1[i], snap.x3[j], snap.u1[i, j], snap.u2[i, j],
                       snap.u3[i, j], snap.theta[i, j], snap.T[i, j])
                fh.write(",".join("%.17g" % v for v in row) + "\n")

"""Compiled ODE systems: dense linear part, sparse quadratic tensor, Newton.

The state follows the spec layout.  The right-hand side is
``L x + sum_r c_r x[j_r] x[k_r]`` where the quadratic entries already
carry the minus sign of the advective term (the equations subtract the
projected nonlinearity), j indexes the advecting velocity slot and k the
advected slot.  Contraction makes no symmetry assumption: the coefficient
sums run over ordered (advecting, advected) pairs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Kind, ModeIndex, Params
from .hierarchy import CriteriaReport, ModelSpec, criteria_report
from .interaction import Triad, interaction_coeff, linear_couplings


class InconsistentModelError(ValueError):
    """Compilation refused: the spec breaks a balance criterion."""

    def __init__(self, report: CriteriaReport):
        self.report = report
        lines = ", ".join(str(v) for v in report.violations[:6])
        super().__init__(f"model violates balance criteria: {lines}")


class NoConvergenceError(RuntimeError):
    """Newton iteration failed; carries the last iterate."""

    def __init__(self, msg: str, last: np.ndarray):
        super().__init__(msg)
        self.last = last


@dataclass
class CompiledModel:
    spec: ModelSpec
    params: Params
    linear: np.ndarray
    quad_i: np.ndarray
    quad_j: np.ndarray
    quad_k: np.ndarray
    quad_c: np.ndarray
    report: CriteriaReport = field(repr=False, default=None)

    @property
    def dimension(self) -> int:
        return self.linear.shape[0]

    @property
    def quad(self) -> list[tuple[int, int, int, float]]:
        """Sparse quadratic entries as (i, j, k, coeff) tuples."""
        return [(int(i), int(j), int(k), float(c)) for i, j, k, c in
                zip(self.quad_i, self.quad_j, self.quad_k, self.quad_c)]

    def rhs(self, x: np.ndarray) -> np.ndarray:
        return rhs(self, x)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return jacobian(self, x)


def compile_model(spec: ModelSpec, params: Params, override: bool = False) -> CompiledModel:
    """Assemble the evaluable ODE system for a model spec.

    Refuses balance-inconsistent specs (such truncations can produce
    unbounded trajectories) unless ``override`` is set; the criteria
    report rides along either way.
    """
    report = criteria_report(spec, rotating=params.S != 0.0)
    if not override and not report.consistent_for(params.S):
        raise InconsistentModelError(report)

    layout = spec.layout
    d = len(layout)
    slot_of = {n: i for i, n in enumerate(layout)}
    linear = np.zeros((d, d))
    for i, n in enumerate(layout):
        terms = linear_couplings(n, params)
        linear[i, i] += terms["diffusion"]
        for key in ("buoyancy", "coriolis"):
            if terms[key] is not None:
                partner, coeff = terms[key]
                j = slot_of.get(partner)
                if j is not None:
                    linear[i, j] += coeff

    # Index advected candidates by (kind, wave vector) so that only the
    # four convolution-compatible wave vectors are probed per (n, n') pair.
    by_kind_m = {}
    for i, n in enumerate(layout):
        by_kind_m.setdefault((n.kind, n.m.as_tuple()), i)
    u_slots = [(i, n) for i, n in enumerate(layout) if n.kind is Kind.U]

    qi, qj, qk, qc = [], [], [], []
    for i, n in enumerate(layout):
        partner_kind = n.kind
        for j, np_ in u_slots:
            m1cands = {n.m.m1 + np_.m.m1, abs(n.m.m1 - np_.m.m1)}
            m3cands = {n.m.m3 + np_.m.m3, abs(n.m.m3 - np_.m.m3)}
            for m1pp in m1cands:
                for m3pp in m3cands:
                    k = by_kind_m.get((partner_kind, (m1pp, m3pp)))
                    if k is None:
                        continue
                    coeff = interaction_coeff(Triad(n, np_, layout[k]), params.k1)
                    if coeff != 0.0:
                        qi.append(i)
                        qj.append(j)
                        qk.append(k)
                        qc.append(-coeff)
    return CompiledModel(
        spec, params, linear,
        np.asarray(qi, dtype=np.int64), np.asarray(qj, dtype=np.int64),
        np.asarray(qk, dtype=np.int64), np.asarray(qc, dtype=float),
        report,
    )


def rhs(model: CompiledModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.dimension,):
        raise ValueError(f"state length {x.shape} does not match model dimension {model.dimension}")
    f = model.linear @ x
    if model.quad_i.size:
        np.add.at(f, model.quad_i, model.quad_c * x[model.quad_j] * x[model.quad_k])
    return f


def rhs_batch(model: CompiledModel, X: np.ndarray) -> np.ndarray:
    """Right-hand side evaluated on a stack of states (rows)."""
    X = np.asarray(X, dtype=float)
    F = X @ model.linear.T
    if model.quad_i.size:
        contrib = model.quad_c * X[:, model.quad_j] * X[:, model.quad_k]
        for col in range(F.shape[1]):
            mask = model.quad_i == col
            if mask.any():
                F[:, col] += contrib[:, mask].sum(axis=1)
    return F


def jacobian(model: CompiledModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.dimension,):
        raise ValueError(f"state length {x.shape} does not match model dimension {model.dimension}")
    J = model.linear.copy()
    for i, j, k, c in zip(model.quad_i, model.quad_j, model.quad_k, model.quad_c):
        J[i, j] += c * x[k]
        J[i, k] += c * x[j]
    return J


def find_equilibrium(model: CompiledModel, guess, tol: float = 1e-12,
                     max_iter: int = 50) -> np.ndarray:
    """Newton iteration on the right-hand side with the analytic Jacobian."""
    x = np.asarray(guess, dtype=float).copy()
    for _ in range(max_iter):
        f = rhs(model, x)
        if np.max(np.abs(f)) <= tol:
            return x
        J = jacobian(model, x)
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError as exc:
            raise NoConvergenceError(f"singular Jacobian: {exc}", x) from exc
        if not np.all(np.isfinite(step)):
            raise NoConvergenceError("non-finite Newton step", x)
        x = x + step
    if np.max(np.abs(rhs(model, x))) <= tol:
        return x
    raise NoConvergenceError(f"no convergence after {max_iter} Newton iterations", x)


def coefficient_records(model: CompiledModel) -> list[dict]:
    """Audit dump of the quadratic tensor: one record per stored entry."""

    def mode_doc(n: ModeIndex) -> dict:
        return {"kind": n.kind.value, "m": list(n.m.as_tuple()), "p1": n.p1}

    layout = model.spec.layout
    return [
        {"out": mode_doc(layout[i]), "adv": mode_doc(layout[j]),
         "in": mode_doc(layout[k]), "value": -float(c)}
        for i, j, k, c in zip(model.quad_i, model.quad_j, model.quad_k, model.quad_c)
    ]

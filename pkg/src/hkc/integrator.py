"""Adaptive embedded Runge-Kutta (Dormand-Prince 5(4)) time integration.

The propagated solution is 5th order; the embedded 4th-order solution
provides the local error estimate.  Step control is the standard PI
controller on the tolerance-scaled RMS error with a safety factor.
Compiled models run through a numba kernel (the right-hand side is inlined
from the dense linear part and sparse quadratic tensor); plain callables
``f(x) -> dx/dt`` use a pure-python loop with identical control logic,
which keeps manufactured problems and closed-form checks cheap to write.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

try:
    import numba
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _HAVE_NUMBA = False

from .dynamics import CompiledModel

# Dormand-Prince 5(4) tableau, exact rationals evaluated in double precision.
DP_A = np.zeros((7, 7))
DP_A[1, 0] = 1 / 5
DP_A[2, :2] = (3 / 40, 9 / 40)
DP_A[3, :3] = (44 / 45, -56 / 15, 32 / 9)
DP_A[4, :4] = (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729)
DP_A[5, :5] = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656)
DP_A[6, :6] = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                  187 / 2100, 1 / 40])
DP_E = DP_B5 - DP_B4

_SAFETY = 0.9
_PI_ALPHA = 0.7 / 5.0
_PI_BETA = 0.4 / 5.0
_FAC_MIN = 0.2
_FAC_MAX = 10.0


class BlowUpError(RuntimeError):
    """Trajectory left the finite range; carries the last finite sample."""

    def __init__(self, t: float, state: np.ndarray, trajectory=None):
        super().__init__(f"non-finite state reached at t={t:.6g}")
        self.t = t
        self.state = state
        self.trajectory = trajectory


class StepSizeError(RuntimeError):
    """Controller drove the step below dt_min (stiffness)."""

    def __init__(self, t: float, state: np.ndarray, trajectory=None):
        super().__init__(f"step size underflow at t={t:.6g}")
        self.t = t
        self.state = state
        self.trajectory = trajectory


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    dt_init: float = 1e-3
    dt_min: float = 1e-12
    dt_max: float = 0.1
    t_final: float = 10.0
    sample_stride: int = 1

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not (self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError("need dt_min <= dt_init <= dt_max")
        if self.t_final <= 0:
            raise ValueError("t_final must be positive (empty trajectory)")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    params: object = None
    spec: object = None
    n_accepted: int = 0
    n_rejected: int = 0

    def __len__(self):
        return len(self.times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _as_rhs(model):
    if isinstance(model, CompiledModel):
        return model.rhs
    if callable(model):
        return model
    raise TypeError(f"cannot integrate object of type {type(model)!r}")


def step_embedded(model, x, t: float, dt: float):
    """One embedded step: returns (x_next, error_estimate).

    The error estimate is the raw difference between the 5th- and
    4th-order solutions, component-wise; scaling against tolerances is the
    integration loop's business.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    f = _as_rhs(model)
    x = np.asarray(x, dtype=float)
    k = np.empty((7, x.size))
    k[0] = f(x)
    for s in range(1, 7):
        xs = x + dt * (DP_A[s, :s] @ k[:s])
        k[s] = f(xs)
    x_next = x + dt * (DP_B5 @ k)
    err = dt * (DP_E @ k)
    if not np.all(np.isfinite(x_next)):
        raise BlowUpError(t, x)
    return x_next, err


if _HAVE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _dp_kernel(L, qi, qj, qk, qc, y, scal, t_end, rtol, atol, dt_min, dt_max,
                   stride, times_buf, states_buf, counters):
        """Integrate until t_end, buffer exhaustion, blow-up or dt underflow.

        scal = [t, dt, err_prev]; counters = [stored, accepted, rejected, phase].
        Returns 0 (reached t_end), 1 (buffer full), 2 (blow-up), 3 (underflow).
        """
        d = y.shape[0]
        nq = qi.shape[0]
        A = DP_A
        B5 = DP_B5
        E = DP_E
        k = np.empty((7, d))
        ys = np.empty(d)
        t = scal[0]
        dt = scal[1]
        err_prev = scal[2]
        cap = times_buf.shape[0]
        have_fsal = False
        while t < t_end:
            last = False
            dt_try = dt
            if t + dt_try >= t_end:
                dt_try = t_end - t
                last = True
            # stage 0 (reuse the final stage of the previous accepted step)
            if not have_fsal:
                for i in range(d):
                    ys[i] = y[i]
                fv = L @ ys
                for r in range(nq):
                    fv[qi[r]] += qc[r] * ys[qj[r]] * ys[qk[r]]
                k[0] = fv
            for s in range(1, 7):
                for i in range(d):
                    acc = 0.0
                    for j in range(s):
                        acc += A[s, j] * k[j, i]
                    ys[i] = y[i] + dt_try * acc
                fv = L @ ys
                for r in range(nq):
                    fv[qi[r]] += qc[r] * ys[qj[r]] * ys[qk[r]]
                k[s] = fv
            # 5th order solution is the stage-7 node (FSAL pair)
            blow = False
            err = 0.0
            for i in range(d):
                acc5 = 0.0
                acce = 0.0
                for j in range(7):
                    acc5 += B5[j] * k[j, i]
                    acce += E[j] * k[j, i]
                ynew = y[i] + dt_try * acc5
                ys[i] = ynew
                if not np.isfinite(ynew):
                    blow = True
                sc = atol + rtol * max(abs(y[i]), abs(ynew))
                w = dt_try * acce / sc
                err += w * w
            err = np.sqrt(err / d)
            if blow or not np.isfinite(err):
                scal[0] = t
                scal[1] = dt
                scal[2] = err_prev
                return 2
            if err <= 1.0:
                t = t_end if last else t + dt_try
                for i in range(d):
                    y[i] = ys[i]
                for i in range(d):
                    k[0, i] = k[6, i]
                have_fsal = True
                counters[1] += 1
                counters[3] += 1
                if counters[3] % stride == 0 or t >= t_end:
                    ns = counters[0]
                    times_buf[ns] = t
                    for i in range(d):
                        states_buf[ns, i] = y[i]
                    counters[0] += 1
                errc = max(err, 1e-10)
                fac = _SAFETY * errc ** (-_PI_ALPHA) * err_prev ** (_PI_BETA)
                fac = min(_FAC_MAX, max(_FAC_MIN, fac))
                err_prev = errc
                dt = min(dt_try * fac, dt_max)
                if counters[0] >= cap and t < t_end:
                    scal[0] = t
                    scal[1] = dt
                    scal[2] = err_prev
                    return 1
            else:
                counters[2] += 1
                fac = max(_FAC_MIN, _SAFETY * err ** (-0.2))
                dt = dt_try * fac
                have_fsal = True  # k[0] still holds f(y): stage 0 unchanged
            if dt < dt_min and t < t_end:
                scal[0] = t
                scal[1] = dt
                scal[2] = err_prev
                return 3
        scal[0] = t
        scal[1] = dt
        scal[2] = err_prev
        return 0


def _integrate_compiled(model: CompiledModel, x0, cfg: IntegratorConfig, t0: float):
    y = np.array(x0, dtype=float).copy()
    times = [t0]
    states = [y.copy()]
    scal = np.array([t0, cfg.dt_init, 1.0])
    counters = np.zeros(4, dtype=np.int64)
    t_end = t0 + cfg.t_final
    cap = 65536
    d = y.size
    while True:
        counters[0] = 0
        times_buf = np.empty(cap)
        states_buf = np.empty((cap, d))
        status = _dp_kernel(model.linear, model.quad_i, model.quad_j, model.quad_k,
                            model.quad_c, y, scal, t_end, cfg.rel_tol, cfg.abs_tol,
                            cfg.dt_min, cfg.dt_max, cfg.sample_stride,
                            times_buf, states_buf, counters)
        ns = int(counters[0])
        if ns:
            times.extend(times_buf[:ns])
            states.extend(states_buf[:ns])
        traj = Trajectory(np.asarray(times), np.asarray(states), model.params,
                          model.spec, int(counters[1]), int(counters[2]))
        if status == 0:
            return traj
        if status == 2:
            raise BlowUpError(scal[0], y.copy(), traj)
        if status == 3:
            raise StepSizeError(scal[0], y.copy(), traj)
        # status 1: buffers refilled on the next pass


def _integrate_python(f, x0, cfg: IntegratorConfig, t0: float):
    y = np.array(x0, dtype=float).copy()
    t = t0
    t_end = t0 + cfg.t_final
    dt = cfg.dt_init
    err_prev = 1.0
    times = [t0]
    states = [y.copy()]
    n_acc = n_rej = 0

    def partial():
        return Trajectory(np.asarray(times), np.asarray(states), None, None, n_acc, n_rej)

    while t < t_end:
        last = t + dt >= t_end
        dt_try = t_end - t if last else dt
        try:
            y_new, e = step_embedded(f, y, t, dt_try)
        except BlowUpError as exc:
            raise BlowUpError(t, y.copy(), partial()) from exc
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((e / scale) ** 2)))
        if not np.isfinite(err):
            raise BlowUpError(t, y.copy(), partial())
        if err <= 1.0:
            t = t_end if last else t + dt_try
            y = y_new
            n_acc += 1
            if n_acc % cfg.sample_stride == 0 or t >= t_end:
                times.append(t)
                states.append(y.copy())
            errc = max(err, 1e-10)
            fac = _SAFETY * errc ** (-_PI_ALPHA) * err_prev ** (_PI_BETA)
            err_prev = errc
            dt = min(dt_try * min(_FAC_MAX, max(_FAC_MIN, fac)), cfg.dt_max)
        else:
            n_rej += 1
            dt = dt_try * max(_FAC_MIN, _SAFETY * err ** (-0.2))
        if dt < cfg.dt_min and t < t_end:
            raise StepSizeError(t, y.copy(), partial())
    return partial()


def integrate(model, x0, cfg: IntegratorConfig, t0: float = 0.0) -> Trajectory:
    """Integrate from x0 over [t0, t0 + cfg.t_final] with dense sample capture.

    Raises :class:`BlowUpError` on non-finite states and
    :class:`StepSizeError` on step underflow; both carry the partial
    trajectory accumulated so far.
    """
    x0 = np.asarray(x0, dtype=float)
    if isinstance(model, CompiledModel):
        if x0.shape != (model.dimension,):
            raise ValueError(f"initial state length {x0.shape} does not match model "
                             f"dimension {model.dimension}")
        if _HAVE_NUMBA:
            return _integrate_compiled(model, x0, cfg, t0)
        return _integrate_python(model.rhs, x0, cfg, t0)
    return _integrate_python(_as_rhs(model), x0, cfg, t0)


def concat_trajectories(first: Trajectory, second: Trajectory) -> Trajectory:
    """Stitch a continuation onto an existing trajectory (shared junction sample)."""
    if abs(first.times[-1] - second.times[0]) > 1e-12:
        raise ValueError("trajectories do not join")
    return Trajectory(
        np.concatenate([first.times, second.times[1:]]),
        np.vstack([first.states, second.states[1:]]),
        first.params, first.spec,
        first.n_accepted + second.n_accepted,
        first.n_rejected + second.n_rejected,
    )


def write_trajectory_csv(traj: Trajectory, path, banner: str | None = None,
                         meta: str | None = None) -> None:
    """CSV export: header ``t, <slot labels>``, one row per sample."""
    labels = [n.label() for n in traj.spec.layout] if traj.spec is not None \
        else [f"x{i}" for i in range(traj.states.shape[1])]
    with open(path, "w") as fh:
        if banner:
            fh.write(banner)
        if meta:
            fh.write(meta)
        fh.write("t," + ",".join(labels) + "\n")
        for t, row in zip(traj.times, traj.states):
            fh.write("%.17g," % t + ",".join("%.17g" % v for v in row) + "\n")

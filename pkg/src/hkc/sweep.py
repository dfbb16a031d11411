"""Parameter sweeps: seeded ensembles, convergence polling, multi-stability stats.

Every record is reproducible from (master seed, grid indices, replicate)
alone; the ensemble is embarrassingly parallel over (grid point,
replicate) tasks sharing read-only compiled models, so serial and
parallel execution produce identical record sets.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .core import Kind, Params
from .diagnostics import converged, nusselt_series
from .dynamics import CompiledModel, compile_model
from .hierarchy import ModelSpec, build_hkc
from .integrator import (BlowUpError, IntegratorConfig, StepSizeError,
                         Trajectory, concat_trajectories, integrate)


@dataclass(frozen=True)
class SweepConfig:
    R_values: tuple[float, ...]
    S_values: tuple[float, ...]
    M: int = 1
    ensemble: int = 1
    seed: int = 0
    prandtl: float = 10.0
    aspect: float = 1.0 / math.sqrt(2.0)
    amplitude: float = 0.1
    integrator: IntegratorConfig = field(default_factory=lambda: IntegratorConfig(t_final=1.0))
    burn_time: float = 1.0
    extend_time: float = 0.1
    threshold: float = 0.02
    max_extensions: int = 500

    def __post_init__(self):
        if not self.R_values or not self.S_values:
            raise ValueError("parameter grids must be nonempty")
        if self.ensemble < 1:
            raise ValueError("ensemble size must be >= 1")


@dataclass(frozen=True)
class SweepRecord:
    R: float
    S: float
    M: int
    seed: int
    replicate: int
    nu_final: float
    t_final: float
    converged: bool
    extension_count: int
    blowup: bool = False


@lru_cache(maxsize=64)
def uniform_state_projection(spec: ModelSpec, k1: float) -> np.ndarray:
    """Coefficients of the uniform state (u, T) = (0, 1/2) in the model basis.

    The temperature deviation of the uniform state is x3 - pi/2, whose
    projection hits only the stratified even-m3 temperature modes with
    coefficient -2*pi/(sqrt(k1)*m3).
    """
    out = np.zeros(len(spec.layout))
    for i, n in enumerate(spec.layout):
        if n.kind is Kind.THETA and n.m.m1 == 0 and n.m.m3 % 2 == 0:
            out[i] = -2.0 * math.pi / (math.sqrt(k1) * n.m.m3)
    return out


def random_initial_condition(spec: ModelSpec, k1: float, seed,
                             amplitude: float = 0.1) -> np.ndarray:
    """Uniform-state projection plus a seeded uniform[-amplitude, amplitude]
    perturbation of every slot."""
    rng = np.random.default_rng(seed)
    x = uniform_state_projection(spec, k1).copy()
    if amplitude != 0.0:
        x += rng.uniform(-amplitude, amplitude, size=len(spec.layout))
    return x


def run_point(model: CompiledModel, ic: np.ndarray, cfg: SweepConfig,
              seed: int = 0, replicate: int = 0) -> SweepRecord:
    """Burn in, then extend in chunks until the heat-transport fluctuation
    rule is met (or the extension budget runs out)."""
    spec, params = model.spec, model.params
    base = cfg.integrator

    def record(nu, t_final, conv, ext, blowup=False):
        return SweepRecord(params.R, params.S, spec.level, seed, replicate,
                           nu, t_final, conv, ext, blowup)

    try:
        burn = integrate(model, ic, replace(base, t_final=cfg.burn_time))
    except (BlowUpError, StepSizeError) as exc:
        return record(float("nan"), float(exc.t), False, 0, blowup=True)

    traj: Trajectory | None = None
    extensions = 0
    state = burn.final_state
    while True:
        try:
            chunk = integrate(model, state, replace(base, t_final=cfg.extend_time),
                              t0=0.0 if traj is None else float(traj.times[-1]))
        except (BlowUpError, StepSizeError) as exc:
            partial = exc.trajectory
            if traj is not None and partial is not None and len(partial) > 1:
                traj = concat_trajectories(traj, partial)
            nu_val = float("nan")
            if traj is not None and len(traj) >= 2:
                nu_val = float(nusselt_series(traj, spec, params.k1).values[-1])
            t_reached = float(traj.times[-1]) if traj is not None else 0.0
            return record(nu_val, t_reached, False, extensions, blowup=True)
        traj = chunk if traj is None else concat_trajectories(traj, chunk)
        state = traj.final_state
        nu = nusselt_series(traj, spec, params.k1)
        if len(nu) >= 4 and converged(nu, cfg.threshold):
            return record(float(nu.values[-1]), float(traj.times[-1]), True, extensions)
        if extensions >= cfg.max_extensions:
            return record(float(nu.values[-1]), float(traj.times[-1]), False, extensions)
        extensions += 1


def _worker_count(n_tasks: int, workers: int | None) -> int:
    if workers is None:
        env = os.environ.get("HKC_THREADS")
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(workers, n_tasks))


def run_sweep(cfg: SweepConfig, workers: int | None = None,
              csv_path=None) -> list[SweepRecord]:
    """Cartesian product of the grids times the ensemble; results are sorted
    by (R, S, replicate) and optionally streamed to CSV as they finish."""
    spec = build_hkc(cfg.M)
    models: dict[tuple[int, int], CompiledModel] = {}
    for iR, R in enumerate(cfg.R_values):
        for iS, S in enumerate(cfg.S_values):
            models[(iR, iS)] = compile_model(
                spec, Params(R=R, S=S, P=cfg.prandtl, k1=cfg.aspect))

    tasks = [(iR, iS, rep)
             for iR in range(len(cfg.R_values))
             for iS in range(len(cfg.S_values))
             for rep in range(cfg.ensemble)]

    def run_task(task):
        iR, iS, rep = task
        model = models[(iR, iS)]
        child_seed = np.random.SeedSequence((cfg.seed, iR, iS, rep))
        ic = random_initial_condition(spec, cfg.aspect, child_seed, cfg.amplitude)
        return run_point(model, ic, cfg, seed=cfg.seed, replicate=rep)

    n_workers = _worker_count(len(tasks), workers)
    records: list[SweepRecord] = []
    sink = open(csv_path, "a") if csv_path else None
    try:
        if n_workers == 1:
            for task in tasks:
                rec = run_task(task)
                records.append(rec)
                if sink:
                    sink.write(_record_line(rec))
                    sink.flush()
        else:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                for rec in pool.map(run_task, tasks):
                    records.append(rec)
                    if sink:
                        sink.write(_record_line(rec))
                        sink.flush()
    finally:
        if sink:
            sink.close()
    records.sort(key=lambda r: (r.R, r.S, r.replicate))
    return records


def bin_nusselt(values, bin_centers=None):
    """Histogram by nearest bin center; equidistant values go to the lower one."""
    centers = np.arange(0.0, 10.0 + 1e-12, 0.5) if bin_centers is None \
        else np.asarray(bin_centers, dtype=float)
    if centers.ndim != 1 or centers.size < 1 or np.any(np.diff(centers) <= 0):
        raise ValueError("bin centers must be strictly increasing")
    counts = np.zeros(centers.size, dtype=int)
    for v in np.asarray(values, dtype=float):
        pos = int(np.searchsorted(centers, v))
        if pos == 0:
            idx = 0
        elif pos == centers.size:
            idx = centers.size - 1
        else:
            lo, hi = centers[pos - 1], centers[pos]
            idx = pos - 1 if v - lo <= hi - v else pos
        counts[idx] += 1
    return centers, counts


def _record_line(r: SweepRecord) -> str:
    return "%.17g,%.17g,%d,%d,%d,%.17g,%.17g,%d,%d,%d\n" % (
        r.R, r.S, r.M, r.seed, r.replicate, r.nu_final, r.t_final,
        int(r.converged), r.extension_count, int(r.blowup))


SWEEP_CSV_HEADER = "R,S,M,seed,replicate,nu,t_final,converged,extensions,blowup\n"


def write_sweep_csv(records, path, banner: str | None = None) -> None:
    with open(path, "w") as fh:
        if banner:
            fh.write(banner)
        fh.write(SWEEP_CSV_HEADER)
        for r in records:
            fh.write(_record_line(r))


def write_histogram_csv(centers, counts, path, banner: str | None = None) -> None:
    with open(path, "w") as fh:
        if banner:
            fh.write(banner)
        fh.write("bin_center,count\n")
        for c, n in zip(centers, counts):
            fh.write("%.17g,%d\n" % (c, n))

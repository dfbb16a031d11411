"""Command-line front end.

Subcommands: generate, simulate, nusselt, sweep, stability, field.  All
numeric output is CSV with >= 15 significant digits; model specs travel
as JSON.  Exit codes: 0 ok, 2 usage error, 3 numerical failure (blow-up
or step-size underflow), 4 criteria violation.
"""
from __future__ import annotations

import argparse
import datetime
import json
import math
import sys

import numpy as np

from .basis import GridSpec, reconstruct_fields, write_snapshot_csv
from .core import Params
from .diagnostics import ScalarSeries, converged
from .dynamics import (InconsistentModelError, coefficient_records,
                       compile_model)
from .hierarchy import (build_hkc, criteria_report, model_dimension,
                        spec_from_json, spec_to_json)
from .integrator import (BlowUpError, IntegratorConfig, StepSizeError,
                         integrate, write_trajectory_csv)
from .stability import (hausdorff_constant, hausdorff_upper_bound,
                        stability_atlas, unstable_dimension, write_atlas_csv)
from .sweep import (SweepConfig, bin_nusselt, random_initial_condition,
                    run_sweep, write_histogram_csv, write_sweep_csv)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_CRITERIA = 4

PRESETS = {
    # rough tropospheric magnitudes; desk-scale integration is infeasible there
    "troposphere-equator": {"R": 1e16, "S": 0.0, "P": 1.0},
    "troposphere-pole": {"R": 1e16, "S": 1e15, "P": 1.0},
}


def parse_range(text: str) -> list[float]:
    """Grid expression: a single value, 'a:d:b' (inclusive when it lands on
    the grid) or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be a:d:b, got {text!r}")
        a, d, b = (float(p) for p in parts)
        if d <= 0:
            raise ValueError("range increment must be positive")
        if a > b:
            raise ValueError("range start exceeds range end")
        n = int(math.floor((b - a) / d + 1e-9)) + 1
        return [a + i * d for i in range(n)]
    if "," in text:
        return [float(p) for p in text.split(",") if p.strip()]
    return [float(text)]


def _banner(args) -> str | None:
    if getattr(args, "no_banner", False):
        return None
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return f"# generated {stamp}\n"


def _params_from_args(args) -> Params:
    vals = {"R": 180.0, "S": 0.0, "P": 10.0, "k1": 1.0 / math.sqrt(2.0)}
    preset = getattr(args, "preset", None)
    if preset:
        vals.update(PRESETS[preset])
        print(f"warning: preset {preset!r} sets extreme magnitudes "
              "(R ~ 1e16); desk-scale integration is infeasible there",
              file=sys.stderr)
    for key, flag in (("R", "R"), ("S", "S"), ("P", "P"), ("k1", "k1")):
        v = getattr(args, flag, None)
        if v is not None:
            vals[key] = v
    return Params(**vals)


def _load_spec(args):
    if getattr(args, "model", None):
        with open(args.model) as fh:
            return spec_from_json(fh.read())
    return build_hkc(args.M)


def _integrator_config(args) -> IntegratorConfig:
    return IntegratorConfig(
        rel_tol=args.rel_tol, abs_tol=args.abs_tol, dt_init=args.dt_init,
        dt_max=args.dt_max, t_final=args.t_final, sample_stride=args.stride)


def cmd_generate(args) -> int:
    if args.M < 1:
        print("error: model level must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    spec = build_hkc(args.M)
    report = criteria_report(spec)
    text = spec_to_json(spec)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    print(f"level {args.M}: dimension {spec.dimension} "
          f"(closed form {model_dimension(args.M)})")
    print(f"criteria: energy={report.energy_ok} vorticity={report.vorticity_ok} "
          f"rotating={report.rotating_vorticity_ok} buoyancy={report.buoyancy_ok}")
    if args.coeffs:
        model = compile_model(spec, Params(R=1.0, S=0.0, P=1.0, k1=args.k1), override=True)
        with open(args.coeffs, "w") as fh:
            json.dump(coefficient_records(model), fh, indent=2)
        print(f"wrote {len(model.quad_c)} interaction records to {args.coeffs}")
    if not report.all_ok and not args.allow_inconsistent:
        for v in report.violations:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_CRITERIA
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _load_spec(args)
    params = _params_from_args(args)
    try:
        model = compile_model(spec, params, override=args.allow_inconsistent)
    except InconsistentModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CRITERIA
    try:
        cfg = _integrator_config(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    seed = np.random.SeedSequence((args.seed, 0))
    x0 = random_initial_condition(spec, params.k1, seed, args.amplitude)
    meta = ("# meta: M=%d R=%.17g S=%.17g P=%.17g k1=%.17g seed=%d amplitude=%.17g\n"
            % (spec.level, params.R, params.S, params.P, params.k1,
               args.seed, args.amplitude))
    status = EXIT_OK
    try:
        traj = integrate(model, x0, cfg)
    except (BlowUpError, StepSizeError) as exc:
        print(f"error: {exc} (partial trajectory written)", file=sys.stderr)
        traj = exc.trajectory
        status = EXIT_NUMERICAL
    if traj is not None and len(traj) and args.out:
        write_trajectory_csv(traj, args.out, banner=_banner(args), meta=meta)
    if status == EXIT_OK:
        print(f"integrated to t={traj.times[-1]:g}: {traj.n_accepted} accepted, "
              f"{traj.n_rejected} rejected steps, {len(traj)} samples")
    return status


def _read_trajectory_csv(path):
    meta = {}
    with open(path) as fh:
        header = None
        rows = []
        for line in fh:
            if line.startswith("#"):
                if line.startswith("# meta:"):
                    for item in line.split(":", 1)[1].split():
                        k, _, v = item.partition("=")
                        meta[k] = float(v)
                continue
            if header is None:
                header = [c.strip() for c in line.strip().split(",")]
                continue
            rows.append([float(v) for v in line.strip().split(",")])
    if header is None or not rows:
        raise ValueError(f"no trajectory data in {path}")
    data = np.asarray(rows)
    return header, data, meta


def cmd_nusselt(args) -> int:
    header, data, meta = _read_trajectory_csv(args.traj)
    k1 = args.k1 if args.k1 is not None else meta.get("k1", 1.0 / math.sqrt(2.0))
    times = data[:, 0]
    nu = np.ones(len(times))
    elapsed = times - times[0]
    for col, label in enumerate(header):
        if not label.startswith("th_"):
            continue
        _, m1s, m3s = label.split("_")
        if int(m1s) != 0:
            continue
        m3 = int(m3s)
        theta = data[:, col]
        dt = np.diff(elapsed)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * dt * (theta[1:] + theta[:-1]))])
        avg = np.zeros_like(cum)
        avg[1:] = cum[1:] / elapsed[1:]
        nu -= (math.sqrt(k1) * m3 / math.pi) * avg
    series = ScalarSeries(times, nu)
    stride = max(1, len(times) // max(1, args.print_points))
    for i in range(0, len(times), stride):
        print("%.17g,%.17g" % (times[i], nu[i]))
    if (times[-1] - times[0]) > 0 and len(times) >= 4:
        verdict = converged(series, args.threshold)
    else:
        verdict = False
    print(f"nu_final={nu[-1]:.12g} converged={verdict}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        cfg = SweepConfig(
            R_values=tuple(parse_range(args.R)),
            S_values=tuple(parse_range(args.S)),
            M=args.M, ensemble=args.ensemble, seed=args.seed,
            prandtl=args.P if args.P is not None else 10.0,
            aspect=args.k1 if args.k1 is not None else 1.0 / math.sqrt(2.0),
            amplitude=args.amplitude,
            integrator=IntegratorConfig(rel_tol=args.rel_tol, abs_tol=args.abs_tol,
                                        dt_init=args.dt_init, dt_max=args.dt_max,
                                        t_final=1.0, sample_stride=args.stride),
            burn_time=args.burn_time, extend_time=args.extend_time,
            threshold=args.threshold, max_extensions=args.max_extensions)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    records = run_sweep(cfg, workers=args.workers)
    write_sweep_csv(records, args.out, banner=_banner(args))
    print(f"wrote {len(records)} records to {args.out}")
    if args.histogram:
        finite = [r.nu_final for r in records if math.isfinite(r.nu_final)]
        centers, counts = bin_nusselt(finite)
        write_histogram_csv(centers, counts, args.histogram, banner=_banner(args))
        print(f"wrote histogram to {args.histogram}")
    return EXIT_OK


def cmd_stability(args) -> int:
    params = _params_from_args(args)
    rows = stability_atlas(params, args.max_shell)
    if args.out:
        write_atlas_csv(rows, args.out, banner=_banner(args))
        print(f"wrote {len(rows)} rows to {args.out}")
    try:
        dim = unstable_dimension(params, args.max_shell)
        print(f"unstable_dimension={dim}")
    except ValueError as exc:
        print(f"unstable_dimension unavailable: {exc}", file=sys.stderr)
    print("hausdorff_constant=%.12g hausdorff_bound=%.12g"
          % (hausdorff_constant(params.P, params.k1), hausdorff_upper_bound(params)))
    return EXIT_OK


def cmd_field(args) -> int:
    header, data, meta = _read_trajectory_csv(args.traj)
    k1 = args.k1 if args.k1 is not None else meta.get("k1", 1.0 / math.sqrt(2.0))
    M = int(meta.get("M", 0)) if args.M is None else args.M
    spec = build_hkc(M) if M >= 1 else None
    if spec is None:
        print("error: model level unknown (pass -M)", file=sys.stderr)
        return EXIT_USAGE
    labels = [n.label() for n in spec.layout]
    if header[1:] != labels:
        print("error: trajectory columns do not match the model layout", file=sys.stderr)
        return EXIT_USAGE
    times = data[:, 0]
    if not (times[0] <= args.time <= times[-1]):
        print(f"error: time {args.time:g} outside trajectory range "
              f"[{times[0]:g}, {times[-1]:g}]", file=sys.stderr)
        return EXIT_USAGE
    idx = int(np.argmin(np.abs(times - args.time)))
    try:
        n1, n3 = (int(p) for p in args.grid.lower().split("x"))
        grid = GridSpec(n1, n3)
    except ValueError as exc:
        print(f"error: bad grid {args.grid!r}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    snap = reconstruct_fields(spec, data[idx, 1:], grid, k1)
    write_snapshot_csv(snap, args.out, banner=_banner(args))
    print(f"wrote field snapshot at t={times[idx]:g} to {args.out}")
    return EXIT_OK


def _add_param_flags(p: argparse.ArgumentParser):
    p.add_argument("--R", type=float, default=None, help="Rayleigh number")
    p.add_argument("--S", type=float, default=None, help="rotation number")
    p.add_argument("--P", type=float, default=None, help="Prandtl number")
    p.add_argument("--k1", type=float, default=None, help="horizontal aspect wave number")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None,
                   help="named parameter magnitudes (explicit flags win)")


def _add_integrator_flags(p: argparse.ArgumentParser):
    p.add_argument("--t-final", dest="t_final", type=float, default=10.0)
    p.add_argument("--dt-init", dest="dt_init", type=float, default=1e-3)
    p.add_argument("--dt-max", dest="dt_max", type=float, default=0.1)
    p.add_argument("--rel-tol", dest="rel_tol", type=float, default=1e-10)
    p.add_argument("--abs-tol", dest="abs_tol", type=float, default=1e-10)
    p.add_argument("--stride", type=int, default=1, help="store every k-th accepted step")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hkc",
                                 description="Energy-consistent truncations of rotating convection")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="build a model spec and write it as JSON")
    g.add_argument("-M", type=int, required=True, help="hierarchy level")
    g.add_argument("-o", "--out", default=None, help="output JSON path (default stdout)")
    g.add_argument("--coeffs", default=None, help="optional interaction-coefficient dump (JSON)")
    g.add_argument("--k1", type=float, default=1.0 / math.sqrt(2.0))
    g.add_argument("--allow-inconsistent", action="store_true")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("simulate", help="integrate a model from a seeded initial state")
    s.add_argument("model", nargs="?", default=None, help="model spec JSON (default: build -M)")
    s.add_argument("-M", type=int, default=1)
    _add_param_flags(s)
    _add_integrator_flags(s)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--amplitude", type=float, default=0.1)
    s.add_argument("--allow-inconsistent", action="store_true")
    s.add_argument("--no-banner", action="store_true")
    s.add_argument("-o", "--out", default="trajectory.csv")
    s.set_defaults(func=cmd_simulate)

    n = sub.add_parser("nusselt", help="heat-transport series of a saved trajectory")
    n.add_argument("traj")
    n.add_argument("--k1", type=float, default=None,
                   help="aspect wave number (default: trajectory metadata)")
    n.add_argument("--threshold", type=float, default=0.02)
    n.add_argument("--print-points", type=int, default=20)
    n.set_defaults(func=cmd_nusselt)

    w = sub.add_parser("sweep", help="parameter-grid ensemble with convergence polling")
    w.add_argument("--R", required=True, help="grid: a, a:d:b or comma list")
    w.add_argument("--S", required=True, help="grid: a, a:d:b or comma list")
    w.add_argument("-M", type=int, default=1)
    w.add_argument("--P", type=float, default=None)
    w.add_argument("--k1", type=float, default=None)
    w.add_argument("--ensemble", type=int, default=1)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--amplitude", type=float, default=0.1)
    w.add_argument("--burn-time", dest="burn_time", type=float, default=1.0)
    w.add_argument("--extend-time", dest="extend_time", type=float, default=0.1)
    w.add_argument("--threshold", type=float, default=0.02)
    w.add_argument("--max-extensions", dest="max_extensions", type=int, default=500)
    w.add_argument("--dt-init", dest="dt_init", type=float, default=1e-3)
    w.add_argument("--dt-max", dest="dt_max", type=float, default=0.1)
    w.add_argument("--rel-tol", dest="rel_tol", type=float, default=1e-10)
    w.add_argument("--abs-tol", dest="abs_tol", type=float, default=1e-10)
    w.add_argument("--stride", type=int, default=1)
    w.add_argument("--workers", type=int, default=None,
                   help="worker threads (HKC_THREADS caps this)")
    w.add_argument("--histogram", default=None, help="optional histogram CSV path")
    w.add_argument("--no-banner", action="store_true")
    w.add_argument("-o", "--out", default="sweep.csv")
    w.set_defaults(func=cmd_sweep)

    st = sub.add_parser("stability", help="origin stability atlas and dimension bounds")
    _add_param_flags(st)
    st.add_argument("--max-shell", dest="max_shell", type=int, default=12)
    st.add_argument("--no-banner", action="store_true")
    st.add_argument("-o", "--out", default=None)
    st.set_defaults(func=cmd_stability)

    f = sub.add_parser("field", help="reconstruct physical fields from a trajectory sample")
    f.add_argument("traj")
    f.add_argument("--time", type=float, required=True)
    f.add_argument("--grid", default="128x64", help="n1xn3 grid")
    f.add_argument("--k1", type=float, default=None)
    f.add_argument("-M", type=int, default=None)
    f.add_argument("--no-banner", action="store_true")
    f.add_argument("-o", "--out", default="field.csv")
    f.set_defaults(func=cmd_field)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BlowUpError, StepSizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except InconsistentModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CRITERIA
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

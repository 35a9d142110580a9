"""Command-line front end: simulate, diagnose, counterexample, recursive, gronwall.

One executable, five subcommands, INI configs for the solver, CSV + JSON
manifest outputs.  Exit codes: 0 on success, 1 for usage/config problems
(malformed files report the offending line), 2 when a run halts on
blow-up or overflow (partial outputs are still flushed).
"""

from __future__ import annotations

import argparse
import configparser
import datetime
import glob
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional, Sequence

_THREAD_ENV_VARS = (
    "WLNS_THREADS",
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
)


def _apply_thread_cap(threads: Optional[int]) -> Optional[int]:
    """Resolve the thread cap (flag beats WLNS_THREADS) and export it.

    The cap is pushed into the usual BLAS/OpenMP environment variables so
    any lazily created pools respect it; outputs must not depend on it.
    """
    if threads is None:
        env = os.environ.get("WLNS_THREADS")
        if env is not None:
            try:
                threads = int(env)
            except ValueError:
                raise SystemExit(f"WLNS_THREADS must be an integer, got '{env}'")
    if threads is not None:
        if threads < 1:
            raise SystemExit("thread cap must be >= 1")
        for name in _THREAD_ENV_VARS[1:]:
            os.environ[name] = str(threads)
    return threads


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Reproducibility record written next to every file-producing run."""

    subcommand: str
    config: dict
    seed: Optional[int] = None
    threads: Optional[int] = None
    halted: Optional[str] = None
    started_utc: str = ""
    finished_utc: str = ""
    wall_seconds: float = 0.0
    outputs: list = dc_field(default_factory=list)

    def start(self):
        self._t0 = time.monotonic()
        self.started_utc = datetime.datetime.now(datetime.timezone.utc).isoformat()
        return self

    def add_output(self, out_dir: Path, path: Path):
        self.outputs.append(
            {
                "path": str(path.relative_to(out_dir)),
                "sha256": _sha256(path),
                "bytes": path.stat().st_size,
            }
        )

    def write(self, out_dir: Path):
        from wlns import __version__

        self.finished_utc = datetime.datetime.now(datetime.timezone.utc).isoformat()
        self.wall_seconds = time.monotonic() - self._t0
        payload = {
            "subcommand": self.subcommand,
            "version": __version__,
            "config": self.config,
            "seed": self.seed,
            "threads": self.threads,
            "halted": self.halted,
            "started_utc": self.started_utc,
            "finished_utc": self.finished_utc,
            "wall_seconds": self.wall_seconds,
            "outputs": sorted(self.outputs, key=lambda o: o["path"]),
        }
        with open(out_dir / "manifest.json", "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


# ---------------------------------------------------------------------------
# simulate


_SOLVER_KEYS = {
    "n",
    "box_length",
    "viscosity",
    "dt",
    "t_end",
    "dealias_fraction",
    "snapshot_every",
    "blowup_threshold",
    "initial_condition",
    "amplitude",
    "seed",
    "max_mode",
    "mode",
    "direction",
}


def _parse_triplet(raw: str, what: str) -> tuple:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 3:
        raise ValueError(f"{what} needs three comma-separated values, got '{raw}'")
    return tuple(float(p) for p in parts)


def _load_run_config(path: str):
    """Parse the INI run description into (grid, u0, SolverConfig, q, output opts).

    Raises ValueError with a section/key-qualified message on bad values;
    syntax errors surface as configparser errors that carry line numbers.
    """
    from wlns.field import Grid
    from wlns.nse_solver import SolverConfig, random_divfree, single_mode, taylor_green

    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    with open(path) as fh:
        parser.read_file(fh, source=os.path.basename(path))
    if not parser.has_section("solver"):
        raise ValueError("config needs a [solver] section")
    solver = parser["solver"]
    unknown = set(solver) - _SOLVER_KEYS
    if unknown:
        raise ValueError(f"[solver] has unknown keys: {', '.join(sorted(unknown))}")

    def pick(section, key, cast, default):
        raw = section.get(key)
        if raw is None:
            return default
        try:
            return cast(raw)
        except ValueError:
            raise ValueError(f"[{section.name}] {key}: cannot parse '{raw}'")

    n = pick(solver, "n", int, None)
    if n is None:
        raise ValueError("[solver] n is required")
    grid = Grid(n, length=pick(solver, "box_length", float, 2.0 * math.pi))
    config = SolverConfig(
        viscosity=pick(solver, "viscosity", float, 1.0),
        dt=pick(solver, "dt", float, 1e-3),
        t_end=pick(solver, "t_end", float, 0.1),
        dealias_fraction=pick(solver, "dealias_fraction", float, 2.0 / 3.0),
        snapshot_every=pick(solver, "snapshot_every", int, 1),
        blowup_threshold=pick(solver, "blowup_threshold", float, 1e8),
    )

    kind = solver.get("initial_condition", "taylor_green").strip()
    amplitude = pick(solver, "amplitude", float, 1.0)
    seed = pick(solver, "seed", int, None)
    if kind == "taylor_green":
        u0 = taylor_green(grid, amplitude=amplitude)
    elif kind == "single_mode":
        mode = _parse_triplet(solver.get("mode", "0,0,1"), "[solver] mode")
        direction = _parse_triplet(solver.get("direction", "1,0,0"), "[solver] direction")
        u0 = single_mode(
            grid, mode=[int(m) for m in mode], direction=direction, amplitude=amplitude
        )
    elif kind == "random":
        if seed is None:
            raise ValueError("[solver] random initial condition needs a seed")
        u0 = random_divfree(
            grid, seed=seed, max_mode=pick(solver, "max_mode", int, None), amplitude=amplitude
        )
    else:
        raise ValueError(f"[solver] unknown initial_condition '{kind}'")

    q = None
    if parser.has_section("diagnostics"):
        q = pick(parser["diagnostics"], "q", float, None)

    prefix, write_snapshots = "run", True
    if parser.has_section("output"):
        out = parser["output"]
        prefix = out.get("prefix", "run").strip()
        write_snapshots = pick(out, "write_snapshots", _parse_bool, True)

    snapshot = {
        section: dict(parser[section]) for section in parser.sections()
    }
    return grid, u0, config, q, seed, prefix, write_snapshots, snapshot


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _cmd_simulate(args) -> int:
    from wlns.field import write_snapshot
    from wlns.nse_solver import BlowUpError, run

    try:
        grid, u0, config, q, seed, prefix, snaps, snapshot = _load_run_config(args.config)
    except (OSError, configparser.Error, ValueError) as exc:
        return _fail(str(exc))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        "simulate", snapshot, seed=seed, threads=args.threads_resolved
    ).start()

    halted = None
    try:
        result = run(u0, config, q=q)
    except BlowUpError as exc:
        halted = str(exc)
        result = exc.result
    if result is not None:
        if result.trace is not None:
            trace_path = out_dir / "trace.csv"
            result.trace.to_csv(trace_path)
            manifest.add_output(out_dir, trace_path)
        if snaps:
            for i, (t, u) in enumerate(zip(result.times, result.snapshots)):
                path = out_dir / f"{prefix}_{i:06d}.bin"
                write_snapshot(path, float(t), u)
                manifest.add_output(out_dir, path)
    manifest.halted = halted
    manifest.write(out_dir)
    if halted is not None:
        print(f"halted: {halted}", file=sys.stderr)
        return 2
    print(f"simulate: {len(result.times)} snapshots -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# diagnose


def _cmd_diagnose(args) -> int:
    from wlns.criteria import CriterionTrace, evaluate_row
    from wlns.degiorgi import CylinderMap, CylinderScheme, level_energy
    from wlns.field import read_vector_snapshot
    from wlns.nse_solver import SimulationResult, SolverConfig

    import numpy as np

    paths = sorted(glob.glob(os.path.join(args.snapshots, "*.bin")))
    if not paths:
        return _fail(f"no .bin snapshots under '{args.snapshots}'")
    times, fields = [], []
    for p in paths:
        try:
            t, u = read_vector_snapshot(p)
        except ValueError as exc:
            return _fail(f"{p}: {exc}")
        times.append(t)
        fields.append(u)
    order = np.argsort(times)
    times = [times[i] for i in order]
    fields = [fields[i] for i in order]
    grid = fields[0].grid

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        "diagnose",
        {"snapshots": args.snapshots, "q": args.q, "cylinder_scale": args.cylinder_scale},
        threads=args.threads_resolved,
    ).start()

    rows = [evaluate_row(u, args.q, t=t) for t, u in zip(times, fields)]
    trace_path = out_dir / "trace.csv"
    CriterionTrace.from_rows(args.q, rows).to_csv(trace_path)
    manifest.add_output(out_dir, trace_path)

    if args.cylinder_scale is not None:
        if len(times) < 2:
            return _fail("level-set energies need at least two snapshots")
        center = (
            _parse_triplet(args.cylinder_center, "--cylinder-center")
            if args.cylinder_center
            else (grid.length / 2.0,) * 3
        )
        dt = times[1] - times[0]
        stub = SolverConfig(dt=max(dt, 1e-12), t_end=max(times[-1], dt, 1e-12))
        result = SimulationResult(
            grid=grid,
            config=stub,
            times=np.asarray(times),
            snapshots=fields,
            cfl=np.empty(0),
            trace=None,
        )
        cmap = CylinderMap(center=center, scale=args.cylinder_scale, t_end=times[-1])
        try:
            table = level_energy(result, CylinderScheme(args.kmax), cmap)
        except ValueError as exc:
            return _fail(str(exc))
        levels_path = out_dir / "levels.csv"
        table.to_csv(levels_path)
        manifest.add_output(out_dir, levels_path)

    manifest.write(out_dir)
    print(f"diagnose: {len(times)} snapshots -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# counterexample


def _cmd_counterexample(args) -> int:
    from wlns.counterexample import (
        DyadicSchedule,
        criterion_vs_lorentz,
        write_schedule_csv,
    )

    try:
        schedule = DyadicSchedule(q=args.q, t_inf=args.t_inf)
        report = criterion_vs_lorentz(schedule, r=args.r, n_terms=args.terms)
    except ValueError as exc:
        return _fail(str(exc))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        "counterexample",
        {"q": args.q, "r": args.r, "terms": args.terms, "t_inf": args.t_inf},
        threads=args.threads_resolved,
    ).start()

    schedule_path = out_dir / "schedule.csv"
    write_schedule_csv(schedule_path, schedule, n_terms=args.terms, r=args.r)
    manifest.add_output(out_dir, schedule_path)

    separation_path = out_dir / "separation.csv"
    with open(separation_path, "w") as fh:
        fh.write(
            "N,criterion_partial,criterion_upper_bound,"
            "time_norm_log2,time_norm,time_norm_direct\n"
        )
        for i, n in enumerate(report.checkpoints):
            fh.write(
                f"{int(n)},{float(report.criterion_partials[i])!r},"
                f"{float(report.criterion_upper_bound)!r},"
                f"{float(report.time_norm_log2[i])!r},"
                f"{float(report.time_norms[i])!r},"
                f"{float(report.time_norms_direct[i])!r}\n"
            )
    manifest.add_output(out_dir, separation_path)
    manifest.write(out_dir)

    print(
        f"criterion partial sum at N={args.terms}: "
        f"{float(report.criterion_partials[-1])!r} "
        f"(upper bound {float(report.criterion_upper_bound)!r})"
    )
    print(f"L^(p,{args.r:g}) time norm at N={args.terms}: {float(report.time_norms[-1])!r}")
    return 0


# ---------------------------------------------------------------------------
# recursive


def _cmd_recursive(args) -> int:
    from wlns.degiorgi import recursive_sequence, threshold_scan

    try:
        if args.scan:
            bracket = threshold_scan(args.C, args.beta, k_max=args.kmax, tol=args.tol)
            print(f"critical W0 bracket: [{bracket.lower!r}, {bracket.upper!r}]")
            print(f"width: {bracket.width!r}")
            return 0
        if args.w0 is None:
            return _fail("--w0 is required unless --scan is given")
        result = recursive_sequence(args.C, args.beta, args.w0, args.kmax)
    except ValueError as exc:
        return _fail(str(exc))
    for k, w in enumerate(result.values):
        print(f"W[{k}] = {float(w)!r}")
    print(f"converged: {'true' if result.converged else 'false'}")
    return 0


# ---------------------------------------------------------------------------
# gronwall


def _cmd_gronwall(args) -> int:
    from wlns.gronwall import (
        BoundProblem,
        implicit_check,
        read_signal_csv,
        solve_bound,
        write_bound_csv,
    )

    import numpy as np

    try:
        times, values = read_signal_csv(args.b_csv)
        problem = BoundProblem.from_samples(times, values, c=args.C, h0=args.H0)
    except (OSError, ValueError) as exc:
        return _fail(f"{args.b_csv}: {exc}")

    solution = solve_bound(problem, dt=args.dt)
    deviations = implicit_check(solution)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        "gronwall",
        {"b_csv": args.b_csv, "C": args.C, "H0": args.H0, "dt": args.dt},
        threads=args.threads_resolved,
    ).start()
    bound_path = out_dir / "bound.csv"
    write_bound_csv(bound_path, solution, deviations)
    manifest.add_output(out_dir, bound_path)
    manifest.halted = solution.note or None
    manifest.write(out_dir)

    if solution.overflowed:
        print(f"halted: {solution.note}", file=sys.stderr)
        return 2
    print(
        f"H({float(solution.times[-1])!r}) = {float(solution.h[-1])!r}, "
        f"max |deviation| = {float(np.max(np.abs(deviations)))!r}"
    )
    return 0


# ---------------------------------------------------------------------------
# parser


_CONFIG_HELP = """\
run config keys ([solver] section):
  n                  grid points per axis (required, even, >= 8)
  box_length         box edge length (default 2*pi)
  viscosity          kinematic viscosity (default 1.0)
  dt, t_end          time step and final time (defaults 1e-3, 0.1)
  dealias_fraction   retained-mode fraction (default 2/3)
  snapshot_every     steps between snapshots (default 1)
  blowup_threshold   max|u| halt level (default 1e8)
  initial_condition  taylor_green | single_mode | random
  amplitude          initial-condition amplitude (default 1.0)
  seed               RNG seed (required for random)
  max_mode           band limit for random (default n/4)
  mode, direction    wavevector/direction triplets for single_mode

[diagnostics] q      criterion exponent; enables the trace CSV
[output] prefix      snapshot filename prefix (default run)
[output] write_snapshots   true/false (default true)
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wlns",
        description="Spectral Navier-Stokes toolbox: weak-norm criteria, "
        "level-set energies, the dyadic counterexample, and Gronwall bounds.",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="cap internal thread pools (fallback: WLNS_THREADS); "
        "outputs are identical for any cap",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "simulate",
        help="run the spectral solver from an INI config",
        epilog=_CONFIG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("config", help="INI run description")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("diagnose", help="recompute diagnostics from stored snapshots")
    p.add_argument("snapshots", help="directory of .bin snapshots")
    p.add_argument("--q", type=float, required=True, help="criterion exponent")
    p.add_argument("--out", required=True)
    p.add_argument(
        "--cylinder-scale",
        type=float,
        default=None,
        help="also emit the level-set energy table at this spatial scale",
    )
    p.add_argument(
        "--cylinder-center",
        default=None,
        help="cylinder center 'x,y,z' (default: box center)",
    )
    p.add_argument("--kmax", type=int, default=8, help="deepest truncation level")
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("counterexample", help="dyadic schedule tables and the separation report")
    p.add_argument("--q", type=float, default=6.0)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--terms", type=int, default=40)
    p.add_argument("--t-inf", type=float, default=1.0, dest="t_inf")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_counterexample)

    p = sub.add_parser("recursive", help="iterate the superlinear decay recursion")
    p.add_argument("--C", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--w0", type=float, default=None)
    p.add_argument("--kmax", type=int, default=60)
    p.add_argument("--scan", action="store_true", help="bracket the critical W0 instead")
    p.add_argument("--tol", type=float, default=1e-12, help="scan bracket width")
    p.set_defaults(func=_cmd_recursive)

    p = sub.add_parser("gronwall", help="integrate H' = C Psi(H) B(t) from a (t,B) CSV")
    p.add_argument("b_csv", help="two-column CSV of the signal B")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--H0", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=None, help="output grid spacing")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gronwall)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.threads_resolved = _apply_thread_cap(args.threads)
    except SystemExit as exc:
        return _fail(str(exc))
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

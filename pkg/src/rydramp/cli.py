"""Command-line entry points.

Four subcommands wire JSON run configurations to the library: ``optimize``
(ramp search), ``evolve`` (observable trace of a stored schedule),
``spectrum`` (eigenvalue flows, tracked projections and crossing markers)
and ``scan`` (ground-state phase map).  Every command writes a
``manifest.json`` recording the fully resolved configuration, the seed,
the tool version and all output paths; re-running a command from the
manifest's resolved configuration reproduces the outputs bitwise (the
wall-clock duration field aside).

Exit codes: 0 success, 2 configuration error (the message names the
offending field), 3 runtime or convergence error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .hamiltonian import CAP_ATOMS, build_full
from .model import ChainConfig, ConfigError, PulseSchedule, RunConfig
from .optimize import OptimizationProblem, classify_nqn, optimize
from .propagate import PropagationError, propagate, propagate_with_observables
from .spectrum import LabelTracker, bare_crossings
from . import diagnostics
from .scan import scan as run_scan

DEFAULT_SAMPLE_US = 0.01
DEFAULT_GRID = "-4:12:33,0.5:4.5:33"


def _fmt(x) -> str:
    """Shortest round-trip decimal form, stable across runs."""
    return repr(float(x))


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if not isinstance(v, str) else v
                              for v in row) + "\n")


@dataclass
class RunManifest:
    command: str
    resolved_config: dict
    seed: int
    version: str
    outputs: list
    duration_s: float

    def save(self, path: Path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2)
            fh.write("\n")


def _load_run_config(args) -> RunConfig:
    doc = {}
    if args.config is not None:
        with open(args.config) as fh:
            doc = json.load(fh)
    overrides = {
        "seed": args.seed, "restarts": getattr(args, "restarts", None),
        "tau_us": getattr(args, "tau_us", None),
        "n_segments": getattr(args, "segments", None),
    }
    for key, val in overrides.items():
        if val is not None:
            doc[key] = val
    return RunConfig.from_json_dict(doc)


def _emit_manifest(out: Path, command: str, rc: RunConfig, outputs: list,
                   t0: float) -> Path:
    manifest = RunManifest(
        command=command, resolved_config=rc.to_json_dict(), seed=rc.seed,
        version=__version__, outputs=[str(p) for p in outputs],
        duration_s=time.time() - t0)
    path = out / "manifest.json"
    manifest.save(path)
    return path


def _trace_rows(config: ChainConfig, schedule: PulseSchedule,
                sample_us: float, tol: float,
                amplitudes: bool = False) -> tuple:
    """Observable trace table for a schedule.

    Returns (header, rows).  The tracked-projection column reports the
    label dominating after the first fast sweep when the ramp classifies,
    otherwise the label dominating at the final time.  With ``amplitudes``
    the full state is appended as re_<bits>/im_<bits> columns.
    """
    t_end = schedule.total_duration
    samples = list(np.arange(0.0, t_end, sample_us)) + [t_end]
    wanted = ["fidelity", "lambda_i", "gamma", "delta_s", "n_tot", "local_n"]
    if amplitudes:
        wanted.append("amplitudes")
    series = propagate_with_observables(config, schedule, samples,
                                        observables=tuple(wanted), tol=tol)
    t = series["t_us"]
    gam = series["gamma"]
    windows = classify_nqn(schedule)
    if windows is not None:
        t_probe = schedule.ramp_start + windows.n1[1]
    else:
        t_probe = t[-1]
    probe_idx = int(np.argmin(np.abs(t - t_probe)))
    m = int(np.argmax(gam[probe_idx])) + 1
    n = config.n_atoms
    header = (["t_us", "omega_mhz", "delta_mhz", "F", "Lambda_I",
               f"Gamma_{m}", "DeltaS", "n_tot"]
              + [f"n_{i}" for i in range(1, n + 1)])
    if amplitudes:
        bits = [format(b, f"0{n}b") for b in range(config.dim)]
        header += [f"re_{b}" for b in bits] + [f"im_{b}" for b in bits]
    rows = []
    for k, tk in enumerate(t):
        om, de = schedule.evaluate(float(tk))
        row = [tk, om, de, series["fidelity"][k],
               series["lambda_i"][k], gam[k, m - 1],
               series["delta_s"][k], series["n_tot"][k],
               *series["local_n"][k]]
        if amplitudes:
            psi = series["amplitudes"][k]
            row.extend(np.real(psi))
            row.extend(np.imag(psi))
        rows.append(row)
    return header, rows


def cmd_optimize(args) -> int:
    t0 = time.time()
    rc = _load_run_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = OptimizationProblem.from_run_config(rc)
    report = optimize(problem, workers=args.workers)
    report_path = out / "report.json"
    report.save(report_path)
    sched_path = out / "best_schedule.json"
    report.best_schedule.save(sched_path)
    header, rows = _trace_rows(rc.chain(), report.best_schedule,
                               args.sample_us, args.tol)
    trace_path = out / "trace.csv"
    _write_csv(trace_path, header, rows)
    outputs = [report_path, sched_path, trace_path]
    if args.loss_history:
        hist_path = out / "loss_history.csv"
        _write_csv(hist_path, ["restart", "iteration", "loss"],
                   [[str(r), str(i), v]
                    for r, hist in enumerate(report.loss_history)
                    for i, v in enumerate(hist)])
        outputs.append(hist_path)
    _emit_manifest(out, "optimize", rc, outputs, t0)
    print(f"best fidelity {report.best_fidelity:.6f} "
          f"(restart {report.best_restart}); outputs in {out}")
    return 0


def cmd_evolve(args) -> int:
    t0 = time.time()
    rc = _load_run_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.schedule is None:
        raise ConfigError("schedule: a schedule document is required")
    schedule = PulseSchedule.load(args.schedule)
    config = rc.chain()
    if abs(schedule.envelope.hold - config.omega) > 1e-9:
        raise ConfigError(
            f"omega_mhz: schedule holds {schedule.envelope.hold} but the "
            f"configuration drives at {config.omega}")
    header, rows = _trace_rows(config, schedule, args.sample_us, args.tol,
                               amplitudes=args.amplitudes)
    trace_path = out / "trace.csv"
    _write_csv(trace_path, header, rows)
    _emit_manifest(out, "evolve", rc, [trace_path], t0)
    print(f"trace written to {trace_path}")
    return 0


def cmd_spectrum(args) -> int:
    t0 = time.time()
    rc = _load_run_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = rc.chain()
    if config.n_atoms > CAP_ATOMS:
        raise ConfigError(
            f"n_atoms: {config.n_atoms} exceeds the dense eigensolve cap")
    schedule = PulseSchedule.load(args.schedule) if args.schedule \
        else rc.seed_schedule()
    t_end = schedule.total_duration
    samples = list(np.arange(0.0, t_end, args.sample_us)) + [t_end]
    result = propagate(config, schedule, tol=args.tol, sample_times=samples)
    tracker = LabelTracker()
    dim = config.dim
    flow_rows = []
    gamma_rows = []
    for tk, psi in result.trace:
        om, de = schedule.evaluate(tk)
        frame = tracker.update(build_full(config, om, de), tk)
        by_label = np.empty(dim)
        by_label[frame.labels - 1] = frame.eigenvalues
        gam = diagnostics.adiabatic_projections(psi, frame)
        flow_rows.append([tk, de, *by_label])
        gamma_rows.append([tk, de, *gam])
    flow_path = out / "eigenflow.csv"
    _write_csv(flow_path,
               ["t_us", "delta_mhz"] + [f"E_{m}_rad_per_us"
                                        for m in range(1, dim + 1)],
               flow_rows)
    gamma_path = out / "gamma.csv"
    _write_csv(gamma_path,
               ["t_us", "delta_mhz"] + [f"Gamma_{m}" for m in range(1, dim + 1)],
               gamma_rows)
    # detunings where low-band bare energies cross, with ramp times
    crossings = bare_crossings(config)
    cross_rows = []
    tgrid = np.array([tk for tk, _ in result.trace])
    dgrid = schedule.delta_at(tgrid)
    for cv in crossings:
        hit = np.nonzero(np.diff(np.sign(dgrid - cv)) != 0)[0]
        ts = [float(tgrid[i]) for i in hit]
        cross_rows.append([cv, ";".join(f"{v:.6f}" for v in ts)])
    cross_path = out / "crossings.csv"
    with open(cross_path, "w") as fh:
        fh.write("delta_mhz,t_us_list\n")
        for cv, ts in cross_rows:
            fh.write(f"{_fmt(cv)},{ts}\n")
    _emit_manifest(out, "spectrum", rc, [flow_path, gamma_path, cross_path], t0)
    print(f"spectrum tables written to {out}")
    return 0


def _parse_grid(spec: str) -> tuple:
    try:
        d_part, r_part = spec.split(",")
        dmin, dmax, dn = d_part.split(":")
        rmin, rmax, rn = r_part.split(":")
        deltas = np.linspace(float(dmin), float(dmax), int(dn))
        ratios = np.linspace(float(rmin), float(rmax), int(rn))
    except (ValueError, TypeError) as exc:
        raise ConfigError(
            f"grid: expected 'dmin:dmax:steps,rmin:rmax:steps', got {spec!r}"
        ) from exc
    if deltas.size == 0 or ratios.size == 0:
        raise ConfigError("grid: empty axis")
    return deltas, ratios


def cmd_scan(args) -> int:
    t0 = time.time()
    rc = _load_run_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    deltas, ratios = _parse_grid(args.grid)
    points = run_scan(rc.chain(), deltas, ratios)
    map_path = out / "phase_map.csv"
    _write_csv(map_path,
               ["delta_over_omega", "rb_over_a", "label", "order_strength"],
               [[p.delta_over_omega, p.rb_over_a, p.phase_label,
                 p.order_strength] for p in points])
    _emit_manifest(out, "scan", rc, [map_path], t0)
    print(f"phase map written to {map_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rydramp",
        description="Detuning-ramp design and analysis for 1D Rydberg chains")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, schedule=False):
        p.add_argument("--config", type=str, default=None,
                       help="JSON run configuration")
        p.add_argument("--out", type=str, default="out",
                       help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--tol", type=float, default=1e-8,
                       help="propagation tolerance")
        p.add_argument("--sample-us", dest="sample_us", type=float,
                       default=DEFAULT_SAMPLE_US)
        if schedule:
            p.add_argument("--schedule", type=str, default=None,
                           help="JSON schedule document")

    p_opt = sub.add_parser("optimize", help="multi-start ramp search")
    common(p_opt)
    p_opt.add_argument("--restarts", type=int, default=None)
    p_opt.add_argument("--tau-us", dest="tau_us", type=float, default=None)
    p_opt.add_argument("--segments", type=int, default=None)
    p_opt.add_argument("--workers", type=int, default=1)
    p_opt.add_argument("--loss-history", dest="loss_history",
                       action="store_true",
                       help="also write per-restart loss_history.csv")
    p_opt.set_defaults(func=cmd_optimize)

    p_ev = sub.add_parser("evolve", help="observable trace of a schedule")
    common(p_ev, schedule=True)
    p_ev.add_argument("--amplitudes", action="store_true",
                      help="append re/im state columns to the trace")
    p_ev.set_defaults(func=cmd_evolve)

    p_sp = sub.add_parser("spectrum", help="eigenflows and projections")
    common(p_sp, schedule=True)
    p_sp.set_defaults(func=cmd_spectrum)

    p_sc = sub.add_parser("scan", help="ground-state phase map")
    common(p_sc)
    p_sc.add_argument("--grid", type=str, default=DEFAULT_GRID,
                      help="dmin:dmax:steps,rmin:rmax:steps")
    p_sc.set_defaults(func=cmd_scan)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (PropagationError, RuntimeError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

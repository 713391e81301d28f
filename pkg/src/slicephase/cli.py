"""Command-line interface: ``slicephase <subcommand> [options]``.

Exit codes: 0 success, 1 selftest failure, 2 config or input error,
3 infeasible optimization bounds, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dynamics import ensemble_fidelity, ensemble_population, fidelity_trace, transfer_amplitudes
from .ensemble import SampleSet, build_physical_samples
from .files import (ConfigError, RunConfig, atomic_write_text, dump_json, load_config,
                    read_pulse, scan_csv, sweep_csv, trace_csv, write_pulse)
from .grape import InfeasibleBoundsError, multistart_optimize
from .pulse import InvalidScheduleError, rectangular_pi
from .scans import scan_2d, sweep_response, sweep_slices, sweep_temperature
from .selftest import run_selftest

EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3, 4
US = 1e-6

log = logging.getLogger("slicephase")


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        if args.threads < 0:
            raise ConfigError("--threads: must be >= 0")
        cfg.threads = args.threads
    cfg.optimization = replace(cfg.optimization, seed=cfg.seed, threads=cfg.threads)
    if args.out is not None:
        cfg.output_dir = args.out
    if getattr(args, "pulse", None):
        cfg.pulse = args.pulse
    return cfg


def _pulse(cfg: RunConfig):
    if not cfg.pulse:
        raise ConfigError("pulse: no pulse file given (use --pulse or the config field)")
    return read_pulse(cfg.pulse)


def _physical(cfg: RunConfig):
    return build_physical_samples(cfg.ensemble, cfg.eval_n_r, cfg.eval_n_v)


def _out(cfg: RunConfig, name: str) -> Path:
    return Path(cfg.output_dir) / name


def cmd_optimize(args) -> int:
    cfg = _config(args)
    opt = cfg.optimization
    opt.check_feasible()
    result = multistart_optimize(opt, ensemble=cfg.ensemble)
    f_phys = ensemble_fidelity(result.schedule, _physical(cfg), opt.ramp_substeps, cfg.threads)
    t = opt.training
    metadata = {
        "seed": cfg.seed,
        "n_restarts": opt.n_restarts,
        "training": {"mode": t.mode, "delta_range_over_omega0": list(t.delta_range),
                     "omega_range_over_omega0": list(t.omega_range),
                     "n_delta": t.n_delta, "n_omega": t.n_omega},
        "evaluation_grid": [cfg.eval_n_r, cfg.eval_n_v],
        "F_ave": f_phys,
        "F_ave_training": result.fidelity,
        "ramp_substeps": opt.ramp_substeps,
    }
    write_pulse(_out(cfg, "pulse.json"), result.schedule, cfg.ensemble.omega0, metadata)
    summary = {
        "F_ave": f_phys,
        "F_ave_training": result.fidelity,
        "best_restart": result.restart_index,
        "restart_fidelities": result.restart_fidelities,
        "iterations": result.iterations,
        "converged": result.converged,
        "message": result.message,
        "wall_time_s": result.wall_time,
    }
    atomic_write_text(_out(cfg, "summary.json"), dump_json(summary))
    print(f"F_ave={f_phys:.6f} (training {result.fidelity:.6f}), "
          f"best restart {result.restart_index}, wrote {_out(cfg, 'pulse.json')}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    pf = _pulse(cfg)
    sched = pf.schedule
    if args.tau_us is not None:
        try:
            sched = sched.with_tau(args.tau_us * US)
        except InvalidScheduleError as exc:
            raise ConfigError(f"--tau-us: {exc}") from None
    ensemble = cfg.ensemble
    if args.temperature_uK is not None:
        if args.temperature_uK <= 0:
            raise ConfigError("--temperature-uK: must be positive")
        ensemble = ensemble.with_temperature(args.temperature_uK * US)
    if args.point is not None:
        d, o = args.point
        samples = SampleSet.single(d * ensemble.omega0, o * ensemble.omega0)
    else:
        samples = build_physical_samples(ensemble, cfg.eval_n_r, cfg.eval_n_v)
    substeps = cfg.optimization.ramp_substeps
    amps = transfer_amplitudes(sched, samples, substeps, cfg.threads)
    pops = np.abs(amps) ** 2
    metrics = {
        "F_ave": ensemble_fidelity(sched, samples, substeps, cfg.threads),
        "P_e_ave": ensemble_population(sched, samples, substeps, cfg.threads),
        "f_real_min": float(amps.real.min()),
        "f_real_max": float(amps.real.max()),
        "P_e_min": float(pops.min()),
        "P_e_max": float(pops.max()),
        "n_samples": len(samples),
        "tau_resp_us": sched.tau_resp / US,
    }
    if "F_ave" in pf.metadata:
        metrics["F_ave_recorded"] = pf.metadata["F_ave"]
    print(dump_json(metrics), end="")
    if args.out is not None:
        atomic_write_text(_out(cfg, "metrics.json"), dump_json(metrics))
        if args.trace:
            tr = fidelity_trace(sched, samples, ramp_substeps=substeps, threads=cfg.threads)
            atomic_write_text(_out(cfg, "fidelity_trace.csv"), trace_csv(tr.times, tr.values))
    return EXIT_OK


def cmd_scan2d(args) -> int:
    cfg = _config(args)
    pf = _pulse(cfg)
    s = cfg.scan
    w0 = cfg.ensemble.omega0
    grid = scan_2d(pf.schedule, np.multiply(s.delta_range_over_omega0, w0),
                   np.multiply(s.omega_range_over_omega0, w0), s.n_delta, s.n_omega,
                   s.metric, cfg.optimization.ramp_substeps, cfg.threads)
    path = _out(cfg, "scan2d.csv")
    atomic_write_text(path, scan_csv(grid, w0))
    print(f"wrote {path}")
    return EXIT_OK


def _write_sweep(cfg, name, result) -> None:
    path = _out(cfg, name + ".csv")
    atomic_write_text(path, sweep_csv(result))
    for i, msg in result.errors.items():
        print(f"warning: {result.axis_name}={result.axis[i]:g} skipped: {msg}", file=sys.stderr)
    print(f"wrote {path}")


def cmd_sweep_temp(args) -> int:
    cfg = _config(args)
    pf = _pulse(cfg)
    temps = np.asarray(cfg.sweeps.temperatures_uK) * US
    result = sweep_temperature(pf.schedule, temps, cfg.ensemble, cfg.eval_n_r, cfg.eval_n_v,
                               ramp_substeps=cfg.optimization.ramp_substeps,
                               threads=cfg.threads)
    _write_sweep(cfg, "sweep_temperature", result)
    return EXIT_OK


def cmd_sweep_resp(args) -> int:
    cfg = _config(args)
    mode = cfg.sweeps.response_mode
    schedule = _pulse(cfg).schedule if mode == "fixed" else None
    cfg.optimization.check_feasible()
    taus = np.asarray(cfg.sweeps.tau_values_us) * US
    result = sweep_response(cfg.optimization, taus, mode, schedule, cfg.ensemble,
                            cfg.eval_n_r, cfg.eval_n_v, cfg.threads)
    _write_sweep(cfg, "sweep_response", result)
    return EXIT_OK


def cmd_sweep_slices(args) -> int:
    cfg = _config(args)
    result = sweep_slices(cfg.optimization, cfg.sweeps.n_values, cfg.sweeps.slice_time_us * US,
                          cfg.ensemble, cfg.eval_n_r, cfg.eval_n_v, cfg.threads)
    _write_sweep(cfg, "sweep_slices", result)
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = _config(args)
    sched = rectangular_pi(cfg.ensemble.omega0)
    path = _out(cfg, "baseline_pulse.json")
    write_pulse(path, sched, cfg.ensemble.omega0, {"kind": "rectangular pi pulse"})
    print(f"wrote {path} (duration {sched.total_T / US:.6g} us)")
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = run_selftest(args.seed or 0)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: error {r.error:.3e} "
              f"(tolerance {r.tolerance:.0e})")
    return EXIT_OK if all(r.passed for r in results) else EXIT_SELFTEST


def _point(text: str):
    try:
        d, o = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected DELTA,OMEGA in units of omega0") from None
    return d, o


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slicephase", description="Slice-phase pi-pulse design and robustness studies.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log optimizer progress")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run-config JSON file (defaults used if omitted)")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="random seed (overrides seed)")
    common.add_argument("--threads", type=int, help="worker threads, 0 = all cores")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, pulse=False):
        p = sub.add_parser(name, parents=[common], help=help_text)
        if pulse:
            p.add_argument("--pulse", help="pulse JSON file")
        p.set_defaults(func=func)
        return p

    add("optimize", cmd_optimize, "design a pulse; writes pulse.json and summary.json")
    ev = add("evaluate", cmd_evaluate, "ensemble metrics of a pulse file", pulse=True)
    ev.add_argument("--tau-us", type=float, help="override the response time (us)")
    ev.add_argument("--temperature-uK", type=float, help="override the temperature (uK)")
    ev.add_argument("--point", type=_point, metavar="DELTA,OMEGA",
                    help="single atom at (delta, Omega) in units of omega0")
    ev.add_argument("--trace", action="store_true",
                    help="also write fidelity_trace.csv (requires --out)")
    add("scan2d", cmd_scan2d, "(delta, Omega) map; writes scan2d.csv", pulse=True)
    add("sweep-temp", cmd_sweep_temp, "temperature sweep; writes sweep_temperature.csv",
        pulse=True)
    add("sweep-resp", cmd_sweep_resp, "response-time sweep; writes sweep_response.csv",
        pulse=True)
    add("sweep-slices", cmd_sweep_slices, "slice-count sweep; writes sweep_slices.csv")
    add("baseline", cmd_baseline, "rectangular pi pulse; writes baseline_pulse.json")
    add("selftest", cmd_selftest, "run the built-in oracle checks")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleBoundsError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

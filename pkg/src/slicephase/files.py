"""Run-config and pulse-file formats (JSON) and CSV output.

Files store angular frequencies in rad/s and times in microseconds.  Config
files may give any ``<name>_rad_s`` field as ``<name>_kHz_times_2pi``
instead.  All writes go through a temporary file and an atomic rename.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .ensemble import EnsembleSpec, sigma_v_from_temperature
from .grape import OptimizationConfig, TrainingSpec
from .pulse import InvalidScheduleError, SliceSchedule
from .scans import ScanGrid2D, SweepResult

FORMAT_VERSION = 1
US = 1e-6


class ConfigError(ValueError):
    """Invalid config or pulse file; the message names the offending field."""


# --- atomic output -----------------------------------------------------------

def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _load_json(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


# --- field helpers -----------------------------------------------------------

class _Section:
    """Typed access to one config object with field-qualified errors."""

    def __init__(self, data: Any, where: str):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{where}: expected an object")
        self.data = dict(data)
        self.where = where
        self.used: set[str] = set()

    def name(self, key):
        return f"{self.where}.{key}" if self.where else key

    def has(self, key):
        return key in self.data

    def get(self, key, default, kind=float):
        if key not in self.data:
            return default
        self.used.add(key)
        value = self.data[key]
        try:
            if kind is bool:
                if not isinstance(value, bool):
                    raise TypeError
                return value
            if kind is int:
                if isinstance(value, bool) or int(value) != value:
                    raise TypeError
                return int(value)
            if kind is str:
                if not isinstance(value, str):
                    raise TypeError
                return value
            if kind is list:
                return [float(v) for v in value]
            out = float(value)
            if not math.isfinite(out):
                raise TypeError
            return out
        except (TypeError, ValueError):
            raise ConfigError(f"{self.name(key)}: invalid value {value!r}") from None

    def rate(self, key, default):
        """``<key>_rad_s`` or ``<key>_kHz_times_2pi``."""
        alt = f"{key}_kHz_times_2pi"
        main = f"{key}_rad_s"
        if self.has(alt) and self.has(main):
            raise ConfigError(f"{self.name(main)}: also given as {alt}")
        if self.has(alt):
            return 2.0 * math.pi * 1e3 * self.get(alt, None)
        return self.get(main, default)

    def rate_key(self, key):
        alt = f"{key}_kHz_times_2pi"
        return alt if self.has(alt) else f"{key}_rad_s"

    def section(self, key):
        self.used.add(key)
        return _Section(self.data.get(key), self.name(key))

    def finish(self):
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ConfigError(f"{self.name(extra[0])}: unknown field")


def _positive(sec: _Section, key: str, value: float) -> float:
    if not value > 0:
        raise ConfigError(f"{sec.name(key)}: must be positive, got {value}")
    return value


# --- run config --------------------------------------------------------------

@dataclass
class ScanSettings:
    n_delta: int = 81
    n_omega: int = 81
    delta_range_over_omega0: tuple[float, float] = (-1.0, 1.0)
    omega_range_over_omega0: tuple[float, float] = (0.1, 1.9)
    metric: str = "population"


@dataclass
class SweepSettings:
    temperatures_uK: list[float] = field(
        default_factory=lambda: [0.3, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0])
    tau_values_us: list[float] = field(
        default_factory=lambda: [0.0, 0.4, 0.8, 1.2, 1.6, 2.0, 2.4])
    response_mode: str = "reoptimize"
    n_values: list[int] = field(default_factory=lambda: [1, 4, 8, 12, 16, 20, 24, 32, 40])
    slice_time_us: float = 10.0


@dataclass
class RunConfig:
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    optimization: OptimizationConfig = field(default_factory=OptimizationConfig)
    eval_n_r: int = 21
    eval_n_v: int = 21
    scan: ScanSettings = field(default_factory=ScanSettings)
    sweeps: SweepSettings = field(default_factory=SweepSettings)
    output_dir: str = "out"
    seed: int = 0
    threads: int = 1
    pulse: str | None = None


def _range(sec: _Section, key: str, default):
    if not sec.has(key):
        return tuple(default)
    values = sec.get(key, None, list)
    if len(values) != 2 or values[0] > values[1]:
        raise ConfigError(f"{sec.name(key)}: expected an ordered pair [lo, hi]")
    return (values[0], values[1])


def parse_config(data: dict) -> RunConfig:
    """Build a :class:`RunConfig` from a parsed JSON object."""
    top = _Section(data, "")
    version = top.get("format_version", FORMAT_VERSION, int)
    if version != FORMAT_VERSION:
        raise ConfigError(f"format_version: unsupported version {version}")
    d_ens = EnsembleSpec()
    e = top.section("ensemble")
    temperature = e.get("temperature_K", None)
    if e.has("temperature_uK"):
        if temperature is not None:
            raise ConfigError("ensemble.temperature_uK: also given as temperature_K")
        temperature = e.get("temperature_uK", None) * 1e-6
    mass = _positive(e, "mass_kg", e.get("mass_kg", d_ens.mass))
    sigma_v = e.get("sigma_v_m_s", None)
    if sigma_v is not None and temperature is not None:
        raise ConfigError("ensemble.sigma_v_m_s: give either sigma_v or temperature")
    if temperature is not None:
        sigma_v = sigma_v_from_temperature(_positive(e, "temperature_K", temperature), mass)
    try:
        ensemble = EnsembleSpec(
            sigma_r=_positive(e, "sigma_r_m", e.get("sigma_r_m", d_ens.sigma_r)),
            sigma_v=_positive(e, "sigma_v_m_s", sigma_v if sigma_v is not None else d_ens.sigma_v),
            waist=_positive(e, "waist_m", e.get("waist_m", d_ens.waist)),
            omega0=_positive(e, e.rate_key("omega0"), e.rate("omega0", d_ens.omega0)),
            k_eff=_positive(e, "k_eff_rad_m", e.get("k_eff_rad_m", d_ens.k_eff)),
            delta_offset=e.rate("delta_offset", d_ens.delta_offset),
            mass=mass)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"ensemble: {exc}") from None
    e.finish()

    d_opt = OptimizationConfig()
    o = top.section("optimization")
    t = o.section("training")
    d_tr = d_opt.training
    training = TrainingSpec(
        mode=t.get("mode", d_tr.mode, str),
        delta_range=_range(t, "delta_range_over_omega0", d_tr.delta_range),
        omega_range=_range(t, "omega_range_over_omega0", d_tr.omega_range),
        n_delta=t.get("n_delta", d_tr.n_delta, int),
        n_omega=t.get("n_omega", d_tr.n_omega, int),
        n_r=t.get("n_r", d_tr.n_r, int),
        n_v=t.get("n_v", d_tr.n_v, int))
    if training.mode not in ("window", "physical"):
        raise ConfigError(f"optimization.training.mode: unknown mode {training.mode!r}")
    for key in ("n_delta", "n_omega"):
        if getattr(training, key) < 1:
            raise ConfigError(f"optimization.training.{key}: must be >= 1")
    for key in ("n_r", "n_v"):
        if getattr(training, key) < 2:
            raise ConfigError(f"optimization.training.{key}: must be >= 2")
    t.finish()
    seed = top.get("seed", 0, int)
    if seed < 0:
        raise ConfigError("seed: must be non-negative")
    threads = top.get("threads", 1, int)
    if threads < 0:
        raise ConfigError("threads: must be >= 0")
    opt_fields = dict(
        n_slices=o.get("n_slices", d_opt.n_slices, int),
        total_T=o.get("total_T_us", d_opt.total_T / US) * US,
        dt_min=o.get("dt_min_us", d_opt.dt_min / US) * US,
        dt_max=o.get("dt_max_us", d_opt.dt_max / US) * US,
        tau_resp=o.get("tau_resp_us", d_opt.tau_resp / US) * US,
        symmetric=o.get("symmetric", d_opt.symmetric, bool),
        max_iterations=o.get("max_iterations", d_opt.max_iterations, int),
        gradient_tolerance=o.get("gradient_tolerance", d_opt.gradient_tolerance),
        n_restarts=o.get("n_restarts", d_opt.n_restarts, int),
        ramp_substeps=o.get("ramp_substeps", d_opt.ramp_substeps, int),
        history_size=o.get("history_size", d_opt.history_size, int))
    o.finish()
    for key, value in opt_fields.items():
        if key in ("tau_resp", "symmetric"):
            continue
        if not value > 0:
            label = {"total_T": "total_T_us", "dt_min": "dt_min_us", "dt_max": "dt_max_us"}
            raise ConfigError(f"optimization.{label.get(key, key)}: must be positive")
    if opt_fields["tau_resp"] < 0:
        raise ConfigError("optimization.tau_resp_us: must be >= 0")
    if opt_fields["dt_min"] > opt_fields["dt_max"]:
        raise ConfigError("optimization.dt_min_us: exceeds dt_max_us")
    try:
        optimization = OptimizationConfig(**opt_fields, training=training, seed=seed,
                                          threads=threads)
    except ValueError as exc:
        raise ConfigError(f"optimization: {exc}") from None

    ev = top.section("evaluation")
    eval_n_r = ev.get("n_r", 21, int)
    eval_n_v = ev.get("n_v", 21, int)
    if eval_n_r < 2 or eval_n_v < 2:
        raise ConfigError("evaluation.n_r: grid sizes must be >= 2")
    ev.finish()

    d_scan = ScanSettings()
    s = top.section("scan2d")
    scan = ScanSettings(
        n_delta=s.get("n_delta", d_scan.n_delta, int),
        n_omega=s.get("n_omega", d_scan.n_omega, int),
        delta_range_over_omega0=_range(s, "delta_range_over_omega0",
                                       d_scan.delta_range_over_omega0),
        omega_range_over_omega0=_range(s, "omega_range_over_omega0",
                                       d_scan.omega_range_over_omega0),
        metric=s.get("metric", d_scan.metric, str))
    if scan.metric not in ("population", "fidelity_real"):
        raise ConfigError(f"scan2d.metric: unknown metric {scan.metric!r}")
    if scan.n_delta < 2 or scan.n_omega < 2:
        raise ConfigError("scan2d.n_delta: grids need at least 2 points per axis")
    s.finish()

    d_sw = SweepSettings()
    w = top.section("sweeps")
    sweeps = SweepSettings(
        temperatures_uK=w.get("temperatures_uK", d_sw.temperatures_uK, list),
        tau_values_us=w.get("tau_values_us", d_sw.tau_values_us, list),
        response_mode=w.get("response_mode", d_sw.response_mode, str),
        n_values=[int(v) for v in w.get("n_values", d_sw.n_values, list)],
        slice_time_us=w.get("slice_time_us", d_sw.slice_time_us))
    if any(v <= 0 for v in sweeps.temperatures_uK):
        raise ConfigError("sweeps.temperatures_uK: temperatures must be positive")
    if any(v < 0 for v in sweeps.tau_values_us):
        raise ConfigError("sweeps.tau_values_us: response times must be >= 0")
    if sweeps.response_mode not in ("reoptimize", "fixed"):
        raise ConfigError(f"sweeps.response_mode: unknown mode {sweeps.response_mode!r}")
    if any(n < 1 for n in sweeps.n_values):
        raise ConfigError("sweeps.n_values: slice counts must be >= 1")
    w.finish()

    pulse = top.get("pulse", None, str)
    output_dir = top.get("output_dir", "out", str)
    top.finish()
    return RunConfig(ensemble, optimization, eval_n_r, eval_n_v, scan, sweeps, output_dir,
                     seed, threads, pulse)


def config_to_dict(cfg: RunConfig) -> dict:
    """Canonical JSON-ready form; ``parse_config`` inverts it exactly."""
    e = cfg.ensemble
    o = cfg.optimization
    t = o.training
    out = {
        "format_version": FORMAT_VERSION,
        "seed": cfg.seed,
        "threads": cfg.threads,
        "output_dir": cfg.output_dir,
        "ensemble": {
            "sigma_r_m": e.sigma_r, "sigma_v_m_s": e.sigma_v, "waist_m": e.waist,
            "omega0_rad_s": e.omega0, "k_eff_rad_m": e.k_eff,
            "delta_offset_rad_s": e.delta_offset, "mass_kg": e.mass,
        },
        "optimization": {
            "n_slices": o.n_slices, "total_T_us": o.total_T / US, "dt_min_us": o.dt_min / US,
            "dt_max_us": o.dt_max / US, "tau_resp_us": o.tau_resp / US,
            "symmetric": o.symmetric, "max_iterations": o.max_iterations,
            "gradient_tolerance": o.gradient_tolerance, "n_restarts": o.n_restarts,
            "ramp_substeps": o.ramp_substeps, "history_size": o.history_size,
            "training": {
                "mode": t.mode, "delta_range_over_omega0": list(t.delta_range),
                "omega_range_over_omega0": list(t.omega_range), "n_delta": t.n_delta,
                "n_omega": t.n_omega, "n_r": t.n_r, "n_v": t.n_v,
            },
        },
        "evaluation": {"n_r": cfg.eval_n_r, "n_v": cfg.eval_n_v},
        "scan2d": {**asdict(cfg.scan),
                   "delta_range_over_omega0": list(cfg.scan.delta_range_over_omega0),
                   "omega_range_over_omega0": list(cfg.scan.omega_range_over_omega0)},
        "sweeps": asdict(cfg.sweeps),
    }
    if cfg.pulse is not None:
        out["pulse"] = cfg.pulse
    return out


def load_config(path) -> RunConfig:
    cfg = parse_config(_load_json(path))
    if cfg.pulse is not None and not os.path.isabs(cfg.pulse):
        cfg.pulse = str(Path(path).parent / cfg.pulse)
    return cfg


# --- pulse files -------------------------------------------------------------

def pulse_to_dict(schedule: SliceSchedule, omega0: float, metadata: dict | None = None) -> dict:
    out = {
        "format_version": FORMAT_VERSION,
        "N": schedule.n_slices,
        "total_T_us": schedule.total_T / US,
        "durations_us": [d / US for d in schedule.durations],
        "phases_rad": [float(p) for p in schedule.phases],
        "tau_resp_us": schedule.tau_resp / US,
        "symmetric": schedule.symmetric,
        "omega0_rad_s": omega0,
    }
    if metadata:
        out["metadata"] = metadata
    return out


@dataclass
class PulseFile:
    schedule: SliceSchedule
    omega0: float
    metadata: dict


def parse_pulse(data: dict, where: str = "pulse") -> PulseFile:
    sec = _Section(data, "")
    version = sec.get("format_version", None, int)
    if version is None:
        raise ConfigError(f"{where}: format_version: missing")
    if version != FORMAT_VERSION:
        raise ConfigError(f"{where}: format_version: unsupported version {version}")
    for key in ("N", "durations_us", "phases_rad", "omega0_rad_s"):
        if not sec.has(key):
            raise ConfigError(f"{where}: {key}: missing")
    n = sec.get("N", None, int)
    durations = sec.get("durations_us", None, list)
    phases = sec.get("phases_rad", None, list)
    if len(durations) != n:
        raise ConfigError(f"{where}: durations_us: {len(durations)} entries for N={n}")
    if len(phases) != n:
        raise ConfigError(f"{where}: phases_rad: {len(phases)} entries for N={n}")
    omega0 = sec.get("omega0_rad_s", None)
    if not omega0 > 0:
        raise ConfigError(f"{where}: omega0_rad_s: must be positive")
    tau = sec.get("tau_resp_us", 0.0)
    symmetric = sec.get("symmetric", False, bool)
    total = sec.get("total_T_us", None)
    meta = sec.data.get("metadata", {})
    sec.used.add("metadata")
    if not isinstance(meta, dict):
        raise ConfigError(f"{where}: metadata: expected an object")
    sec.finish()
    try:
        sched = SliceSchedule(np.array(durations) * US, phases, tau * US, symmetric)
    except InvalidScheduleError as exc:
        raise ConfigError(f"{where}: durations_us/phases_rad: {exc}") from None
    if total is not None and not math.isclose(sched.total_T / US, total, rel_tol=1e-9):
        raise ConfigError(f"{where}: total_T_us: {total} does not match the sum of durations_us")
    return PulseFile(sched, omega0, meta)


def write_pulse(path, schedule: SliceSchedule, omega0: float, metadata: dict | None = None):
    atomic_write_text(path, dump_json(pulse_to_dict(schedule, omega0, metadata)))


def read_pulse(path) -> PulseFile:
    return parse_pulse(_load_json(path), str(path))


# --- CSV ---------------------------------------------------------------------

def _fmt(x) -> str:
    return format(float(x), ".12g")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return buf.getvalue()


def scan_csv(grid: ScanGrid2D, omega0: float) -> str:
    """Long format ``delta_over_omega0,omega_over_omega0,value``."""
    rows = ((d / omega0, o / omega0, grid.values[i, j])
            for i, d in enumerate(grid.delta_values)
            for j, o in enumerate(grid.omega_values))
    return _csv_text(["delta_over_omega0", "omega_over_omega0", "value"], rows)


_AXIS_COLUMNS = {
    "temperature_K": ("temperature_uK", 1e6),
    "tau_resp_s": ("tau_resp_us", 1e6),
    "n_slices": ("n_slices", 1.0),
}


def sweep_csv(result: SweepResult) -> str:
    """``<axis>_<unit>,optimized,rectangular``; failed points are ``nan``."""
    name, scale = _AXIS_COLUMNS.get(result.axis_name, (result.axis_name, 1.0))
    rows = ((a * scale, o, r) for a, o, r in zip(result.axis, result.optimized,
                                                 result.rectangular))
    return _csv_text([name, "optimized", "rectangular"], rows)


def trace_csv(times, values) -> str:
    return _csv_text(["time_us", "fidelity_real"], zip(np.asarray(times) / US, values))


# --- shipped reference pulses -------------------------------------------------

REFERENCE_PULSES = ("rectangular", "optimized_n20")


def reference_pulse_path(name: str) -> Path:
    """Path of a pulse file shipped with the package (see ``REFERENCE_PULSES``)."""
    if name not in REFERENCE_PULSES:
        raise ValueError(f"unknown reference pulse {name!r}; choose from {REFERENCE_PULSES}")
    from importlib.resources import files as _resources
    return Path(str(_resources("slicephase") / "data" / f"{name}.json"))


def reference_pulse(name: str) -> PulseFile:
    return read_pulse(reference_pulse_path(name))

"""Robustness studies: 2-D (delta, Omega) maps and 1-D parameter sweeps.

Sweeps report the physical-ensemble fidelity of an optimized pulse next to
the rectangular pi-pulse baseline.  Sweep points that cannot be evaluated
(for example a response time longer than the shortest slice) are recorded
in ``errors`` and left as NaN instead of aborting the sweep.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import ensemble_fidelity, transfer_amplitudes
from .ensemble import EnsembleSpec, SampleSet, build_physical_samples
from .grape import InfeasibleBoundsError, OptimizationConfig, multistart_optimize
from .pulse import DEFAULT_RAMP_SUBSTEPS, InvalidScheduleError, SliceSchedule, rectangular_pi

log = logging.getLogger(__name__)

METRICS = ("population", "fidelity_real")


@dataclass
class ScanGrid2D:
    """Metric values on a ``(delta, Omega)`` grid; ``values[i, j]`` is at
    ``(delta_values[i], omega_values[j])``."""

    delta_values: np.ndarray
    omega_values: np.ndarray
    values: np.ndarray
    metric: str


@dataclass
class SweepResult:
    axis: np.ndarray
    axis_name: str
    optimized: np.ndarray
    rectangular: np.ndarray
    errors: dict[int, str] = field(default_factory=dict)
    schedules: list[SliceSchedule | None] = field(default_factory=list)


def scan_2d(schedule: SliceSchedule, delta_range, omega_range, n_delta: int = 81,
            n_omega: int = 81, metric: str = "population",
            ramp_substeps: int = DEFAULT_RAMP_SUBSTEPS, threads: int | None = 1) -> ScanGrid2D:
    """Evaluate ``schedule`` for single atoms on a uniform ``(delta, Omega)`` grid."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    if n_delta < 2 or n_omega < 2:
        raise ValueError("scan grids need at least 2 points per axis")
    deltas = np.linspace(delta_range[0], delta_range[1], n_delta)
    omegas = np.linspace(omega_range[0], omega_range[1], n_omega)
    dd, oo = np.meshgrid(deltas, omegas, indexing="ij")
    amps = transfer_amplitudes(schedule, SampleSet.from_points(dd, oo), ramp_substeps, threads)
    values = np.abs(amps) ** 2 if metric == "population" else amps.real
    return ScanGrid2D(deltas, omegas, values.reshape(n_delta, n_omega), metric)


def default_scan_window(omega0: float):
    """Evaluation window ``delta in [-1, 1] Omega0``, ``Omega in [0.1, 1.9] Omega0``."""
    return (-omega0, omega0), (0.1 * omega0, 1.9 * omega0)


def sweep_temperature(optimized: SliceSchedule, t_values, spec: EnsembleSpec | None = None,
                      n_r: int = 21, n_v: int = 21, rectangular: SliceSchedule | None = None,
                      ramp_substeps: int = DEFAULT_RAMP_SUBSTEPS,
                      threads: int | None = 1) -> SweepResult:
    """Ensemble fidelity versus longitudinal temperature (kelvin)."""
    spec = spec or EnsembleSpec()
    rect = rectangular or rectangular_pi(spec.omega0)
    t_values = np.asarray(t_values, dtype=float)
    if np.any(t_values <= 0):
        raise ValueError("temperatures must be positive")
    opt = np.empty(t_values.size)
    base = np.empty(t_values.size)
    for i, temp in enumerate(t_values):
        samples = build_physical_samples(spec.with_temperature(temp), n_r, n_v)
        opt[i] = ensemble_fidelity(optimized, samples, ramp_substeps, threads)
        base[i] = ensemble_fidelity(rect, samples, ramp_substeps, threads)
    return SweepResult(t_values, "temperature_K", opt, base)


def sweep_response(base_cfg: OptimizationConfig, tau_values, mode: str = "reoptimize",
                   schedule: SliceSchedule | None = None, spec: EnsembleSpec | None = None,
                   n_r: int = 21, n_v: int = 21, threads: int | None = 1) -> SweepResult:
    """Final ensemble fidelity versus phase-modulator response time (seconds).

    ``mode="reoptimize"`` designs a new pulse with each response time in the
    loop; ``mode="fixed"`` re-evaluates ``schedule`` (designed elsewhere) with
    each response time applied.  The single-slice baseline has no phase jumps
    and therefore no ramp.
    """
    if mode not in ("reoptimize", "fixed"):
        raise ValueError(f"unknown response sweep mode {mode!r}")
    if mode == "fixed" and schedule is None:
        raise ValueError("fixed mode needs a schedule")
    spec = spec or EnsembleSpec()
    samples = build_physical_samples(spec, n_r, n_v)
    rect_value = ensemble_fidelity(rectangular_pi(spec.omega0), samples)
    taus = np.asarray(tau_values, dtype=float)
    opt = np.full(taus.size, np.nan)
    result = SweepResult(taus, "tau_resp_s", opt, np.full(taus.size, rect_value))
    for i, tau in enumerate(taus):
        try:
            if tau < 0:
                raise InvalidScheduleError(f"negative response time {tau}")
            if mode == "fixed":
                sched = schedule.with_tau(tau)
            else:
                cfg = replace(base_cfg, tau_resp=float(tau))
                sched = multistart_optimize(cfg, ensemble=spec).schedule
            opt[i] = ensemble_fidelity(sched, samples, base_cfg.ramp_substeps, threads)
            result.schedules.append(sched)
        except (InvalidScheduleError, InfeasibleBoundsError) as exc:
            log.warning("tau=%g s skipped: %s", tau, exc)
            result.errors[i] = str(exc)
            result.schedules.append(None)
    return result


def sweep_slices(base_cfg: OptimizationConfig, n_values, slice_time: float | None = 10e-6,
                 spec: EnsembleSpec | None = None, n_r: int = 21, n_v: int = 21,
                 threads: int | None = 1) -> SweepResult:
    """Best optimized ensemble fidelity versus slice count.

    The total duration is ``N * slice_time``; pass ``slice_time=None`` to
    keep ``base_cfg.total_T`` for every ``N``.
    """
    spec = spec or EnsembleSpec()
    samples = build_physical_samples(spec, n_r, n_v)
    rect_value = ensemble_fidelity(rectangular_pi(spec.omega0), samples)
    ns = np.asarray(n_values, dtype=int)
    opt = np.full(ns.size, np.nan)
    result = SweepResult(ns, "n_slices", opt, np.full(ns.size, rect_value))
    for i, n in enumerate(ns):
        try:
            total = base_cfg.total_T if slice_time is None else n * slice_time
            cfg = replace(base_cfg, n_slices=int(n), total_T=total)
            sched = multistart_optimize(cfg, ensemble=spec).schedule
            opt[i] = ensemble_fidelity(sched, samples, cfg.ramp_substeps, threads)
            result.schedules.append(sched)
        except (InvalidScheduleError, InfeasibleBoundsError, ValueError) as exc:
            log.warning("N=%d skipped: %s", n, exc)
            result.errors[i] = str(exc)
            result.schedules.append(None)
    return result


def crossover(result: SweepResult) -> float | None:
    """First axis value where the optimized pulse stops beating the baseline.

    Linear interpolation between the bracketing sweep points; ``None`` if the
    optimized pulse stays ahead over the whole sweep.
    """
    gap = result.optimized - result.rectangular
    for i in range(1, gap.size):
        if gap[i - 1] > 0 and gap[i] <= 0:
            x0, x1 = result.axis[i - 1], result.axis[i]
            return float(x0 + (x1 - x0) * gap[i - 1] / (gap[i - 1] - gap[i]))
    return None

"""GRAPE optimization of slice phases and durations.

The free parameters are the slice phases (unbounded, wrapped on decode) and
raw slice durations kept in the box ``[dt_min, dt_max]``.  Decoding projects
the raw durations onto ``{dt_min <= dt_i <= dt_max, sum(dt) = T}`` so every
iterate is a feasible pulse.  With ``symmetric=True`` only the first
``ceil(N/2)`` slices are free and the rest are mirrored.

Durations live in microseconds inside the parameter vector so that phase and
duration directions have comparable scale for the quasi-Newton update.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .dynamics import ensemble_fidelity, segment_gradient
from .ensemble import (OMEGA0_DEFAULT, EnsembleSpec, SampleSet, build_physical_samples,
                       build_window_samples)
from .pulse import (DEFAULT_RAMP_SUBSTEPS, TWO_PI, SliceSchedule, mirror, segment_table)

log = logging.getLogger(__name__)

US = 1e-6


class InfeasibleBoundsError(ValueError):
    """No duration vector satisfies the box and total-duration constraints."""


def project_durations(raw, dt_min: float, dt_max: float, total_T: float) -> np.ndarray:
    """Euclidean projection onto ``[dt_min, dt_max]^N`` intersected with ``sum = total_T``.

    The projection is ``clip(raw - mu, dt_min, dt_max)`` for the scalar
    ``mu`` that restores the sum.  ``mu`` is located exactly among the sorted
    clipping breakpoints and then recomputed from the free entries so the sum
    is met to rounding.
    """
    raw = np.asarray(raw, dtype=float)
    n = raw.size
    if dt_min > dt_max:
        raise InfeasibleBoundsError(f"dt_min={dt_min} exceeds dt_max={dt_max}")
    scale = max(abs(total_T), 1e-300)
    if n * dt_min > total_T * (1 + 1e-12) or n * dt_max < total_T * (1 - 1e-12):
        raise InfeasibleBoundsError(
            f"{n} slices in [{dt_min:g}, {dt_max:g}] s cannot sum to {total_T:g} s")
    if dt_min == dt_max:
        return np.full(n, dt_min)

    def total(mu):
        return np.clip(raw - mu, dt_min, dt_max).sum()

    # sum(mu) is continuous, piecewise linear and non-increasing
    knots = np.unique(np.concatenate([raw - dt_min, raw - dt_max]))
    sums = np.array([total(k) for k in knots])
    # first knot whose sum drops to or below the target
    j = int(np.searchsorted(-sums, -total_T, side="left"))
    j = min(max(j, 1), knots.size - 1)
    lo_mu, hi_mu = knots[j - 1], knots[j]
    mid = 0.5 * (lo_mu + hi_mu)
    shifted = raw - mid
    at_lo = shifted <= dt_min
    at_hi = shifted >= dt_max
    free = ~(at_lo | at_hi)
    out = np.where(at_lo, dt_min, dt_max).astype(float)
    if free.any():
        fixed = dt_min * at_lo.sum() + dt_max * at_hi.sum()
        mu = (raw[free].sum() - (total_T - fixed)) / free.sum()
        out[free] = np.clip(raw[free] - mu, dt_min, dt_max)
    if abs(out.sum() - total_T) > 1e-12 * scale and free.any():
        # absorb the rounding residual in the free entry with most room
        k = np.flatnonzero(free)[0]
        out[k] += total_T - math.fsum(out)
    return out


def projection_jacobian_vjp(raw, projected, dt_min, dt_max, grad) -> np.ndarray:
    """Pull ``grad`` (w.r.t. projected durations) back to the raw durations."""
    grad = np.asarray(grad, dtype=float)
    free = (projected > dt_min) & (projected < dt_max)
    out = np.zeros_like(grad)
    if free.any():
        out[free] = grad[free] - grad[free].mean()
    return out


@dataclass(frozen=True)
class TrainingSpec:
    """Training ensemble used by the optimizer.

    ``mode="window"`` is an equal-weight grid over a rectangle given in units
    of ``omega0``; ``mode="physical"`` uses the cloud quadrature instead.
    """

    mode: str = "window"
    delta_range: tuple[float, float] = (-1.0, 1.0)
    omega_range: tuple[float, float] = (0.5, 1.5)
    n_delta: int = 11
    n_omega: int = 11
    n_r: int = 21
    n_v: int = 21

    def build(self, ensemble: EnsembleSpec) -> SampleSet:
        if self.mode == "window":
            o = ensemble.omega0
            return build_window_samples(
                (self.delta_range[0] * o, self.delta_range[1] * o),
                (self.omega_range[0] * o, self.omega_range[1] * o),
                self.n_delta, self.n_omega)
        if self.mode == "physical":
            return build_physical_samples(ensemble, self.n_r, self.n_v)
        raise ValueError(f"unknown training mode {self.mode!r}")


@dataclass(frozen=True)
class OptimizationConfig:
    n_slices: int = 20
    total_T: float = 200e-6
    dt_min: float = 5e-6
    dt_max: float = 15e-6
    tau_resp: float = 0.0
    symmetric: bool = True
    max_iterations: int = 2000
    gradient_tolerance: float = 1e-8
    n_restarts: int = 10
    seed: int = 0
    ramp_substeps: int = DEFAULT_RAMP_SUBSTEPS
    history_size: int = 10
    training: TrainingSpec = field(default_factory=TrainingSpec)
    threads: int = 1

    def __post_init__(self):
        if self.n_slices < 1:
            raise ValueError("n_slices must be >= 1")
        if self.gradient_tolerance <= 0 or self.max_iterations < 1:
            raise ValueError("gradient_tolerance must be > 0 and max_iterations >= 1")
        if self.n_restarts < 1 or self.ramp_substeps < 1:
            raise ValueError("n_restarts and ramp_substeps must be >= 1")
        if not 0 < self.dt_min <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_max")
        if self.tau_resp < 0:
            raise ValueError("tau_resp must be >= 0")

    @property
    def n_free(self) -> int:
        return (self.n_slices + 1) // 2 if self.symmetric else self.n_slices

    def check_feasible(self) -> None:
        n = self.n_slices
        if n * self.dt_min > self.total_T * (1 + 1e-12) or n * self.dt_max < self.total_T * (1 - 1e-12):
            raise InfeasibleBoundsError(
                f"N={n} slices in [{self.dt_min:g}, {self.dt_max:g}] s "
                f"cannot sum to T={self.total_T:g} s")
        if self.tau_resp > self.dt_min:
            raise InfeasibleBoundsError(
                f"tau_resp={self.tau_resp:g} s exceeds dt_min={self.dt_min:g} s")


def _full(values, cfg: OptimizationConfig) -> np.ndarray:
    return mirror(values, cfg.n_slices) if cfg.symmetric else np.asarray(values, dtype=float)


def _fold(full_grad, cfg: OptimizationConfig) -> np.ndarray:
    """Adjoint of :func:`_full`."""
    if not cfg.symmetric:
        return full_grad
    n = cfg.n_slices
    half = full_grad[: (n + 1) // 2].copy()
    half[: n // 2] += full_grad[n - 1: (n - 1) // 2: -1]
    return half


def encode(schedule: SliceSchedule, cfg: OptimizationConfig) -> np.ndarray:
    """Parameter vector ``[phases, durations in us]`` for a schedule."""
    k = cfg.n_free
    return np.concatenate([schedule.phases[:k], schedule.durations[:k] / US])


def decode(x, cfg: OptimizationConfig) -> SliceSchedule:
    """Feasible schedule for a parameter vector (wraps phases, projects durations)."""
    k = cfg.n_free
    x = np.asarray(x, dtype=float)
    if x.size != 2 * k:
        raise ValueError(f"expected {2 * k} parameters, got {x.size}")
    phases = np.mod(_full(x[:k], cfg), TWO_PI)
    raw = _full(x[k:], cfg) * US
    durations = project_durations(raw, cfg.dt_min, cfg.dt_max, cfg.total_T)
    if cfg.symmetric:
        # the projection of a mirrored vector is mirrored; remove rounding asymmetry
        durations = mirror(durations[: (cfg.n_slices + 1) // 2], cfg.n_slices)
    return SliceSchedule(durations, phases, cfg.tau_resp, cfg.symmetric)


def objective(x, samples: SampleSet, cfg: OptimizationConfig) -> float:
    """Ensemble fidelity of the decoded schedule."""
    return ensemble_fidelity(decode(x, cfg), samples, cfg.ramp_substeps, cfg.threads)


def objective_and_gradient(x, samples: SampleSet, cfg: OptimizationConfig):
    """Ensemble fidelity and its exact gradient with respect to ``x``."""
    k = cfg.n_free
    x = np.asarray(x, dtype=float)
    sched = decode(x, cfg)
    table = segment_table(sched, cfg.ramp_substeps)
    seg = segment_gradient(table.phases, table.durations, samples, cfg.threads)
    g_phase = table.phase_jac.T @ seg.d_phase
    g_dur = table.duration_jac.T @ seg.d_duration
    raw = _full(x[k:], cfg) * US
    g_raw = projection_jacobian_vjp(raw, sched.durations, cfg.dt_min, cfg.dt_max, g_dur)
    grad = np.concatenate([_fold(g_phase, cfg), _fold(g_raw, cfg) * US])
    return seg.fidelity, grad


def gradient(x, samples: SampleSet, cfg: OptimizationConfig) -> np.ndarray:
    return objective_and_gradient(x, samples, cfg)[1]


@dataclass
class OptimizationResult:
    schedule: SliceSchedule | None
    fidelity: float
    history: list[float]
    restart_index: int
    gradient_norm: float
    iterations: int
    converged: bool
    message: str
    x: np.ndarray | None = None
    restart_fidelities: list[float] = field(default_factory=list)
    wall_time: float = 0.0


def quasi_newton_minimize(fun: Callable, x0, bounds=None, max_iterations: int = 2000,
                          gradient_tolerance: float = 1e-8, history_size: int = 10,
                          max_relaunches: int = 5):
    """Bound-constrained limited-memory BFGS on ``fun(x) -> (f, grad)``.

    Returns ``(x_best, f_best, history, projected_gradient_norm, iterations,
    converged, message)``.  Line-search breakdown is reported through
    ``converged=False`` with the best iterate found so far.
    """
    x0 = np.asarray(x0, dtype=float)
    history: list[float] = []
    best = {"f": math.inf, "x": x0.copy()}

    def wrapped(x):
        f, g = fun(x)
        if f < best["f"]:
            best["f"] = f
            best["x"] = np.array(x, copy=True)
        return f, g

    def record(intermediate_result):
        history.append(float(intermediate_result.fun))

    f0, _ = wrapped(x0)
    history.append(float(f0))
    x = x0
    nit = 0
    res = None
    # relaunch with fresh curvature memory after a stalled line search; stop
    # once a relaunch no longer improves the objective
    for _ in range(max_relaunches + 1):
        f_start = best["f"]
        res = minimize(wrapped, x, jac=True, method="L-BFGS-B", bounds=bounds,
                       callback=record,
                       options={"maxiter": max_iterations - nit, "maxcor": history_size,
                                "gtol": gradient_tolerance, "ftol": 0.0, "maxls": 40,
                                "maxfun": 20 * max_iterations})
        nit += int(res.nit)
        x = best["x"]
        if _projected_gradient_norm(res.x, res.jac, bounds) < gradient_tolerance:
            break
        if nit >= max_iterations or not best["f"] < f_start - 1e-15 * max(1.0, abs(f_start)):
            break
    x_best = best["x"]
    f_best, g_best = fun(x_best)
    pg = _projected_gradient_norm(x_best, g_best, bounds)
    converged = pg < gradient_tolerance
    return x_best, float(f_best), history, pg, nit, converged, str(res.message)


def _projected_gradient_norm(x, g, bounds) -> float:
    if bounds is None:
        return float(np.max(np.abs(g))) if g.size else 0.0
    lo = np.array([-np.inf if b[0] is None else b[0] for b in bounds])
    hi = np.array([np.inf if b[1] is None else b[1] for b in bounds])
    return float(np.max(np.abs(np.clip(x - g, lo, hi) - x))) if g.size else 0.0


def optimize_from(x0, samples: SampleSet, cfg: OptimizationConfig) -> OptimizationResult:
    """Single GRAPE run from ``x0`` maximizing the training-set fidelity."""
    k = cfg.n_free
    bounds = [(None, None)] * k + [(cfg.dt_min / US, cfg.dt_max / US)] * k

    def fun(x):
        f, g = objective_and_gradient(x, samples, cfg)
        return -f, -g

    x, f, hist, pg, nit, conv, msg = quasi_newton_minimize(
        fun, x0, bounds, cfg.max_iterations, cfg.gradient_tolerance, cfg.history_size)
    # canonical parameters: wrapped phases, projected durations
    sched = decode(x, cfg)
    fidelity = ensemble_fidelity(sched, samples, cfg.ramp_substeps, cfg.threads)
    return OptimizationResult(sched, fidelity, [-h for h in hist], 0, pg, nit, conv, msg,
                              encode(sched, cfg))


def initial_guesses(cfg: OptimizationConfig) -> list[np.ndarray]:
    """Seeded starting points: random phases, uniform durations ``T/N``."""
    rng = np.random.default_rng(cfg.seed)
    k = cfg.n_free
    dur = np.full(k, cfg.total_T / cfg.n_slices / US)
    return [np.concatenate([rng.uniform(0.0, TWO_PI, k), dur]) for _ in range(cfg.n_restarts)]


def multistart_optimize(cfg: OptimizationConfig, samples: SampleSet | None = None,
                        ensemble: EnsembleSpec | None = None) -> OptimizationResult:
    """Best of ``cfg.n_restarts`` independent GRAPE runs.

    Restart ``i`` uses the ``i``-th draw of the seeded generator, so a run
    with more restarts always contains the runs of a shorter one.
    """
    cfg.check_feasible()
    if samples is None:
        samples = cfg.training.build(ensemble or EnsembleSpec())
    start = time.perf_counter()
    best: OptimizationResult | None = None
    fids = []
    for i, x0 in enumerate(initial_guesses(cfg)):
        res = optimize_from(x0, samples, cfg)
        fids.append(res.fidelity)
        log.info("restart %d: F=%.6f after %d iterations (%s)", i, res.fidelity,
                 res.iterations, res.message)
        if best is None or res.fidelity > best.fidelity:
            best = replace(res, restart_index=i)
    best.restart_fidelities = fids
    best.wall_time = time.perf_counter() - start
    return best

"""Fast built-in oracle checks, run by ``slicephase selftest``.

Each check compares the library against an independent closed form or a
finite-difference estimate and returns the worst deviation seen.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np
from scipy.linalg import expm

from .dynamics import excited_population, propagate
from .ensemble import EnsembleSpec, build_physical_samples, build_window_samples
from .grape import (OptimizationConfig, TrainingSpec, encode, objective,
                    objective_and_gradient, project_durations)
from .pulse import Segment, SliceSchedule
from .su2 import SIGMA_X, SIGMA_Y, SIGMA_Z, GeneratorCoeffs, expm_constant, unitarity_error


class CheckResult(NamedTuple):
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tolerance)


def _rabi_oracle(rng) -> float:
    worst = 0.0
    omega0 = 2 * np.pi * 25e3
    for _ in range(200):
        delta = rng.uniform(-2, 2) * omega0
        omega = rng.uniform(0.05, 2) * omega0
        phase = rng.uniform(0, 2 * np.pi)
        t = rng.uniform(0, 100e-6)
        w = np.hypot(omega, delta)
        exact = (omega / w) ** 2 * np.sin(w * t / 2) ** 2
        u = propagate([Segment(phase, t)], delta, omega)
        worst = max(worst, abs(excited_population(u) - exact))
    return worst


def _dense_expm(rng) -> float:
    worst = 0.0
    for _ in range(50):
        c = rng.normal(size=3) * 1e5
        dt = rng.uniform(0, 50e-6)
        h = 0.5 * (c[0] * SIGMA_X + c[1] * SIGMA_Y + c[2] * SIGMA_Z)
        ref = expm(-1j * h * dt)
        worst = max(worst, np.abs(expm_constant(GeneratorCoeffs(*c), dt) - ref).max())
    return worst


def _unitarity(rng) -> float:
    omega0 = 2 * np.pi * 25e3
    segs = [Segment(p, d) for p, d in zip(rng.uniform(0, 2 * np.pi, 200),
                                          rng.uniform(1e-6, 20e-6, 200))]
    u = propagate(segs, 0.3 * omega0, 1.1 * omega0)
    return unitarity_error(u)


def _weights(rng) -> float:
    samples = build_physical_samples(EnsembleSpec(), 21, 21)
    return abs(float(np.sum(samples.weight)) - 1.0)


def _gradient(rng) -> float:
    cfg = OptimizationConfig(n_slices=6, total_T=60e-6, tau_resp=0.5e-6, symmetric=False,
                             training=TrainingSpec(n_delta=3, n_omega=3))
    omega0 = EnsembleSpec().omega0
    samples = build_window_samples((-omega0, omega0), (0.5 * omega0, 1.5 * omega0), 3, 3)
    raw = np.full(6, 10e-6) + rng.uniform(-2e-6, 2e-6, 6)
    sched = SliceSchedule(project_durations(raw, cfg.dt_min, cfg.dt_max, cfg.total_T),
                          rng.uniform(0, 2 * np.pi, 6))
    x = encode(sched, cfg)
    _, g = objective_and_gradient(x, samples, cfg)
    worst = 0.0
    h = 1e-6
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        fd = (objective(x + e, samples, cfg) - objective(x - e, samples, cfg)) / (2 * h)
        worst = max(worst, abs(fd - g[i]) / max(abs(fd), 1e-3))
    return worst


CHECKS: list[tuple[str, Callable, float]] = [
    ("rabi formula vs single segment", _rabi_oracle, 1e-12),
    ("closed-form propagator vs dense expm", _dense_expm, 1e-12),
    ("unitarity after 200 segments", _unitarity, 1e-9),
    ("ensemble weights normalized", _weights, 1e-10),
    ("GRAPE gradient vs central differences", _gradient, 1e-6),
]


def run_selftest(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [CheckResult(name, float(fn(rng)), tol) for name, fn, tol in CHECKS]

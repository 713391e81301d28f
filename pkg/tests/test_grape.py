import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slicephase.dynamics import ensemble_fidelity
from slicephase.ensemble import EnsembleSpec, SampleSet, build_window_samples
from slicephase.grape import (InfeasibleBoundsError, OptimizationConfig, TrainingSpec, decode,
                              encode, gradient, initial_guesses, multistart_optimize,
                              objective, objective_and_gradient, project_durations,
                              quasi_newton_minimize)
from slicephase.pulse import SliceSchedule, expand_symmetric

US = 1e-6


def _window(omega0, n=5):
    return build_window_samples((-omega0, omega0), (0.5 * omega0, 1.5 * omega0), n, n)


def fd_gradient(x, samples, cfg, phase_step=1e-7, duration_step_s=1e-11):
    k = cfg.n_free
    out = np.zeros_like(x)
    for i in range(x.size):
        h = phase_step if i < k else duration_step_s / US
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (objective(x + e, samples, cfg) - objective(x - e, samples, cfg)) / (2 * h)
    return out


def assert_gradient_close(g, fd):
    # the central-difference oracle carries ~1e-9 rounding noise
    big = np.abs(fd) >= 1e-3
    assert np.all(np.abs(g - fd)[big] <= 1e-6 * np.abs(fd)[big])
    assert np.all(np.abs(g - fd)[~big] <= 1e-9)


# --- duration projection ---------------------------------------------------

def test_projection_keeps_feasible_point():
    raw = np.full(20, 10 * US)
    np.testing.assert_array_equal(project_durations(raw, 5 * US, 15 * US, 200 * US), raw)


def test_projection_hand_example():
    out = project_durations(np.array([3, 17]) * US, 5 * US, 15 * US, 20 * US)
    np.testing.assert_allclose(out, np.array([5, 15]) * US, rtol=1e-12)


def test_projection_infeasible():
    with pytest.raises(InfeasibleBoundsError):
        project_durations(np.full(20, 10 * US), 5 * US, 15 * US, 90 * US)
    with pytest.raises(InfeasibleBoundsError):
        project_durations(np.full(20, 10 * US), 5 * US, 15 * US, 310 * US)


def _brute_projection(raw, lo, hi, total):
    """Bisection on the shift; independent of the breakpoint search."""
    a, b = raw.min() - hi - 1.0, raw.max() - lo + 1.0
    for _ in range(200):
        mid = 0.5 * (a + b)
        if np.clip(raw - mid, lo, hi).sum() > total:
            a = mid
        else:
            b = mid
    return np.clip(raw - 0.5 * (a + b), lo, hi)


def test_projection_random_raws(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 41))
        lo, hi = 5.0, 15.0
        total = rng.uniform(n * lo, n * hi)
        raw = rng.uniform(-10, 40, n)
        out = project_durations(raw, lo, hi, total)
        assert math.fsum(out) == pytest.approx(total, rel=1e-12)
        assert np.all(out >= lo) and np.all(out <= hi)
        np.testing.assert_allclose(out, _brute_projection(raw, lo, hi, total), atol=1e-9)
        np.testing.assert_allclose(project_durations(out, lo, hi, total), out, rtol=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=30), st.floats(0, 1))
def test_projection_is_nearest_feasible_point(raw, frac):
    raw = np.array(raw)
    n = raw.size
    total = n * (5 + 10 * frac)
    out = project_durations(raw, 5.0, 15.0, total)
    # any feasible competitor is at least as far away
    rng = np.random.default_rng(n)
    for _ in range(5):
        cand = project_durations(out + rng.normal(0, 1, n), 5.0, 15.0, total)
        assert np.linalg.norm(cand - raw) >= np.linalg.norm(out - raw) - 1e-9


# --- encoding and objective ------------------------------------------------

def test_encode_decode_roundtrip(rng):
    for sym in (True, False):
        cfg = OptimizationConfig(n_slices=7, total_T=70 * US, symmetric=sym)
        k = cfg.n_free
        half_d = rng.uniform(8, 12, k)
        x = np.concatenate([rng.uniform(0, 2 * np.pi, k), half_d])
        sched = decode(x, cfg)
        again = decode(encode(sched, cfg), cfg)
        np.testing.assert_allclose(again.durations, sched.durations, rtol=1e-12)
        np.testing.assert_allclose(again.phases, sched.phases, atol=1e-12)
        assert math.fsum(sched.durations) == pytest.approx(70 * US, rel=1e-12)
        if sym:
            np.testing.assert_array_equal(sched.durations, sched.durations[::-1])
            np.testing.assert_array_equal(sched.phases, sched.phases[::-1])


def test_objective_matches_direct_evaluation(omega0):
    cfg = OptimizationConfig(n_slices=1, total_T=np.pi / omega0, dt_min=1 * US,
                             dt_max=30 * US, symmetric=False)
    samples = _window(omega0)
    x = np.array([-np.pi / 2, np.pi / omega0 / US])
    rect = SliceSchedule([np.pi / omega0], [-np.pi / 2])
    assert objective(x, samples, cfg) == ensemble_fidelity(rect, samples)


def test_objective_two_pi_periodic(omega0, rng):
    cfg = OptimizationConfig(n_slices=6, total_T=60 * US, tau_resp=1 * US, symmetric=False)
    samples = _window(omega0)
    x = np.concatenate([rng.uniform(0, 2 * np.pi, 6), np.full(6, 10.0)])
    shifted = x.copy()
    shifted[2] += 2 * np.pi
    assert objective(shifted, samples, cfg) == pytest.approx(objective(x, samples, cfg),
                                                             abs=1e-14)


def test_symmetric_encoding_equals_mirrored_full(omega0, rng):
    n = 9
    sym = OptimizationConfig(n_slices=n, total_T=90 * US, symmetric=True)
    full = OptimizationConfig(n_slices=n, total_T=90 * US, symmetric=False)
    samples = _window(omega0)
    half_p = rng.uniform(0, 2 * np.pi, 5)
    half_d = np.array([9.0, 10.5, 9.5, 11.0, 10.0])
    x_sym = np.concatenate([half_p, half_d])
    sched = expand_symmetric(half_d * US, half_p, n)
    x_full = encode(sched, full)
    assert objective(x_sym, samples, sym) == pytest.approx(objective(x_full, samples, full),
                                                           abs=1e-14)


def test_phase_gradient_vanishes_without_coupling(rng):
    cfg = OptimizationConfig(n_slices=8, total_T=80 * US, tau_resp=0.5 * US, symmetric=False)
    samples = build_window_samples((-1e5, 1e5), (0.0, 0.0), 7, 1)
    x = np.concatenate([rng.uniform(0, 2 * np.pi, 8), rng.uniform(5, 15, 8)])
    g = gradient(x, samples, cfg)
    np.testing.assert_array_equal(g[:8], 0.0)


@pytest.mark.parametrize("tau", [0.0, 0.5 * US, 1.0 * US])
@pytest.mark.parametrize("symmetric", [True, False])
def test_gradient_matches_finite_differences(tau, symmetric, omega0, rng):
    cfg = OptimizationConfig(n_slices=20, tau_resp=tau, symmetric=symmetric)
    samples = _window(omega0, 7)
    k = cfg.n_free
    x = np.concatenate([rng.uniform(0, 2 * np.pi, k), rng.uniform(5, 15, k)])
    f, g = objective_and_gradient(x, samples, cfg)
    assert f == pytest.approx(objective(x, samples, cfg), abs=1e-14)
    assert_gradient_close(g, fd_gradient(x, samples, cfg))


# --- optimizer -------------------------------------------------------------

def test_minimizer_quadratic():
    calls = []

    def fun(x):
        calls.append(1)
        return (x[0] - 1.7) ** 2 * 3.0, np.array([6.0 * (x[0] - 1.7)])

    x, f, hist, pg, nit, conv, _ = quasi_newton_minimize(fun, [10.0], [(None, None)])
    assert x[0] == pytest.approx(1.7, abs=1e-10)
    assert nit <= 20 and conv


def test_minimizer_rosenbrock_in_box():
    def fun(x):
        a, b = x
        f = (1 - a) ** 2 + 100 * (b - a * a) ** 2
        g = np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])
        return f, g

    x, f, hist, *_ = quasi_newton_minimize(fun, [-1.2, 1.0], [(-2, 2), (-2, 2)],
                                           gradient_tolerance=1e-10)
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-6)
    # box-active optimum
    x, *_ = quasi_newton_minimize(fun, [-1.2, 0.5], [(-2, 0.5), (-2, 2)])
    assert x[0] == pytest.approx(0.5, abs=1e-9)
    assert x[1] == pytest.approx(0.25, abs=1e-6)
    assert np.all(np.diff(hist) <= 1e-15)


SMALL = OptimizationConfig(n_slices=6, total_T=60 * US, n_restarts=3, max_iterations=150,
                           training=TrainingSpec(n_delta=5, n_omega=5))


def test_multistart_deterministic():
    a = multistart_optimize(SMALL)
    b = multistart_optimize(SMALL)
    assert a.schedule.durations.tobytes() == b.schedule.durations.tobytes()
    assert a.schedule.phases.tobytes() == b.schedule.phases.tobytes()
    assert a.fidelity == b.fidelity and a.history == b.history


def test_multistart_properties(omega0):
    cfg = SMALL
    res = multistart_optimize(cfg)
    samples = cfg.training.build(EnsembleSpec())
    assert res.fidelity == ensemble_fidelity(res.schedule, samples)
    assert res.fidelity == max(res.restart_fidelities)
    assert np.all(np.isfinite(res.history))
    assert np.all(np.diff(res.history) >= -1e-15)
    assert res.schedule.symmetric
    np.testing.assert_array_equal(res.schedule.phases, res.schedule.phases[::-1])
    res.schedule.check_bounds(cfg.dt_min, cfg.dt_max)
    assert math.fsum(res.schedule.durations) == pytest.approx(cfg.total_T, rel=1e-12)
    one = multistart_optimize(OptimizationConfig(**{**cfg.__dict__, "n_restarts": 1}))
    assert res.fidelity >= one.fidelity
    assert one.fidelity == res.restart_fidelities[0]


def test_initial_guesses_prefix():
    a = initial_guesses(SMALL)
    b = initial_guesses(OptimizationConfig(**{**SMALL.__dict__, "n_restarts": 5}))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    assert np.all(a[0][SMALL.n_free:] == 10.0)


def test_single_slice_reaches_constant_phase_optimum(omega0):
    cfg = OptimizationConfig(n_slices=1, total_T=20 * US, dt_min=5 * US, dt_max=30 * US,
                             symmetric=False, n_restarts=2)
    samples = SampleSet.single(0.0, omega0)
    res = multistart_optimize(cfg, samples)
    assert res.fidelity == pytest.approx(1.0, abs=1e-9)
    assert res.schedule.phases[0] == pytest.approx(1.5 * np.pi, abs=1e-5)


def test_infeasible_config():
    with pytest.raises(InfeasibleBoundsError):
        multistart_optimize(OptimizationConfig(n_slices=20, total_T=50 * US))
    with pytest.raises(InfeasibleBoundsError):
        OptimizationConfig(tau_resp=6 * US).check_feasible()

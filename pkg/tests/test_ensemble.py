import math

import numpy as np
import pytest
from scipy.integrate import quad

from slicephase.ensemble import (EnsembleSpec, SampleSet, build_monte_carlo_samples,
                                 build_physical_samples, build_window_samples,
                                 doppler_detuning, rabi_at_radius, radial_density,
                                 recoil_shift, sigma_v_from_temperature, velocity_density)
from slicephase.dynamics import ensemble_fidelity
from slicephase.pulse import rectangular_pi

SPEC = EnsembleSpec()


def test_radial_density_values():
    assert radial_density(SPEC, 0.0) == 0.0
    s = SPEC.sigma_r
    assert radial_density(SPEC, s) == pytest.approx(math.exp(-0.5) / s, rel=1e-14)
    grid = np.linspace(0, 3 * s, 3001)
    assert np.argmax(radial_density(SPEC, grid)) == 1000
    with pytest.raises(ValueError):
        radial_density(SPEC, -1e-3)


def test_radial_density_normalized():
    val, _ = quad(lambda r: radial_density(SPEC, r), 0, 8 * SPEC.sigma_r, epsabs=1e-13)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_velocity_density(rng):
    s = SPEC.sigma_v
    assert velocity_density(SPEC, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi * s * s))
    v = rng.normal(0, 3 * s, 100)
    np.testing.assert_array_equal(velocity_density(SPEC, v), velocity_density(SPEC, -v))


def test_sigma_v_from_table_temperature():
    assert sigma_v_from_temperature(300e-9) == pytest.approx(5.4e-3, rel=0.01)
    assert SPEC.temperature == pytest.approx(300e-9, rel=1e-12)


def test_rabi_at_radius(omega0):
    assert rabi_at_radius(SPEC, 0.0) == omega0
    assert rabi_at_radius(SPEC, SPEC.waist / math.sqrt(2)) == pytest.approx(omega0 / math.e)
    assert rabi_at_radius(SPEC, 3e-3) / omega0 == pytest.approx(math.exp(-18 / 121), rel=1e-14)
    assert rabi_at_radius(SPEC, 3e-3) / omega0 == pytest.approx(0.8617, abs=1e-4)
    r = np.linspace(0, 0.03, 100)
    assert np.all(np.diff(rabi_at_radius(SPEC, r)) < 0)


def test_doppler_detuning(omega0):
    assert doppler_detuning(SPEC, 0.0) == 0.0
    assert SPEC.k_eff == pytest.approx(1.6105e7, rel=1e-4)
    d = doppler_detuning(SPEC, 5.4e-3)
    assert d == pytest.approx(8.70e4, rel=2e-3)
    assert d / (2 * math.pi) == pytest.approx(13.8e3, rel=5e-3)
    assert d / omega0 == pytest.approx(0.55, abs=0.01)
    assert doppler_detuning(SPEC, -5.4e-3) == -d


def test_recoil_shift():
    assert recoil_shift(SPEC) == pytest.approx(9.48e4, rel=2e-3)
    assert recoil_shift(SPEC) / (2 * math.pi) == pytest.approx(15.1e3, rel=3e-3)
    doubled = EnsembleSpec(k_eff=2 * SPEC.k_eff)
    assert recoil_shift(doubled) == pytest.approx(4 * recoil_shift(SPEC), rel=1e-14)


def test_invalid_spec():
    with pytest.raises(ValueError):
        EnsembleSpec(sigma_r=0.0)
    with pytest.raises(ValueError):
        EnsembleSpec(omega0=-1.0)


def test_physical_samples_shape_and_weights(omega0):
    s = build_physical_samples(SPEC, 21, 21)
    assert len(s) == 441
    assert math.fsum(s.weight) == pytest.approx(1.0, abs=1e-10)
    assert np.all(s.weight >= 0)
    assert abs(math.fsum(s.weight * s.delta)) <= 1e-6 * omega0
    with pytest.raises(ValueError):
        build_physical_samples(SPEC, 1, 21)


def test_physical_samples_rabi_expectation(omega0):
    exact = 1.0 / (1.0 + 4 * SPEC.sigma_r**2 / SPEC.waist**2)
    assert exact == pytest.approx(0.7706, abs=2e-4)
    s = build_physical_samples(SPEC, 81, 21)
    mean = math.fsum(s.weight * s.omega) / omega0
    assert mean == pytest.approx(exact, abs=1e-3)


def test_physical_samples_factorize():
    s = build_physical_samples(SPEC, 5, 7)
    w = s.weight.reshape(5, 7)
    radial = w.sum(axis=1)
    velocity = w.sum(axis=0)
    np.testing.assert_allclose(w, np.outer(radial, velocity), rtol=1e-12, atol=1e-300)


def test_physical_samples_reproducible():
    a = build_physical_samples(SPEC, 13, 17)
    b = build_physical_samples(SPEC, 13, 17)
    for col in ("delta", "omega", "weight", "r", "v_z"):
        assert getattr(a, col).tobytes() == getattr(b, col).tobytes()


def test_quadrature_refinement_converges(omega0):
    rect = rectangular_pi(omega0)
    f21 = ensemble_fidelity(rect, build_physical_samples(SPEC, 21, 21))
    f41 = ensemble_fidelity(rect, build_physical_samples(SPEC, 41, 41))
    assert abs(f21 - f41) < 1e-3


def test_monte_carlo_agrees_with_quadrature(omega0):
    rect = rectangular_pi(omega0)
    quadrature = ensemble_fidelity(rect, build_physical_samples(SPEC, 41, 41))
    mc = ensemble_fidelity(rect, build_monte_carlo_samples(SPEC, 200_000, seed=3))
    assert mc == pytest.approx(quadrature, abs=5e-3)


def test_window_samples(omega0):
    one = build_window_samples((0.0, 0.0), (omega0, omega0), 1, 1)
    assert len(one) == 1 and one.weight[0] == 1.0
    s = build_window_samples((-omega0, omega0), (0.5 * omega0, 1.5 * omega0), 11, 11)
    assert len(s) == 121
    np.testing.assert_allclose(s.weight, 1 / 121)
    assert math.fsum(s.weight) == pytest.approx(1.0, abs=1e-12)
    corners = set(zip(np.round(s.delta / omega0, 12), np.round(s.omega / omega0, 12)))
    assert (-1.0, 0.5) in corners and (1.0, 1.5) in corners
    assert np.all(np.isnan(s.r))
    with pytest.raises(ValueError):
        build_window_samples((1.0, 1.0), (0.5, 1.5), 3, 3)
    with pytest.raises(ValueError):
        build_window_samples((1.0, -1.0), (0.5, 1.5), 3, 3)


def test_sample_iteration():
    s = SampleSet.single(0.0, 1.0)
    (p,) = list(s)
    assert p.weight == 1.0 and p.omega_R == 1.0 and p.delta_eff == 0.0

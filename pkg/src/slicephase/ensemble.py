"""Atomic-cloud inhomogeneity: radial position and longitudinal velocity.

Each atom sits at a fixed radius ``r`` in a Gaussian Raman beam and moves
with longitudinal velocity ``v_z``.  It therefore sees the coupling
``Omega_R(r) = Omega0 exp(-2 r^2 / w^2)`` and detuning
``delta_eff = delta_offset + k_eff v_z``.  Ensemble averages are taken with
deterministic tensor-product quadrature; a seeded Monte-Carlo sampler is
kept for cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterator, NamedTuple

import numpy as np
from scipy import constants

RB87_MASS = 1.443160648e-25  # kg
RB87_D2_WAVELENGTH = 780.241209686e-9  # m
K_EFF_RB87 = 4.0 * np.pi / RB87_D2_WAVELENGTH  # counter-propagating beams
OMEGA0_DEFAULT = 2.0 * np.pi * 25e3
TZ_DEFAULT = 300e-9


def sigma_v_from_temperature(temperature: float, mass: float = RB87_MASS) -> float:
    """Thermal velocity width ``sqrt(k_B T / M)`` in m/s."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    return math.sqrt(constants.k * temperature / mass)


@dataclass(frozen=True)
class EnsembleSpec:
    """Cloud and beam parameters; defaults describe the reference setup."""

    sigma_r: float = 3e-3
    sigma_v: float = sigma_v_from_temperature(TZ_DEFAULT)
    waist: float = 11e-3
    omega0: float = OMEGA0_DEFAULT
    k_eff: float = K_EFF_RB87
    delta_offset: float = 0.0
    mass: float = RB87_MASS

    def __post_init__(self):
        for name in ("sigma_r", "sigma_v", "waist", "omega0", "k_eff", "mass"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if not math.isfinite(self.delta_offset):
            raise ValueError("delta_offset must be finite")

    @property
    def temperature(self) -> float:
        """Longitudinal temperature equivalent to ``sigma_v``."""
        return self.mass * self.sigma_v**2 / constants.k

    def with_temperature(self, temperature: float) -> "EnsembleSpec":
        return replace(self, sigma_v=sigma_v_from_temperature(temperature, self.mass))


class SamplePoint(NamedTuple):
    r: float
    v_z: float
    weight: float
    delta_eff: float
    omega_R: float


@dataclass(frozen=True)
class SampleSet:
    """Weighted ensemble members, stored column-wise.

    ``r`` and ``v_z`` are NaN for window samples that have no physical
    backing.
    """

    delta: np.ndarray
    omega: np.ndarray
    weight: np.ndarray
    r: np.ndarray
    v_z: np.ndarray
    provenance: str

    def __post_init__(self):
        cols = [np.array(getattr(self, f), dtype=float).reshape(-1)
                for f in ("delta", "omega", "weight", "r", "v_z")]
        if len({c.size for c in cols}) != 1:
            raise ValueError("sample columns have different lengths")
        if np.any(cols[2] < 0):
            raise ValueError("negative sample weight")
        for name, col in zip(("delta", "omega", "weight", "r", "v_z"), cols):
            col.setflags(write=False)
            object.__setattr__(self, name, col)

    def __len__(self) -> int:
        return int(self.weight.size)

    def __iter__(self) -> Iterator[SamplePoint]:
        for row in zip(self.r, self.v_z, self.weight, self.delta, self.omega):
            yield SamplePoint(*map(float, row))

    @classmethod
    def single(cls, delta: float, omega: float) -> "SampleSet":
        """Delta-function ensemble at one ``(delta, Omega)`` point."""
        return cls(np.array([delta]), np.array([omega]), np.array([1.0]),
                   np.array([np.nan]), np.array([np.nan]), "uniform-window")

    @classmethod
    def from_points(cls, delta, omega, weight=None, provenance="uniform-window") -> "SampleSet":
        delta = np.asarray(delta, dtype=float).reshape(-1)
        omega = np.asarray(omega, dtype=float).reshape(-1)
        if weight is None:
            weight = np.full(delta.size, 1.0 / delta.size)
        nan = np.full(delta.size, np.nan)
        return cls(delta, omega, np.asarray(weight, dtype=float), nan, nan, provenance)


def radial_density(spec: EnsembleSpec, r):
    """Radial marginal ``(r / s^2) exp(-r^2 / 2 s^2)`` in 1/m."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    s2 = spec.sigma_r**2
    return r / s2 * np.exp(-r * r / (2.0 * s2))


def velocity_density(spec: EnsembleSpec, v_z):
    """Zero-mean Gaussian longitudinal velocity density in s/m."""
    v_z = np.asarray(v_z, dtype=float)
    s2 = spec.sigma_v**2
    return np.exp(-v_z * v_z / (2.0 * s2)) / np.sqrt(2.0 * np.pi * s2)


def rabi_at_radius(spec: EnsembleSpec, r):
    """Two-photon Rabi frequency ``Omega0 exp(-2 r^2 / w^2)`` in rad/s."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    return spec.omega0 * np.exp(-2.0 * r * r / spec.waist**2)


def doppler_detuning(spec: EnsembleSpec, v_z):
    """Doppler shift ``k_eff v_z`` in rad/s."""
    return spec.k_eff * np.asarray(v_z, dtype=float)


def recoil_shift(spec: EnsembleSpec) -> float:
    """Two-photon recoil shift ``hbar k_eff^2 / 2M`` in rad/s."""
    return constants.hbar * spec.k_eff**2 / (2.0 * spec.mass)


def effective_detuning(spec: EnsembleSpec, v_z):
    return spec.delta_offset + doppler_detuning(spec, v_z)


def _trapezoid_weights(n: int, step: float) -> np.ndarray:
    w = np.full(n, step)
    w[0] = w[-1] = 0.5 * step
    return w


def build_physical_samples(spec: EnsembleSpec, n_r: int = 21, n_v: int = 21,
                           width: float = 4.0) -> SampleSet:
    """Tensor-product quadrature of the cloud distribution.

    ``r`` spans ``[0, width * sigma_r]`` and ``v_z`` spans
    ``[-width * sigma_v, width * sigma_v]`` on uniform grids with trapezoid
    cell measures.  Weights are renormalized to sum to one.
    """
    if n_r < 2 or n_v < 2:
        raise ValueError("n_r and n_v must be >= 2")
    r = np.linspace(0.0, width * spec.sigma_r, n_r)
    v = np.linspace(-width * spec.sigma_v, width * spec.sigma_v, n_v)
    w_r = radial_density(spec, r) * _trapezoid_weights(n_r, r[1] - r[0])
    w_v = velocity_density(spec, v) * _trapezoid_weights(n_v, v[1] - v[0])
    w_r = w_r / w_r.sum()
    w_v = w_v / w_v.sum()
    rr, vv = np.meshgrid(r, v, indexing="ij")
    weight = np.outer(w_r, w_v).reshape(-1)
    weight = weight / math.fsum(weight)
    rr = rr.reshape(-1)
    vv = vv.reshape(-1)
    return SampleSet(effective_detuning(spec, vv), rabi_at_radius(spec, rr),
                     weight, rr, vv, "physical-distribution")


def build_window_samples(delta_range, omega_range, n_delta: int = 11,
                         n_omega: int = 11) -> SampleSet:
    """Equally weighted uniform grid over a ``(delta, Omega)`` rectangle."""
    grids = []
    for (lo, hi), n, name in ((delta_range, n_delta, "delta"),
                              (omega_range, n_omega, "omega")):
        if n < 1:
            raise ValueError(f"n_{name} must be >= 1")
        if hi < lo:
            raise ValueError(f"{name} range is not ordered: ({lo}, {hi})")
        if n > 1 and hi == lo:
            raise ValueError(f"degenerate {name} range with {n} points")
        grids.append(np.linspace(lo, hi, n) if n > 1 else np.array([lo]))
    dd, oo = np.meshgrid(grids[0], grids[1], indexing="ij")
    return SampleSet.from_points(dd, oo)


def default_training_window(omega0: float = OMEGA0_DEFAULT, n_delta: int = 11,
                            n_omega: int = 11) -> SampleSet:
    return build_window_samples((-omega0, omega0), (0.5 * omega0, 1.5 * omega0),
                                n_delta, n_omega)


def build_monte_carlo_samples(spec: EnsembleSpec, n: int, seed: int = 0) -> SampleSet:
    """Equal-weight random draws from the cloud distribution."""
    rng = np.random.default_rng(seed)
    r = rng.rayleigh(spec.sigma_r, n)
    v = rng.normal(0.0, spec.sigma_v, n)
    return SampleSet(effective_detuning(spec, v), rabi_at_radius(spec, r),
                     np.full(n, 1.0 / n), r, v, "physical-distribution")

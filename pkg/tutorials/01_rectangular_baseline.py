"""
The rectangular pi pulse and the thermal cloud
==============================================

A constant-phase pulse of area pi swaps |g> and |e> perfectly for an atom
at rest in the beam centre.  Real atoms see a weaker Rabi frequency away
from the beam axis and a Doppler shift from their longitudinal velocity, so
the cloud-averaged transfer is far from perfect.
"""

# %%
# One atom, closed form
# ---------------------
# For a single constant segment the excited population follows the Rabi
# formula ``(Omega/W)^2 sin^2(W t / 2)`` with ``W = sqrt(Omega^2 + delta^2)``.

import numpy as np

from slicephase import (EnsembleSpec, build_physical_samples, ensemble_fidelity,
                        ensemble_population, excited_population, propagate,
                        rectangular_pi, segmentize)

spec = EnsembleSpec()
omega0 = spec.omega0
pulse = rectangular_pi(omega0)
print(f"pi pulse length: {pulse.total_T * 1e6:.3f} us")

for delta in (0.0, 0.5, 1.0):
    u = propagate(segmentize(pulse), delta * omega0, omega0)
    w = np.hypot(1.0, delta)
    oracle = np.sin(w * np.pi / 2) ** 2 / w**2
    print(f"delta = {delta:.1f} Omega0: P_e = {excited_population(u):.6f} (Rabi {oracle:.6f})")

# %%
# The cloud
# ---------
# The default ensemble has a 3 mm radial width, an 11 mm beam waist and a
# 300 nK longitudinal temperature.  A 21 x 21 trapezoid grid in (r, v_z)
# carries the probability weights.

samples = build_physical_samples(spec, n_r=21, n_v=21)
print(f"{len(samples)} quadrature points, weights sum to {samples.weight.sum():.12f}")
print(f"rms detuning  {np.sqrt(samples.weight @ samples.delta**2) / omega0:.3f} Omega0")
print(f"mean coupling {samples.weight @ samples.omega / omega0:.3f} Omega0")

print(f"F_ave = {ensemble_fidelity(pulse, samples):.4f}")
print(f"P_e   = {ensemble_population(pulse, samples):.4f}")

# %%
# Hotter clouds
# -------------
# Doppler broadening grows with the square root of the temperature, and
# the rectangular pulse degrades quickly.

for temp_uK in (0.3, 1.0, 2.0, 5.0):
    hot = build_physical_samples(spec.with_temperature(temp_uK * 1e-6), 21, 21)
    print(f"T_z = {temp_uK:3.1f} uK: F_ave = {ensemble_fidelity(pulse, hot):.4f}")

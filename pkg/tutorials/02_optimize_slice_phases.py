"""
Designing a slice-phase pulse
=============================

The pulse keeps a constant Rabi amplitude and splits its 200 us into 20
slices.  GRAPE adjusts every slice phase and duration so that the average
transfer amplitude over a training window of detunings and couplings is as
close to 1 as possible.  Durations stay in [5, 15] us and sum to the total.
"""

# %%
# Training and evaluation ensembles
# ---------------------------------
# The optimizer sees a uniform 11 x 11 grid covering
# delta in [-Omega0, Omega0] and Omega in [0.5, 1.5] Omega0.  The result is
# judged on the physical cloud.

import numpy as np

from slicephase import (EnsembleSpec, OptimizationConfig, build_physical_samples,
                        ensemble_fidelity, multistart_optimize, rectangular_pi, scan_2d)

spec = EnsembleSpec()
omega0 = spec.omega0
cfg = OptimizationConfig(n_restarts=3, seed=0)
physical = build_physical_samples(spec, 21, 21)

# %%
# Run the optimizer
# -----------------
# Each restart begins from random phases and equal durations.  With a
# fixed seed the result is reproducible bit for bit.

result = multistart_optimize(cfg, ensemble=spec)
print(f"training F_ave  {result.fidelity:.4f} (restarts: "
      + ", ".join(f"{f:.4f}" for f in result.restart_fidelities) + ")")
pulse = result.schedule
print(f"physical F_ave  {ensemble_fidelity(pulse, physical):.4f}")
print(f"rectangular     {ensemble_fidelity(rectangular_pi(omega0), physical):.4f}")

print("\nslice  duration_us  phase_rad")
for i, (d, p) in enumerate(zip(pulse.durations, pulse.phases), start=1):
    print(f"{i:5d}  {d * 1e6:11.3f}  {p:9.4f}")

# %%
# Robustness map
# --------------
# A coarse (delta, Omega) map of the excited population, printed as text.
# Each character is one grid point: '#' above 0.96, '+' above 0.9, '.'
# above 0.5 and ' ' below.

grid = scan_2d(pulse, (-omega0, omega0), (0.1 * omega0, 1.9 * omega0), 41, 19)
for j in range(grid.values.shape[1] - 1, -1, -1):
    row = "".join("#" if v > 0.96 else "+" if v > 0.9 else "." if v > 0.5 else " "
                  for v in grid.values[:, j])
    print(f"Omega = {grid.omega_values[j] / omega0:4.2f} |{row}|")
print(" " * 14 + "delta from -Omega0 to +Omega0")

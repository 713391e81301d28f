"""
The same studies from the command line
======================================

Every study has a subcommand that reads a JSON config and writes JSON
pulse files or CSV tables.  This script drives the CLI in-process and shows
the files it produces.
"""

# %%
# A small config
# --------------
# Frequencies may be written as ``<name>_kHz_times_2pi``; files always store
# rad/s.  Times are in microseconds.

import json
import tempfile
from pathlib import Path

from slicephase.cli import main

work = Path(tempfile.mkdtemp())
config = {
    "seed": 1,
    "ensemble": {"omega0_kHz_times_2pi": 25.0, "temperature_uK": 0.3},
    "optimization": {"n_slices": 8, "total_T_us": 80.0, "n_restarts": 2,
                     "max_iterations": 300},
    "scan2d": {"n_delta": 21, "n_omega": 19},
    "sweeps": {"temperatures_uK": [0.3, 1.0, 3.0, 5.0]},
}
(work / "run.json").write_text(json.dumps(config, indent=2))

# %%
# Optimize, then study the result
# -------------------------------

out = work / "out"
main(["optimize", "--config", str(work / "run.json"), "--out", str(out)])
main(["baseline", "--config", str(work / "run.json"), "--out", str(out)])
main(["scan2d", "--config", str(work / "run.json"), "--pulse", str(out / "pulse.json"),
      "--out", str(out)])
main(["sweep-temp", "--config", str(work / "run.json"), "--pulse", str(out / "pulse.json"),
      "--out", str(out)])

for name in sorted(p.name for p in out.iterdir()):
    print(name)
print((out / "sweep_temperature.csv").read_text())

# %%
# Exit codes
# ----------
# Infeasible bounds are caught before anything is written.

bad = dict(config, optimization={"n_slices": 8, "total_T_us": 200.0})
(work / "bad.json").write_text(json.dumps(bad))
code = main(["optimize", "--config", str(work / "bad.json"), "--out", str(work / "bad")])
print(f"exit code {code}, output written: {(work / 'bad').exists()}")

"""
Finite-size simulation against the limit
========================================

Twenty replications at ``d = 100``, ``n = 300`` for a noiseless linear
target, compared with the fixed-point limit.
"""

from pathlib import Path

import numpy as np

from rfppv.experiments import SweepSpec, run_sweep
from rfppv.plotting import Series, line_plot
from rfppv.simulator import SimulationConfig

out = Path("gallery_out")
out.mkdir(exist_ok=True)

#%%
base = SimulationConfig(d=100, n=300, n_features=300, lam=1e-3)
spec = SweepSpec(base, "n_features", (50, 100, 200, 300, 400, 600, 1000), 20, 0)
records = run_sweep(spec, threads=4)

for r in records:
    flag = " (boundary)" if r.boundary else ""
    print(f"psi1={r.psi1:5.2f}  mean ppv={r.ppv[0]:.4f}  limit={r.ppv_limit:.4f}"
          f"  gap={r.relative_gap:+.3f}{flag}")

#%%
# Replications as points, the limit as a line.

x = np.array([r.psi1 for r in records])
pts_x = np.concatenate([[r.psi1] * len(r.samples) for r in records])
pts_y = np.concatenate([r.values("ppv") for r in records])
svg = line_plot([Series("replications", pts_x, pts_y, kind="scatter"),
                 Series("limit", x, np.array([r.ppv_limit for r in records]))],
                xlabel="psi1", ylabel="expected PPV", ylim=(0, 1))
(out / "simulation.svg").write_text(svg)

"""
Limiting PPV across the interpolation boundary
==============================================

The limiting expected posterior predictive variance stays bounded at
``psi1 = psi2`` even as the ridge vanishes, while the training error drops
to zero once the model has more features than samples.
"""

from pathlib import Path

import numpy as np

from rfppv import ModelParams, ShapeRatios, gaussian_coefficients, limits, relu
from rfppv.plotting import Series, line_plot

out = Path("gallery_out")
out.mkdir(exist_ok=True)
coeffs = gaussian_coefficients(relu)
params = ModelParams(f1_sq=1.0)
psi1 = np.geomspace(0.1, 10, 120)

#%%
# One curve per ridge value at ``psi2 = 3``.

series = []
for lam in (1e-8, 1e-3, 1e-1):
    s2 = [limits(params, ShapeRatios(p, 3), coeffs, lam).ppv for p in psi1]
    series.append(Series(f"lambda = {lam:g}", psi1, np.array(s2)))
(out / "limit_curves.svg").write_text(
    line_plot(series, xlabel="psi1", ylabel="S2 limit", logx=True))

#%%
# The training error and the resolvent term multiply back to the PPV.

lim = limits(params, ShapeRatios(6, 3), coeffs, 1e-3)
print(lim.train_error * (1 + lim.resolvent_trace), lim.ppv)

"""
Risk over PPV as the model widens
=================================

Ratio of the optimally tuned test risk to ``S^2 - tau^2``. At low noise
the credible interval is conservative far from the interpolation boundary.
At high noise the wide-limit ratio is one because the optimal ridge is
strictly positive.
"""

import numpy as np

from rfppv import ModelParams, gaussian_coefficients, relu, rho_star
from rfppv.experiments import RatioSettings, ratio_curve

coeffs = gaussian_coefficients(relu)
print("rho* =", rho_star(coeffs.zeta, 3.0))

#%%
# A small desk-scale run; raise ``d`` and ``replications`` for smoother curves.

settings = RatioSettings(d=60, replications=5, lambda_grid=tuple(np.geomspace(1e-4, 10, 21)))
for tau_sq in (0.2, 5.0):
    pts = ratio_curve(coeffs, ModelParams(f1_sq=1.0, tau_sq=tau_sq), "psi1",
                      [1, 3, 10, 1000], settings=settings, threads=4)
    print(f"tau^2 = {tau_sq}:", " ".join(f"{p.value:g}:{p.ratio:.3f}" for p in pts))

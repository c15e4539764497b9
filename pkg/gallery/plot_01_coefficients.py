"""
Gaussian coefficients of an activation
======================================

Every activation enters the limits only through ``mu0``, ``mu1``,
``mu_star^2`` and the ratio ``zeta = mu1 / mu_star``.
"""

import numpy as np

from rfppv import gaussian_coefficients, relu, shifted_relu, tanh

#%%
# ReLU has closed forms, which makes it a convenient check.

c = gaussian_coefficients(relu)
print(c)
print("closed form:", 1 / np.sqrt(2 * np.pi), 0.5, 0.25 - 1 / (2 * np.pi))

#%%
# Shifting the kink trades linear signal for nonlinear noise, so ``zeta``
# moves with the shift.

for shift in (-1.0, 0.0, 1.0):
    c = gaussian_coefficients(shifted_relu(shift))
    print(f"shift {shift:+.1f}: zeta = {c.zeta:.4f}")

#%%
# ``zeta`` ignores positive rescaling of the activation.

print(gaussian_coefficients(tanh).zeta, gaussian_coefficients(tanh.scaled(7.0)).zeta)

"""Asymptotic formulas for random-features ridge regression.

The core object is the pair ``(nu1, nu2)`` of upper-half-plane functions
solving::

    nu1 = psi1 / (-xi - nu2 - zeta^2 nu2 / (1 - zeta^2 nu1 nu2))
    nu2 = psi2 / (-xi - nu1 - zeta^2 nu1 / (1 - zeta^2 nu1 nu2))

evaluated at ``xi = i sqrt(psi1 psi2 lambda) / mu_star``, where
``chi = nu1 nu2``. Everything else (limiting PPV, training error, resolvent
quadratic form) is a closed form in ``(nu1, nu2, chi)``.

On the imaginary axis, ``xi = i t`` and ``nu_j = i b_j`` with ``b_j > 0``.
Writing ``x = b1 b2 = -chi`` and ``g(x) = x + zeta^2 x / (1 + zeta^2 x)`` the
system collapses to::

    t b_j = psi_j - g(x),        t^2 x = (psi1 - g(x)) (psi2 - g(x))

The left side of the scalar equation increases and the right side decreases
on ``0 <= x <= x_max`` (where ``g(x_max) = min(psi1, psi2)``), so the root is
unique and is bracketed. This is the production path; the damped complex
iteration with continuation is kept for general ``xi`` and as a cross-check.

The wide and large-sample risk formulas use::

    omega(zeta, psi, lb) = -(a + sqrt(a^2 + 4 psi zeta^2 (lb psi + 1)))
                           / (2 (lb psi + 1)),
    a = psi zeta^2 - zeta^2 - lb psi - 1

which equals ``lim_{psi1 -> inf} zeta^2 chi`` at ``lb = lambda / mu_star^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .activation import ActivationCoefficients
from .errors import (
    DegenerateDenominator,
    LeftUpperHalfPlane,
    NegativeRadicand,
    NoConvergence,
    PhaseViolation,
)

__all__ = [
    "ShapeRatios",
    "ModelParams",
    "SolverSettings",
    "FixedPointSolution",
    "fixed_point_defect",
    "solve_nu",
    "solve_nu_iterative",
    "solve_nu_imaginary",
    "evaluation_point",
    "chi_at",
    "ppv_limit",
    "training_error_limit",
    "resolvent_trace_limit",
    "limits",
    "omega",
    "risk_wide",
    "risk_large_sample",
    "rho_star",
    "lambda_opt",
    "LAMBDA_ZERO",
    "PSI_INF",
]

# stand-in for lambda -> 0+ (the fixed point needs lambda > 0)
LAMBDA_ZERO = 1e-8
# stand-in for psi -> infinity
PSI_INF = 1e4


@dataclass(frozen=True)
class ShapeRatios:
    psi1: float
    psi2: float

    def __post_init__(self):
        for name in ("psi1", "psi2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")


@dataclass(frozen=True)
class ModelParams:
    """Target and noise energies.

    ``f0_sq`` (intercept energy) is carried for completeness; none of the
    limiting formulas depend on it.
    """

    f1_sq: float = 1.0
    fstar_sq: float = 0.0
    tau_sq: float = 0.0
    f0_sq: float = 0.0

    def __post_init__(self):
        for name in ("f1_sq", "fstar_sq", "tau_sq", "f0_sq"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.fstar_sq + self.tau_sq == 0 and self.f1_sq == 0:
            raise ValueError("model has no signal and no noise")

    @property
    def rho(self) -> float:
        """Signal-to-noise ratio ``F1^2 / (F*^2 + tau^2)``; ``inf`` if noiseless."""
        den = self.fstar_sq + self.tau_sq
        return math.inf if den == 0 else self.f1_sq / den

    @property
    def total_energy(self) -> float:
        return self.f1_sq + self.fstar_sq + self.tau_sq


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = 1e-12
    max_iterations: int = 100_000
    damping: float = 0.5
    continuation_start: float = 1e3
    continuation_steps: int = 40

    def __post_init__(self):
        if self.tolerance < 100 * np.finfo(float).eps:
            raise ValueError("tolerance below 100 machine epsilons")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


DEFAULT_SETTINGS = SolverSettings()


@dataclass(frozen=True)
class FixedPointSolution:
    nu1: complex
    nu2: complex
    chi: float
    xi: complex
    iterations: int
    residual: float
    method: str = "imaginary"
    # largest defect of a warm start along the continuation path
    warm_start_residual: float = field(default=0.0, compare=False)


def _rhs(nu1, nu2, psi1, psi2, z2, xi):
    den = 1.0 - z2 * nu1 * nu2
    f1 = psi1 / (-xi - nu2 - z2 * nu2 / den)
    f2 = psi2 / (-xi - nu1 - z2 * nu1 / den)
    return f1, f2


def fixed_point_defect(nu1, nu2, ratios: ShapeRatios, zeta: float, xi: complex) -> float:
    """Largest defect ``|nu_j - rhs_j(nu1, nu2)|``, relative to ``max(1, |nu_j|)``."""
    f1, f2 = _rhs(nu1, nu2, ratios.psi1, ratios.psi2, zeta * zeta, xi)
    return max(abs(nu1 - f1) / max(1.0, abs(nu1)), abs(nu2 - f2) / max(1.0, abs(nu2)))


def _g(x, z2):
    return x + z2 * x / (1.0 + z2 * x)


def _g_inverse(m, z2):
    # positive root of z2 x^2 + (1 + z2 - z2 m) x - m = 0
    b = 1.0 + z2 - z2 * m
    if z2 == 0:
        return m
    disc = b * b + 4.0 * z2 * m
    # cancellation-free form of (-b + sqrt(disc)) / (2 z2)
    return 2.0 * m / (b + math.sqrt(disc))


def solve_nu_imaginary(ratios: ShapeRatios, zeta: float, t: float) -> FixedPointSolution:
    """Solve at ``xi = i t`` through the scalar reduction in ``x = -chi``."""
    if not t > 0:
        raise ValueError("imaginary part of xi must be positive")
    psi1, psi2 = ratios.psi1, ratios.psi2
    z2 = zeta * zeta
    x_max = _g_inverse(min(psi1, psi2), z2)

    def h(x):
        gx = _g(x, z2)
        return t * t * x - (psi1 - gx) * (psi2 - gx)

    # h(0) < 0 < h(x_max)
    x, info = brentq(h, 0.0, x_max, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                     maxiter=500, full_output=True)
    gx = _g(x, z2)
    b1 = (psi1 - gx) / t
    b2 = (psi2 - gx) / t
    b1, b2, polish = _newton_polish(b1, b2, psi1, psi2, z2, t)
    nu1, nu2 = 1j * b1, 1j * b2
    xi = 1j * t
    res = fixed_point_defect(nu1, nu2, ratios, zeta, xi)
    return FixedPointSolution(nu1, nu2, -b1 * b2, xi, info.iterations + polish, res)


def _newton_polish(b1, b2, psi1, psi2, z2, t, steps=3):
    """A few Newton steps on ``b_j D_j(b) - psi_j = 0``.

    The bracketed root is already accurate in ``x``; recovering ``b_j`` as
    ``(psi_j - g) / t`` loses digits when ``t`` is small, which Newton on the
    unreduced system restores.
    """

    def residual(v):
        p, q = v
        x = p * q
        k = z2 / (1.0 + z2 * x)
        return np.array([p * (t + q + k * q) - psi1, q * (t + p + k * p) - psi2])

    v = np.array([b1, b2])
    r = residual(v)
    n = 0
    for n in range(1, steps + 1):
        p, q = v
        x = p * q
        s = 1.0 + z2 * x
        k = z2 / s
        dk = -z2 * z2 / (s * s)  # dk/dx
        # d/dp [p (t + q + k q)] = t + q + k q + p q dk q
        jac = np.array([
            [t + q + k * q + p * q * q * dk, p + p * k + p * q * dk * p],
            [q + q * k + q * p * dk * q, t + p + k * p + q * p * p * dk],
        ])
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            break
        trial = v + step
        if np.any(trial <= 0):
            break
        rt = residual(trial)
        if np.max(np.abs(rt)) >= np.max(np.abs(r)):
            break
        v, r = trial, rt
    return float(v[0]), float(v[1]), n


def solve_nu_iterative(
    ratios: ShapeRatios,
    zeta: float,
    xi: complex,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> FixedPointSolution:
    """Damped alternating iteration with continuation in ``Im(xi)``.

    Starts at ``Re(xi) + i * continuation_start`` from ``nu_j = -psi_j / xi``
    and walks the imaginary part geometrically down to ``Im(xi)``, warm
    starting each stage from the previous solution.
    """
    xi = complex(xi)
    if not xi.imag > 0:
        raise ValueError("xi must lie in the upper half plane")
    psi1, psi2 = ratios.psi1, ratios.psi2
    z2 = zeta * zeta
    top = max(settings.continuation_start, xi.imag)
    steps = max(settings.continuation_steps, 1) if top > xi.imag else 1
    path = np.geomspace(top, xi.imag, steps + 1)[1:] if top > xi.imag else [xi.imag]

    x0 = complex(xi.real, top)
    nu1, nu2 = -psi1 / x0, -psi2 / x0
    total = 0
    worst_warm = 0.0
    delta = settings.damping
    for k, im in enumerate(path):
        z = complex(xi.real, im)
        warm = fixed_point_defect(nu1, nu2, ratios, zeta, z)
        if k > 0:
            worst_warm = max(worst_warm, warm)
        res = warm
        it = 0
        while res > settings.tolerance:
            if it >= settings.max_iterations:
                raise NoConvergence(
                    f"no convergence at xi={z} after {it} iterations", residual=res
                )
            f1, _ = _rhs(nu1, nu2, psi1, psi2, z2, z)
            nu1 = (1 - delta) * nu1 + delta * f1
            _, f2 = _rhs(nu1, nu2, psi1, psi2, z2, z)
            nu2 = (1 - delta) * nu2 + delta * f2
            if not (nu1.imag > 0 and nu2.imag > 0):
                raise LeftUpperHalfPlane(
                    f"iterate left C+ at xi={z}; increase continuation_steps"
                )
            it += 1
            res = fixed_point_defect(nu1, nu2, ratios, zeta, z)
        total += it
    chi = nu1 * nu2
    return FixedPointSolution(
        nu1, nu2, chi.real, xi, total, res, method="iterative",
        warm_start_residual=worst_warm,
    )


def solve_nu(
    ratios: ShapeRatios,
    zeta: float,
    xi: complex,
    settings: SolverSettings = DEFAULT_SETTINGS,
    method: str = "auto",
) -> FixedPointSolution:
    """Solve the coupled fixed-point equations at ``xi`` in the upper half plane.

    Parameters
    ----------
    method : {"auto", "imaginary", "iterative"}
        ``auto`` uses the scalar reduction when ``xi`` is purely imaginary
        and the damped iteration otherwise.

    Raises
    ------
    NoConvergence, LeftUpperHalfPlane
        From the iterative path only.
    """
    xi = complex(xi)
    if not xi.imag > 0:
        raise ValueError("xi must lie in the upper half plane")
    if method == "auto":
        method = "imaginary" if xi.real == 0 else "iterative"
    if method == "imaginary":
        if xi.real != 0:
            raise ValueError("imaginary reduction needs a purely imaginary xi")
        sol = solve_nu_imaginary(ratios, zeta, xi.imag)
        if sol.residual > settings.tolerance:
            raise NoConvergence(
                f"scalar reduction residual {sol.residual:.2e} above tolerance",
                residual=sol.residual,
            )
        return sol
    if method == "iterative":
        return solve_nu_iterative(ratios, zeta, xi, settings)
    raise ValueError(f"unknown method {method!r}")


def evaluation_point(ratios: ShapeRatios, coeffs: ActivationCoefficients, lam: float) -> complex:
    """``i sqrt(psi1 psi2 lambda) / mu_star``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return 1j * math.sqrt(ratios.psi1 * ratios.psi2 * lam) / coeffs.mu_star


def _solve_at(ratios, coeffs, lam, settings):
    return solve_nu(ratios, coeffs.zeta, evaluation_point(ratios, coeffs, lam), settings)


def chi_at(
    ratios: ShapeRatios,
    coeffs: ActivationCoefficients,
    lam: float,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> float:
    return _solve_at(ratios, coeffs, lam, settings).chi


def _ppv(params: ModelParams, z2: float, chi: float) -> float:
    return params.f1_sq / (1.0 - chi * z2) + params.fstar_sq + params.tau_sq


def ppv_limit(
    params: ModelParams,
    ratios: ShapeRatios,
    coeffs: ActivationCoefficients,
    lam: float,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> float:
    """Limiting expected posterior predictive variance ``F1^2/(1 - chi zeta^2) + F*^2 + tau^2``."""
    chi = chi_at(ratios, coeffs, lam, settings)
    return _ppv(params, coeffs.zeta ** 2, chi)


@dataclass(frozen=True)
class Limits:
    """All limiting quantities at one ``(psi1, psi2, lambda)``."""

    ppv: float
    chi: float
    train_error: float
    resolvent_trace: float
    solution: FixedPointSolution


def limits(
    params: ModelParams,
    ratios: ShapeRatios,
    coeffs: ActivationCoefficients,
    lam: float,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> Limits:
    """Solve once and return PPV, chi, training error and resolvent trace limits."""
    sol = _solve_at(ratios, coeffs, lam, settings)
    z2 = coeffs.zeta ** 2
    s2 = _ppv(params, z2, sol.chi)
    root = math.sqrt(lam * ratios.psi1 * ratios.psi2)
    # -i nu2 sqrt(lambda psi1 / (psi2 mu*^2)) S^2
    train = (-1j * sol.nu2).real * math.sqrt(lam * ratios.psi1 / ratios.psi2) / coeffs.mu_star * s2
    # -i nu1 mu* / sqrt(lambda psi1 psi2) (zeta^2/(1 - zeta^2 chi) + 1)
    r = (-1j * sol.nu1).real * coeffs.mu_star / root * (z2 / (1.0 - z2 * sol.chi) + 1.0)
    return Limits(s2, sol.chi, train, r, sol)


def training_error_limit(params, ratios, coeffs, lam, settings=DEFAULT_SETTINGS) -> float:
    """Limit of the empirical-Bayes temperature (the training error)."""
    return limits(params, ratios, coeffs, lam, settings).train_error


def resolvent_trace_limit(ratios, coeffs, lam, settings=DEFAULT_SETTINGS) -> float:
    """Limit of the mean resolvent quadratic form ``E_x[sigma(x)^T Sigma sigma(x) / d]``."""
    return limits(ModelParams(), ratios, coeffs, lam, settings).resolvent_trace


def omega(first_arg: float, psi: float, lambda_bar: float) -> float:
    """``lim_{psi1 -> inf} zeta^2 chi`` in closed form (``omega <= 0``).

    ``first_arg`` plays the role of ``zeta`` (or ``sqrt(rho)`` for the
    optimal-ridge formula); ``lambda_bar = lambda / mu_star^2``.
    """
    if not psi > 0:
        raise ValueError("psi must be positive")
    if not lambda_bar >= 0:
        raise ValueError("lambda_bar must be nonnegative")
    if math.isinf(lambda_bar):
        return 0.0
    z2 = first_arg * first_arg
    s = lambda_bar * psi + 1.0
    a = psi * z2 - z2 - lambda_bar * psi - 1.0
    rad = a * a + 4.0 * psi * z2 * s
    if rad < 0:
        raise NegativeRadicand(f"radicand {rad!r} < 0")
    root = math.sqrt(rad)
    # -(a + root)/(2s), rewritten to avoid cancellation when a < 0
    if a >= 0:
        return -(a + root) / (2.0 * s)
    return -(4.0 * psi * z2 * s) / (2.0 * s * (root - a))


def _risk_ratio(w, psi, num_a, num_b):
    den = psi - 2.0 * w * psi + w * w * psi - w * w
    if den == 0 or not math.isfinite(den):
        raise DegenerateDenominator(f"denominator {den!r} at omega={w!r}")
    return (num_a * psi + num_b * w * w) / den


def risk_wide(rho, zeta, psi2, lambda_bar, params: ModelParams) -> float:
    """Asymptotic test risk as ``psi1 -> infinity``.

    ``(F1^2+F*^2+tau^2)(psi2 rho + w^2) / ((1+rho)(psi2 - 2 w psi2 + w^2 psi2 - w^2)) + F*^2``
    with ``w = omega(zeta, psi2, lambda_bar)``. Evaluated in the equivalent
    form ``(F1^2 psi2 + (F*^2+tau^2) w^2) / (...) + F*^2``, which is finite
    at ``rho = inf``; ``rho`` is cross-checked against ``params``.
    """
    if not math.isclose(rho, params.rho, rel_tol=1e-9) and not (
        math.isinf(rho) and math.isinf(params.rho)
    ):
        raise ValueError(f"rho={rho!r} inconsistent with params (rho={params.rho!r})")
    w = omega(zeta, psi2, lambda_bar)
    noise = params.fstar_sq + params.tau_sq
    return _risk_ratio(w, psi2, params.f1_sq, noise) + params.fstar_sq


def risk_large_sample(zeta, psi1, lambda_bar, params: ModelParams) -> float:
    """Asymptotic test risk as ``psi2 -> infinity``.

    ``F1^2 (psi1 zeta^2 + w^2) / (zeta^2 (psi1 - 2 w psi1 + w^2 psi1 - w^2)) + F*^2``
    with ``w = omega(zeta, psi1, lambda_bar)``.
    """
    if zeta == 0:
        raise DegenerateDenominator("zeta = 0")
    w = omega(zeta, psi1, lambda_bar)
    z2 = zeta * zeta
    return _risk_ratio(w, psi1, params.f1_sq, params.f1_sq / z2) + params.fstar_sq


def rho_star(zeta: float, psi2: float) -> float:
    """SNR threshold below which a strictly positive ridge is optimal as ``psi1 -> inf``."""
    w = omega(zeta, psi2, 0.0)
    den = (1.0 - psi2) * w + psi2
    if den == 0:
        raise DegenerateDenominator("rho_star denominator vanishes")
    return (w * w - w) / den


def lambda_opt(rho: float, zeta: float, psi2: float) -> float:
    """Closed-form risk-optimal ``lambda_bar`` (``= lambda / mu_star^2``) as ``psi1 -> inf``.

    Raises
    ------
    PhaseViolation
        If ``rho >= rho_star(zeta, psi2)``; the optimum is then ``lambda_bar = 0``.
    """
    threshold = rho_star(zeta, psi2)
    if not rho < threshold:
        raise PhaseViolation(f"rho={rho!r} >= rho_star={threshold!r}: optimal lambda is 0")
    w = omega(math.sqrt(rho), psi2, 0.0)
    z2 = zeta * zeta
    num = z2 * psi2 - z2 * w * psi2 + z2 * w + w - w * w
    return num / ((w * w - w) * psi2)

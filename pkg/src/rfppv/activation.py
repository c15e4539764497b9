"""Activation functions and their Gaussian moment coefficients.

For ``G ~ N(0, 1)`` the coefficients are::

    mu0        = E[sigma(G)]
    mu1        = E[G sigma(G)]
    mu_star^2  = E[sigma(G)^2] - mu0^2 - mu1^2
    zeta       = mu1 / mu_star

Smooth activations use a Gauss-Hermite rule for the standard normal weight.
Activations with a kink are integrated separately on each side of it so the
rule never straddles the non-smooth point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import NonPositiveMuStar, UnknownActivation

__all__ = [
    "Activation",
    "ActivationCoefficients",
    "relu",
    "tanh",
    "shifted_relu",
    "linear",
    "get_activation",
    "evaluate",
    "gaussian_coefficients",
    "zeta",
]

MU_STAR_TOL = 1e-10
DEFAULT_ORDER = 200


@dataclass(frozen=True)
class Activation:
    """A scalar activation ``sigma``.

    ``kink`` is the location of the single non-differentiable point, if
    any; quadrature splits the Gaussian integral there.
    """

    kind: str
    fn: Callable[[np.ndarray], np.ndarray]
    shift: float = 0.0
    scale: float = 1.0
    kink: float | None = None

    def __call__(self, x):
        return self.scale * self.fn(np.asarray(x, dtype=float) - self.shift)

    def __repr__(self):
        extra = f", shift={self.shift}" if self.shift else ""
        extra += f", scale={self.scale}" if self.scale != 1.0 else ""
        return f"Activation({self.kind!r}{extra})"

    def scaled(self, c: float) -> "Activation":
        return Activation(self.kind, self.fn, self.shift, self.scale * c, self.kink)


def _relu(x):
    return np.maximum(x, 0.0)


relu = Activation("relu", _relu, kink=0.0)
tanh = Activation("tanh", np.tanh)
linear = Activation("linear", lambda x: np.asarray(x, dtype=float))


def shifted_relu(c: float) -> Activation:
    """``x -> max(0, x - c)``."""
    return Activation("shifted_relu", _relu, shift=float(c), kink=float(c))


_NAMED = {"relu": relu, "tanh": tanh, "linear": linear}


def get_activation(name: str) -> Activation:
    """Look up an activation by name.

    Accepts ``relu``, ``tanh``, ``linear`` and ``shifted_relu:<c>``.
    """
    key = name.strip().lower()
    if key in _NAMED:
        return _NAMED[key]
    if key.startswith("shifted_relu"):
        _, _, arg = key.partition(":")
        try:
            return shifted_relu(float(arg) if arg else 0.0)
        except ValueError:
            raise UnknownActivation(f"bad shift in {name!r}") from None
    raise UnknownActivation(f"unknown activation {name!r}")


def evaluate(activation: Activation, x):
    return activation(x)


@dataclass(frozen=True)
class ActivationCoefficients:
    mu0: float
    mu1: float
    mu_star_sq: float
    zeta: float

    @property
    def mu_star(self) -> float:
        return math.sqrt(self.mu_star_sq)


@lru_cache(maxsize=32)
def _hermite_normal(order: int):
    # probabilists' Hermite rule: weight exp(-x^2/2), normalised to N(0, 1)
    from scipy.special import roots_hermitenorm

    x, w = roots_hermitenorm(order)
    return x, w / w.sum()


@lru_cache(maxsize=32)
def _legendre(order: int):
    from scipy.special import roots_legendre

    return roots_legendre(order)


# N(0, 1) mass beyond this many sd is below 1e-40
_TAIL = 14.0


def _expect(fn: Callable, activation: Activation, order: int) -> float:
    """``E[fn(G, sigma(G))]`` for ``G ~ N(0, 1)``."""
    if activation.kink is None:
        x, w = _hermite_normal(order)
        return math.fsum(w * fn(x, activation(x)))
    # piecewise-smooth: composite Gauss-Legendre on unit panels either side of
    # the kink; short panels keep node rounding from growing with the order
    c = activation.kink
    t, wt = _legendre(max(20, order // 10))
    lo, hi = min(-_TAIL, c - _TAIL), max(_TAIL, c + _TAIL)
    edges = np.concatenate([np.linspace(lo, c, max(1, math.ceil(c - lo)) + 1),
                            np.linspace(c, hi, max(1, math.ceil(hi - c)) + 1)[1:]])
    a, b = edges[:-1, None], edges[1:, None]
    x = 0.5 * (b - a) * t + 0.5 * (b + a)
    dens = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return math.fsum((0.5 * (b - a) * wt * dens * fn(x, activation(x))).ravel())


def gaussian_coefficients(
    activation: Activation, quadrature_order: int = DEFAULT_ORDER
) -> ActivationCoefficients:
    """Gaussian moment coefficients ``(mu0, mu1, mu_star^2, zeta)``.

    Raises
    ------
    NonPositiveMuStar
        If ``mu_star^2 <= 1e-10`` (a linear or near-linear activation).
    """
    if quadrature_order < 20:
        raise ValueError("quadrature_order must be >= 20")
    mu0 = _expect(lambda g, s: s, activation, quadrature_order)
    mu1 = _expect(lambda g, s: g * s, activation, quadrature_order)
    second = _expect(lambda g, s: s * s, activation, quadrature_order)
    mu_star_sq = second - mu0 * mu0 - mu1 * mu1
    if not mu_star_sq > MU_STAR_TOL:
        raise NonPositiveMuStar(
            f"mu_star^2 = {mu_star_sq:.3e} <= {MU_STAR_TOL:g} for {activation!r}; "
            "the activation is linear"
        )
    return ActivationCoefficients(mu0, mu1, mu_star_sq, mu1 / math.sqrt(mu_star_sq))


def zeta(coeffs: ActivationCoefficients) -> float:
    return coeffs.mu1 / math.sqrt(coeffs.mu_star_sq)

"""Finite-dimensional random-features ridge model.

Inputs and features are uniform on the sphere of radius ``sqrt(d)``. With
``Z = sigma(X Theta^T / sqrt(d)) / sqrt(d)`` and ridge constant
``c = psi1_d psi2_d lambda`` the MAP weights are::

    a_hat = (Z^T Z + c I)^{-1} Z^T y / sqrt(d)

and the expected posterior predictive variance at the empirical-Bayes
temperature is::

    S^2 = phi_inv * (1 + E_x[sigma(x)^T (Z^T Z + c I)^{-1} sigma(x)] / d),
    phi_inv = <y, y - sqrt(d) Z a_hat> / n

When ``N > n`` the dual (``n x n``) system is used. Near interpolation both
``phi_inv -> 0`` and the quadratic form ``~ 1/c`` blow up, so the dual path
evaluates ``S^2`` with the factor ``c`` cancelled analytically.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from .activation import Activation, relu
from .errors import FactorizationFailure, ZeroVector

logger = logging.getLogger(__name__)

__all__ = [
    "SimulationConfig",
    "SyntheticDataset",
    "FeatureSet",
    "RidgeFit",
    "ReplicationSample",
    "rng_stream",
    "sample_sphere",
    "generate_dataset",
    "sample_features",
    "design_matrix",
    "ridge_fit",
    "empirical_risk",
    "empirical_ppv",
    "run_replication",
    "RidgePath",
    "ridge_path",
    "feature_map",
]

PURPOSES = {"data": 0, "features": 1, "noise": 2, "test": 3}
JITTER = 1e-12


@dataclass(frozen=True)
class SimulationConfig:
    """One finite-size instance.

    The target is linear: ``y = beta0 + <x, beta> + eps`` with
    ``||beta||^2 = f1_sq``, ``beta0^2 = f0_sq`` and ``Var(eps) = tau_sq``.
    ``replication`` indexes independent draws under the same ``seed``.
    """

    d: int
    n: int
    n_features: int
    lam: float
    activation: Activation = relu
    f1_sq: float = 1.0
    f0_sq: float = 0.0
    tau_sq: float = 0.0
    n_test: int = 2000
    seed: int = 0
    replication: int = 0

    def __post_init__(self):
        if min(self.d, self.n, self.n_features) < 1:
            raise ValueError("d, n and n_features must be >= 1")
        if self.n_test < 100:
            raise ValueError("n_test must be >= 100")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.f1_sq < 0 or self.f0_sq < 0 or self.tau_sq < 0:
            raise ValueError("energies must be nonnegative")

    @property
    def psi1(self) -> float:
        return self.n_features / self.d

    @property
    def psi2(self) -> float:
        return self.n / self.d

    def with_(self, **changes) -> "SimulationConfig":
        return replace(self, **changes)


def rng_stream(seed: int, replication: int, purpose: str) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, replication, purpose)``.

    Streams are independent of the order in which they are created, so
    replications can run in any order or in parallel.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replication), PURPOSES[purpose]))
    return np.random.Generator(np.random.Philox(ss))


def sample_sphere(count: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. rows uniform on the sphere of radius ``sqrt(d)``."""
    if count < 0 or d < 1:
        raise ValueError("need count >= 0 and d >= 1")
    g = rng.standard_normal((count, d))
    norms = np.linalg.norm(g, axis=1)
    bad = norms < 1e-300
    # probability-zero event; redraw the offending rows
    tries = 0
    while np.any(bad):
        tries += 1
        if tries > 10:
            raise ZeroVector("could not draw a nonzero Gaussian vector")
        g[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(g, axis=1)
        bad = norms < 1e-300
    return g * (math.sqrt(d) / norms)[:, None]


@dataclass(frozen=True)
class SyntheticDataset:
    inputs: np.ndarray
    responses: np.ndarray
    beta: np.ndarray
    beta0: float
    noise_draws: np.ndarray
    seed: int

    def truth(self, x: np.ndarray) -> np.ndarray:
        """Noiseless target ``beta0 + <x, beta>``."""
        return self.beta0 + x @ self.beta


def generate_dataset(config: SimulationConfig, rng: np.random.Generator | None = None,
                     noise_rng: np.random.Generator | None = None) -> SyntheticDataset:
    if rng is None:
        rng = rng_stream(config.seed, config.replication, "data")
    if noise_rng is None:
        noise_rng = rng_stream(config.seed, config.replication, "noise")
    d = config.d
    beta = sample_sphere(1, d, rng)[0] * math.sqrt(config.f1_sq / d)
    beta0 = math.sqrt(config.f0_sq)
    x = sample_sphere(config.n, d, rng)
    noise = noise_rng.standard_normal(config.n) * math.sqrt(config.tau_sq)
    y = beta0 + x @ beta + noise
    return SyntheticDataset(x, y, beta, beta0, noise, config.seed)


@dataclass(frozen=True)
class FeatureSet:
    theta: np.ndarray
    seed: int


def sample_features(config: SimulationConfig, rng: np.random.Generator | None = None) -> FeatureSet:
    """Feature directions on the sphere of radius ``sqrt(d)``."""
    if rng is None:
        rng = rng_stream(config.seed, config.replication, "features")
    return FeatureSet(sample_sphere(config.n_features, config.d, rng), config.seed)


def feature_map(inputs: np.ndarray, features: FeatureSet, activation: Activation) -> np.ndarray:
    """``sigma(X Theta^T / sqrt(d))`` (no ``1/sqrt(d)`` prefactor)."""
    d = inputs.shape[1]
    return activation(inputs @ features.theta.T / math.sqrt(d))


def design_matrix(inputs: np.ndarray, features: FeatureSet, activation: Activation) -> np.ndarray:
    """``Z = sigma(X Theta^T / sqrt(d)) / sqrt(d)``, shape ``(n, N)``."""
    if inputs.shape[1] != features.theta.shape[1]:
        raise ValueError("inputs and features have different dimension")
    return feature_map(inputs, features, activation) / math.sqrt(inputs.shape[1])


@dataclass
class RidgeFit:
    """Solution of ``(Z^T Z + c I) a = Z^T y / sqrt(d)``.

    On the primal path ``factor`` is the Cholesky factor of the ``N x N``
    matrix ``Z^T Z + c I``; on the dual path it factors ``Z Z^T + c I``.
    """

    a_hat: np.ndarray
    solve_path: str
    ridge_constant: float
    factor: tuple = field(repr=False)
    Z: np.ndarray = field(repr=False)
    d: int = 0
    jittered: bool = False

    def quad_forms(self, S: np.ndarray) -> np.ndarray:
        """Row-wise ``s^T (Z^T Z + c I)^{-1} s`` for the rows ``s`` of ``S``.

        Only safe for moderate ``c`` on the dual path; :func:`empirical_ppv`
        avoids this at tiny ridge.
        """
        c = self.ridge_constant
        if self.solve_path == "primal":
            sol = linalg.cho_solve(self.factor, S.T)
            return np.einsum("ij,ji->i", S, sol)
        U = self.Z @ S.T
        sol = linalg.cho_solve(self.factor, U)
        return (np.einsum("ij,ij->i", S, S) - np.einsum("ij,ij->j", U, sol)) / c

    def normal_residual(self, y: np.ndarray) -> float:
        """Relative residual of the normal equations."""
        rhs = self.Z.T @ y / math.sqrt(self.d)
        lhs = self.Z.T @ (self.Z @ self.a_hat) + self.ridge_constant * self.a_hat
        scale = np.linalg.norm(rhs)
        return float(np.linalg.norm(lhs - rhs) / scale) if scale > 0 else float(np.linalg.norm(lhs))


def _cholesky(A: np.ndarray):
    try:
        return linalg.cho_factor(A, lower=True, check_finite=False), False
    except linalg.LinAlgError:
        pass
    logger.warning("Cholesky failed; retrying with diagonal jitter %g", JITTER)
    A = A + JITTER * np.eye(A.shape[0])
    try:
        return linalg.cho_factor(A, lower=True, check_finite=False), True
    except linalg.LinAlgError as exc:
        raise FactorizationFailure(str(exc)) from exc


def ridge_fit(Z: np.ndarray, y: np.ndarray, d: int, n: int, N: int, lam: float,
              path: str = "auto") -> RidgeFit:
    """MAP weights with ridge constant ``(N/d)(n/d) lambda``.

    ``path="auto"`` picks the primal system when ``N <= n`` and the dual
    (Woodbury) system otherwise.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if Z.shape != (n, N):
        raise ValueError(f"Z has shape {Z.shape}, expected {(n, N)}")
    c = (N / d) * (n / d) * lam
    if path == "auto":
        path = "primal" if N <= n else "dual"
    if path == "primal":
        factor, jit = _cholesky(Z.T @ Z + c * np.eye(N))
        a = linalg.cho_solve(factor, Z.T @ y) / math.sqrt(d)
    elif path == "dual":
        factor, jit = _cholesky(Z @ Z.T + c * np.eye(n))
        a = Z.T @ linalg.cho_solve(factor, y) / math.sqrt(d)
    else:
        raise ValueError(f"unknown path {path!r}")
    return RidgeFit(a, path, c, factor, Z, d, jit)


def empirical_risk(fit: RidgeFit, features: FeatureSet, activation: Activation,
                   test_inputs: np.ndarray, truth_fn) -> float:
    """Monte Carlo estimate of ``E_x (f(x) - f_hat(x))^2`` over ``test_inputs``."""
    if test_inputs.shape[0] < 100:
        raise ValueError("need at least 100 test inputs")
    pred = feature_map(test_inputs, features, activation) @ fit.a_hat
    err = truth_fn(test_inputs) - pred
    return float(np.mean(err * err))


def _ppv_terms(fit: RidgeFit, y: np.ndarray, S: np.ndarray):
    """Return ``(train_error, ppv, mean quadratic form / d)``."""
    n = y.shape[0]
    d = fit.d
    c = fit.ridge_constant
    if fit.solve_path == "primal":
        resid = y - math.sqrt(d) * (fit.Z @ fit.a_hat)
        train = float(y @ resid) / n
        r = float(np.mean(fit.quad_forms(S))) / d
        return train, train * (1.0 + r), r
    # dual: y - sqrt(d) Z a_hat = c (K + cI)^{-1} y
    alpha = linalg.cho_solve(fit.factor, y)
    energy = float(y @ alpha) / n  # train_error / c
    U = fit.Z @ S.T
    sol = linalg.cho_solve(fit.factor, U)
    # c * quadratic form, without the 1/c blow-up
    cq = float(np.mean(np.einsum("ij,ij->i", S, S) - np.einsum("ij,ij->j", U, sol)))
    train = c * energy
    return train, train + energy * cq / d, cq / (c * d)


def empirical_ppv(fit: RidgeFit, Z: np.ndarray, y: np.ndarray, features: FeatureSet,
                  activation: Activation, test_inputs: np.ndarray, n: int):
    """Expected PPV and empirical-Bayes temperature.

    Returns
    -------
    ppv, train_error : float
    """
    if Z is not fit.Z and not np.array_equal(Z, fit.Z):
        raise ValueError("Z does not match the fitted design matrix")
    if y.shape[0] != n:
        raise ValueError("y has the wrong length")
    S = feature_map(test_inputs, features, activation)
    train, ppv, _ = _ppv_terms(fit, y, S)
    return ppv, train


@dataclass(frozen=True)
class ReplicationSample:
    risk: float
    ppv: float
    train_error: float
    seed: int
    replication: int = 0
    quad_form: float = float("nan")
    y_var: float = float("nan")
    jittered: bool = False

    def as_tuple(self):
        return (self.risk, self.ppv, self.train_error)


def run_replication(config: SimulationConfig) -> ReplicationSample:
    """Draw data, features and test inputs and return ``(risk, ppv, train_error)``.

    Risk and PPV are evaluated on the same test inputs.
    """
    data = generate_dataset(config)
    features = sample_features(config)
    test = sample_sphere(config.n_test, config.d,
                         rng_stream(config.seed, config.replication, "test"))
    Z = design_matrix(data.inputs, features, config.activation)
    fit = ridge_fit(Z, data.responses, config.d, config.n, config.n_features, config.lam)
    S = feature_map(test, features, config.activation)
    pred = S @ fit.a_hat
    err = data.truth(test) - pred
    risk = float(np.mean(err * err))
    train, ppv, r = _ppv_terms(fit, data.responses, S)
    return ReplicationSample(
        risk=risk,
        ppv=ppv,
        train_error=train,
        seed=config.seed,
        replication=config.replication,
        quad_form=r,
        y_var=float(np.var(data.responses)),
        jittered=fit.jittered,
    )


@dataclass(frozen=True)
class RidgePath:
    """Risk, PPV and training error of one draw along a grid of ``lambda``."""

    lambdas: np.ndarray
    risk: np.ndarray
    ppv: np.ndarray
    train_error: np.ndarray
    y_var: float


def ridge_path(config: SimulationConfig, lambdas) -> RidgePath:
    """Evaluate one replication at every ``lambda`` in ``lambdas``.

    Data, features and test inputs are drawn once (as in
    :func:`run_replication` with ``config``) and the ridge problem is solved
    for all ridge values through a single symmetric eigendecomposition.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(lambdas <= 0):
        raise ValueError("lambdas must be positive")
    data = generate_dataset(config)
    features = sample_features(config)
    test = sample_sphere(config.n_test, config.d,
                         rng_stream(config.seed, config.replication, "test"))
    d, n, N = config.d, config.n, config.n_features
    Z = design_matrix(data.inputs, features, config.activation)
    S = feature_map(test, features, config.activation)
    y = data.responses
    target = data.truth(test)
    cs = (N / d) * (n / d) * lambdas
    sqd = math.sqrt(d)

    if N <= n:
        evals, V = np.linalg.eigh(Z.T @ Z)
        evals = np.clip(evals, 0.0, None)
        zy = V.T @ (Z.T @ y)            # (N,)
        SV = S @ V                      # (n_test, N)
        ZV = Z @ V                      # (n, N)
        sv2 = np.mean(SV * SV, axis=0)  # mean over test of (v_i^T s)^2
        risk, ppv, train = [], [], []
        for c in cs:
            coef = zy / (evals + c)     # a_hat in eigenbasis, times sqrt(d)
            fit_train = ZV @ coef
            tr = float(y @ (y - fit_train)) / n
            pred = SV @ coef / sqd
            e = target - pred
            r = float(np.sum(sv2 / (evals + c))) / d
            risk.append(float(np.mean(e * e)))
            train.append(tr)
            ppv.append(tr * (1.0 + r))
    else:
        evals, U = np.linalg.eigh(Z @ Z.T)
        evals = np.clip(evals, 0.0, None)
        uy = U.T @ y
        ZtU = Z.T @ U                   # (N, n)
        SZU = S @ ZtU                   # (n_test, n): u_i^T Z s
        s_norm = float(np.mean(np.einsum("ij,ij->i", S, S)))
        szu2 = np.mean(SZU * SZU, axis=0)
        risk, ppv, train = [], [], []
        for c in cs:
            w = uy / (evals + c)
            pred = SZU @ w / sqd
            e = target - pred
            energy = float(np.sum(uy * w)) / n
            cq = s_norm - float(np.sum(szu2 / (evals + c)))
            tr = c * energy
            risk.append(float(np.mean(e * e)))
            train.append(tr)
            ppv.append(tr + energy * cq / d)
    return RidgePath(lambdas, np.array(risk), np.array(ppv), np.array(train), float(np.var(y)))

"""Gaussian-process regression with a constant trend.

A model is a sum of stationary components, each acting on a subset of the
input columns with its own lengthscales and variance.  The plain model has
one component over all columns; the additive model of ``reduction`` has
two.  Hyperparameters are fitted by maximizing the log-likelihood with the
trend and overall variance profiled out in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize

KERNELS = ("matern52", "matern32", "sqexp")
NUGGET_START, NUGGET_MAX = 1e-10, 1e-4


class NumericalError(RuntimeError):
    """Covariance stays singular after the largest allowed jitter."""


def correlation(kind: str, r: np.ndarray) -> np.ndarray:
    """Unit-variance correlation at scaled distance ``r``."""
    if kind == "matern52":
        s = np.sqrt(5.0) * r
        return (1.0 + s + s * s / 3.0) * np.exp(-s)
    if kind == "matern32":
        s = np.sqrt(3.0) * r
        return (1.0 + s) * np.exp(-s)
    if kind == "sqexp":
        return np.exp(-0.5 * r * r)
    raise ValueError(f"unknown kernel {kind!r}; choose from {KERNELS}")


def _slope(kind: str, r: np.ndarray) -> np.ndarray:
    """``-(dk/dr) / r``, finite at ``r = 0``."""
    if kind == "matern52":
        s = np.sqrt(5.0) * r
        return 5.0 / 3.0 * (1.0 + s) * np.exp(-s)
    if kind == "matern32":
        return 3.0 * np.exp(-np.sqrt(3.0) * r)
    if kind == "sqexp":
        return np.exp(-0.5 * r * r)
    raise ValueError(f"unknown kernel {kind!r}; choose from {KERNELS}")


def scaled_distance(U: np.ndarray, V: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    Us, Vs = U / lengthscales, V / lengthscales
    d2 = (Us * Us).sum(1)[:, None] + (Vs * Vs).sum(1)[None, :] - 2.0 * Us @ Vs.T
    return np.sqrt(np.maximum(d2, 0.0))


@dataclass
class Component:
    """One stationary term ``variance * k(||(u - v) / lengthscales||)`` on ``columns``."""

    columns: np.ndarray
    lengthscales: np.ndarray
    variance: float = 1.0
    kind: str = "matern52"

    def __post_init__(self):
        self.columns = np.asarray(self.columns, dtype=int)
        self.lengthscales = np.broadcast_to(np.asarray(self.lengthscales, float), self.columns.shape).copy()
        if np.any(self.lengthscales <= 0):
            raise ValueError("lengthscales must be positive")
        correlation(self.kind, np.zeros(1))

    def corr(self, U, V) -> np.ndarray:
        return correlation(self.kind, scaled_distance(U[:, self.columns], V[:, self.columns], self.lengthscales))

    def grad(self, u: np.ndarray, V: np.ndarray, dim: int) -> np.ndarray:
        """``(n, dim)`` gradient of ``variance * k(u, V_i)`` with respect to ``u``."""
        uc, Vc = u[self.columns], V[:, self.columns]
        r = scaled_distance(uc[None], Vc, self.lengthscales)[0]
        out = np.zeros((len(V), dim))
        out[:, self.columns] = -self.variance * _slope(self.kind, r)[:, None] * (uc - Vc) / self.lengthscales ** 2
        return out


def kernel_matrix(components: list[Component], U, V) -> np.ndarray:
    U, V = np.atleast_2d(U), np.atleast_2d(V)
    return sum(c.variance * c.corr(U, V) for c in components)


@dataclass
class Prediction:
    mean: np.ndarray
    variance: np.ndarray

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(self.variance)


@dataclass
class GpModel:
    """Conditioned model; use :func:`fit_gp` or :func:`condition` to build one."""

    components: list[Component]
    X: np.ndarray
    y: np.ndarray
    beta: float
    nugget: float
    loglik: float = np.nan
    _chol: tuple = field(default=None, repr=False)
    _w: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def prior_variance(self) -> float:
        return float(sum(c.variance for c in self.components))

    def predict(self, Q) -> Prediction:
        """Posterior mean and variance at the rows of ``Q``."""
        Q = np.atleast_2d(np.asarray(Q, float))
        if Q.shape[1] != self.dim:
            raise ValueError(f"queries have {Q.shape[1]} columns, model expects {self.dim}")
        k = kernel_matrix(self.components, Q, self.X)
        mean = self.beta + k @ self._w
        # the whitened form keeps the subtracted term a sum of squares
        v = solve_triangular(self._chol[0], k.T, lower=True)
        var = np.maximum(self.prior_variance - (v * v).sum(0), 0.0)
        return Prediction(mean, var)

    def predict_gradient(self, q) -> tuple[float, float, np.ndarray, np.ndarray]:
        """Mean, sd and their gradients at a single point ``q``."""
        q = np.asarray(q, float)
        k = kernel_matrix(self.components, q[None], self.X)[0]
        dk = sum(c.grad(q, self.X, self.dim) for c in self.components)
        L = self._chol[0]
        v = solve_triangular(L, k, lower=True)
        mean = self.beta + k @ self._w
        var = max(self.prior_variance - v @ v, 0.0)
        sd = np.sqrt(var)
        gm = dk.T @ self._w
        gs = -(solve_triangular(L, dk, lower=True).T @ v) / sd if sd > 0 else np.zeros(self.dim)
        return float(mean), float(sd), gm, gs


def _factor(C: np.ndarray, nugget: float):
    n = len(C)
    g = nugget
    while True:
        try:
            return cho_factor(C + g * np.eye(n), lower=True), g
        except np.linalg.LinAlgError:
            g = max(g, NUGGET_START) * 10.0
            if g > NUGGET_MAX * (1 + 1e-9):
                raise NumericalError("correlation matrix singular even with maximal jitter") from None


def condition(components: list[Component], X, y, nugget: float = NUGGET_START, beta: float | None = None) -> GpModel:
    """Condition fixed hyperparameters on data.

    The jitter is relative to the total prior variance.  ``beta`` defaults
    to its generalized least-squares estimate.
    """
    X = np.atleast_2d(np.asarray(X, float))
    y = np.asarray(y, float)
    total = sum(c.variance for c in components)
    K = kernel_matrix(components, X, X)
    chol, g = _factor(K / total, nugget)
    chol = (chol[0] * np.sqrt(total), chol[1])
    ones = np.ones(len(y))
    if beta is None:
        a = cho_solve(chol, ones)
        beta = float(a @ y / (a @ ones))
    w = cho_solve(chol, y - beta)
    return GpModel(list(components), X, y, beta, g * total, _chol=chol, _w=w)


# ---------------------------------------------------------------------------
# likelihood


@dataclass
class _Profile:
    value: float
    beta: float
    sigma2: float
    nugget: float
    Q: np.ndarray  # (aa^T / sigma2 - C^-1) / 2, contracts with dC into the gradient


def _profile(C: np.ndarray, y: np.ndarray, nugget: float, need_grad: bool = True) -> _Profile:
    """Log-likelihood with trend and variance profiled, for correlation ``C``."""
    n = len(y)
    chol, g = _factor(C, nugget)
    ones = np.ones(n)
    ci1 = cho_solve(chol, ones)
    beta = float(ci1 @ y / (ci1 @ ones))
    r = y - beta
    a = cho_solve(chol, r)
    sigma2 = float(r @ a / n)
    if sigma2 <= 0:
        sigma2 = 1e-300
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    value = -0.5 * n * np.log(2 * np.pi) - 0.5 * n * np.log(sigma2) - 0.5 * logdet - 0.5 * n
    Q = None
    if need_grad:
        Cinv = cho_solve(chol, np.eye(n))
        Q = 0.5 * (np.outer(a, a) / sigma2 - Cinv)
    return _Profile(value, beta, sigma2, g, Q)


def _lengthscale_grad(M: np.ndarray, Xc: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """``sum_ik M_ik (x_ij - x_kj)^2 / theta_j^2`` for each column ``j``, with ``M`` symmetric."""
    rowsum = M.sum(axis=1)
    quad = np.einsum("ij,ij->j", Xc, M @ Xc)
    return 2.0 * (Xc * Xc).T @ rowsum / theta ** 2 - 2.0 * quad / theta ** 2


def concentrated_loglik(X, y, theta, penalty: float = 0.0, kind: str = "matern52",
                        nugget: float = NUGGET_START, return_grad: bool = False):
    """Profiled log-likelihood of a single anisotropic component, minus ``penalty * sum(1/theta)``.

    With ``return_grad`` the gradient with respect to ``log(theta)`` is
    returned as well.
    """
    X = np.atleast_2d(np.asarray(X, float))
    y = np.asarray(y, float)
    theta = np.broadcast_to(np.asarray(theta, float), (X.shape[1],))
    if len(y) != len(X):
        raise ValueError("X and y lengths differ")
    if np.any(theta <= 0):
        raise ValueError("lengthscales must be positive")
    r = scaled_distance(X, X, theta)
    C = correlation(kind, r)
    prof = _profile(C, y, nugget, return_grad)
    value = prof.value - penalty * np.sum(1.0 / theta)
    if not return_grad:
        return value
    grad = _lengthscale_grad(prof.Q * _slope(kind, r), X, theta) + penalty / theta
    return value, grad


def _sample_starts(center: np.ndarray, lo: np.ndarray, hi: np.ndarray, n: int, rng) -> np.ndarray:
    starts = [np.clip(center, lo, hi)]
    for _ in range(n - 1):
        starts.append(lo + (hi - lo) * rng.random(len(lo)))
    return np.array(starts)


def maximize(fun, starts: np.ndarray, bounds: list[tuple[float, float]]):
    """Multistart L-BFGS-B maximization of ``fun(p) -> (value, grad)``.

    Returns the best point and value; ties go to the earliest start.
    Points where ``fun`` fails numerically count as very poor.
    """
    def neg(p):
        try:
            v, g = fun(p)
        except NumericalError:
            return 1e300, np.zeros_like(p)
        if not np.isfinite(v):
            return 1e300, np.zeros_like(p)
        return -v, -g

    best_p, best_v = None, -np.inf
    for p0 in starts:
        v0 = -neg(p0)[0]
        res = minimize(neg, p0, jac=True, method="L-BFGS-B", bounds=bounds, options={"maxiter": 200})
        p, v = (res.x, -res.fun) if -res.fun >= v0 else (p0, v0)
        if v > best_v:
            best_p, best_v = p, v
    if best_p is None or best_v <= -1e299:
        raise NumericalError("likelihood could not be evaluated at any start")
    return best_p, best_v


def input_ranges(X: np.ndarray) -> np.ndarray:
    rng = np.ptp(X, axis=0)
    return np.where(rng > 0, rng, 1.0)


def fit_gp(X, y, kind: str = "matern52", penalty: float = 0.0, n_starts: int = 5, seed: int = 0,
           isotropic: bool = False, nugget: float = NUGGET_START, theta0: np.ndarray | None = None) -> GpModel:
    """Fit lengthscales by multistart maximization of the profiled likelihood.

    Log-lengthscales are searched within ``[1e-3, 1e3]`` times each input's
    range.  The first start is the range itself (or ``theta0``); the others
    are log-uniform.
    """
    X = np.atleast_2d(np.asarray(X, float))
    y = np.asarray(y, float)
    n, p = X.shape
    if n < 2 or len(y) != n:
        raise ValueError("need at least two observations with matching X and y")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("training data contains non-finite values")
    if len(np.unique(X, axis=0)) < n:
        raise ValueError("duplicate training inputs")
    ranges = input_ranges(X)
    if isotropic:
        scale = np.array([np.sqrt(np.sum(ranges ** 2))])
    else:
        scale = ranges
    lo, hi = np.log(scale * 1e-3), np.log(scale * 1e3)
    center = np.log(scale) if theta0 is None else np.log(np.broadcast_to(theta0, scale.shape))
    starts = _sample_starts(center, lo, hi, n_starts, np.random.default_rng(seed))

    def fun(logt):
        theta = np.exp(logt)
        full = np.broadcast_to(theta, (p,))
        v, g = concentrated_loglik(X, y, full, penalty, kind, nugget, return_grad=True)
        return v, (np.array([g.sum()]) if isotropic else g)

    logt, value = maximize(fun, starts, list(zip(lo, hi)))
    theta = np.broadcast_to(np.exp(logt), (p,))
    C = correlation(kind, scaled_distance(X, X, theta))
    prof = _profile(C, y, nugget, need_grad=False)
    model = condition([Component(np.arange(p), theta, prof.sigma2, kind)], X, y, prof.nugget, prof.beta)
    model.loglik = value
    return model


# ---------------------------------------------------------------------------
# persistence


def model_to_dict(model: GpModel) -> dict:
    return {
        "beta": model.beta,
        "nugget": model.nugget,
        "loglik": None if not np.isfinite(model.loglik) else model.loglik,
        "components": [{"columns": c.columns.tolist(), "lengthscales": c.lengthscales.tolist(),
                        "variance": c.variance, "kind": c.kind} for c in model.components],
        "X": model.X.tolist(),
        "y": model.y.tolist(),
    }


def model_from_dict(data: dict) -> GpModel:
    comps = [Component(c["columns"], c["lengthscales"], c["variance"], c["kind"]) for c in data["components"]]
    total = sum(c.variance for c in comps)
    model = condition(comps, data["X"], data["y"], data["nugget"] / total, data["beta"])
    model.loglik = np.nan if data.get("loglik") is None else data["loglik"]
    return model

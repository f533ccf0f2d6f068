"""Expected improvement and its maximization over several search spaces.

The search variable ``u`` is decoded into model coordinates ``z`` either
linearly (``z = offset + matrix @ u``), which gives analytic gradients, or
through an arbitrary callable (used when searching directly over designs).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize
from scipy.special import erfcx
from scipy.stats import norm

from .gp import GpModel


def _unit_ei(t: np.ndarray) -> np.ndarray:
    """``t Phi(t) + phi(t)``, written to avoid cancellation for very negative ``t``."""
    t = np.asarray(t, float)
    out = t * norm.cdf(t) + norm.pdf(t)
    neg = t < 0
    tn = t[neg]
    out[neg] = norm.pdf(tn) * (1.0 + tn * np.sqrt(np.pi / 2) * erfcx(-tn / np.sqrt(2)))
    return np.maximum(out, 0.0)


def expected_improvement(model: GpModel, Z, f_min: float) -> np.ndarray:
    """EI for minimization at the rows of ``Z``; zero where the sd vanishes and ``m >= f_min``."""
    pred = model.predict(Z)
    m, s = pred.mean, pred.sd
    out = np.maximum(f_min - m, 0.0)
    pos = s > 0
    out[pos] = s[pos] * _unit_ei((f_min - m[pos]) / s[pos])
    return out


def ei_gradient(model: GpModel, z, f_min: float) -> tuple[float, np.ndarray]:
    """EI and its gradient at a single point."""
    m, s, gm, gs = model.predict_gradient(np.asarray(z, float))
    if s <= 0:
        return max(f_min - m, 0.0), (-gm if f_min > m else np.zeros_like(gm))
    t = (f_min - m) / s
    return float(s * _unit_ei(np.array([t]))[0]), -gm * norm.cdf(t) + gs * norm.pdf(t)


@dataclass
class SearchSpace:
    """Box in ``u`` plus a decoder to model coordinates."""

    lower: np.ndarray
    upper: np.ndarray
    matrix: np.ndarray | None = None
    offset: np.ndarray | None = None
    decoder: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        self.lower = np.asarray(self.lower, float)
        self.upper = np.asarray(self.upper, float)
        if self.lower.shape != self.upper.shape or np.any(self.lower > self.upper):
            raise ValueError("search bounds must satisfy lower <= upper")
        if self.matrix is None and self.decoder is None:
            self.matrix = np.eye(len(self.lower))
        if self.matrix is not None and self.offset is None:
            self.offset = np.zeros(self.matrix.shape[0])

    @property
    def linear(self) -> bool:
        return self.decoder is None

    def decode(self, U) -> np.ndarray:
        U = np.atleast_2d(U)
        if self.linear:
            return self.offset + U @ self.matrix.T
        return self.decoder(U)


def full_space(lower, upper) -> SearchSpace:
    return SearchSpace(lower, upper)


def active_space(active, dim: int, lower, upper, fill=None) -> SearchSpace:
    """Search the active coordinates; the rest are held at ``fill`` (zero by default)."""
    active = np.asarray(active, dtype=int)
    P = np.zeros((dim, len(active)))
    P[active, np.arange(len(active))] = 1.0
    offset = np.zeros(dim) if fill is None else np.asarray(fill, float).copy()
    offset[active] = 0.0
    return SearchSpace(np.asarray(lower)[active], np.asarray(upper)[active], P, offset)


def embedded_space(embedding, lower, upper) -> SearchSpace:
    """Active box times the admissible range along the random inactive direction."""
    act = embedding.active
    lo = np.append(np.asarray(lower)[act], embedding.t_bounds[0])
    hi = np.append(np.asarray(upper)[act], embedding.t_bounds[1])
    if embedding.matrix.shape[1] == len(act):
        lo, hi = lo[:-1], hi[:-1]
    return SearchSpace(lo, hi, embedding.matrix)


@dataclass
class EIResult:
    u: np.ndarray
    z: np.ndarray
    ei: float
    degenerate: bool = False


def _evolve(fun, lower, upper, rng, pop: int, gens: int, mutation: float = 0.7, crossover: float = 0.9,
            init=None):
    """Vectorized differential evolution (rand/1/bin); ``fun`` maps a batch to values to maximize.

    Rows of ``init`` replace part of the random initial population.
    """
    dim = len(lower)
    span = upper - lower
    P = lower + span * rng.random((pop, dim))
    if init is not None and len(init):
        init = np.clip(np.atleast_2d(init), lower, upper)
        take = init[rng.permutation(len(init))[:pop // 2]]
        P[:len(take)] = take
    f = fun(P)
    seen_u, seen_f = [P], [f]
    for _ in range(gens):
        idx = np.array([rng.choice(pop, 3, replace=False) for _ in range(pop)])
        trial = P[idx[:, 0]] + mutation * (P[idx[:, 1]] - P[idx[:, 2]])
        cross = rng.random((pop, dim)) < crossover
        cross[np.arange(pop), rng.integers(dim, size=pop)] = True
        trial = np.where(cross, trial, P)
        # reflect back into the box
        trial = np.where(trial < lower, 2 * lower - trial, trial)
        trial = np.where(trial > upper, 2 * upper - trial, trial)
        trial = np.clip(trial, lower, upper)
        ft = fun(trial)
        better = ft >= f
        P[better], f[better] = trial[better], ft[better]
        seen_u.append(trial)
        seen_f.append(ft)
    return np.concatenate(seen_u), np.concatenate(seen_f)


def maximize_ei(model: GpModel, f_min: float, space: SearchSpace, manifold=None, pop: int = 50,
                gens: int = 40, n_polish: int = 5, seed: int = 0, init=None) -> EIResult:
    """Global evolutionary search then local polishing of the best candidates.

    With ``manifold`` (an object with ``is_on_manifold``), EI is zero away
    from the projected database.  Linear spaces are polished by L-BFGS-B
    with analytic gradients, others by Nelder-Mead.  If EI vanishes
    everywhere that was evaluated, the point of largest predictive variance
    is returned with ``degenerate=True``.  ``init`` holds search points
    (typically the training inputs) used to seed up to half the initial
    population.
    """
    rng = np.random.default_rng(seed)
    lower, upper = space.lower, space.upper

    def batch_ei(U):
        Z = space.decode(U)
        ei = expected_improvement(model, Z, f_min)
        if manifold is not None:
            ei = np.where(manifold.is_on_manifold(Z), ei, 0.0)
        return ei

    U, F = _evolve(batch_ei, lower, upper, rng, pop, gens, init=init)
    best = int(np.argmax(F))
    best_u, best_f = U[best], float(F[best])
    if best_f <= 0:
        var = model.predict(space.decode(U)).variance
        if manifold is not None:
            var = np.where(manifold.is_on_manifold(space.decode(U)), var, -1.0)
        j = int(np.argmax(var))
        return EIResult(U[j], space.decode(U[j])[0], 0.0, degenerate=True)

    order = np.argsort(-F, kind="stable")
    starts = []
    for j in order:
        if len(starts) == n_polish:
            break
        if all(np.linalg.norm((U[j] - s) / np.where(upper > lower, upper - lower, 1.0)) > 1e-3 for s in starts):
            starts.append(U[j])
    scale = 1.0 / best_f
    fixed = upper <= lower
    for u0 in starts:
        if space.linear:
            def neg(u):
                z = space.offset + space.matrix @ u
                if manifold is not None and not manifold.is_on_manifold(z):
                    return 0.0, np.zeros_like(u)
                v, g = ei_gradient(model, z, f_min)
                return -v * scale, -(space.matrix.T @ g) * scale
            res = minimize(neg, u0, jac=True, method="L-BFGS-B",
                           bounds=list(zip(lower, upper)), options={"maxiter": 100})
        else:
            def neg(u):
                return -float(batch_ei(np.clip(u, lower, upper)[None])[0]) * scale
            res = minimize(neg, u0, method="Nelder-Mead",
                           options={"maxfev": 40 * len(u0), "xatol": 1e-6, "fatol": 1e-10})
        u = np.clip(res.x, lower, upper)
        u[fixed] = lower[fixed]
        v = float(batch_ei(u[None])[0])
        if v > best_f:
            best_u, best_f = u, v
    return EIResult(best_u, space.decode(best_u)[0], best_f)

"""Choosing which coordinates matter and modelling the rest cheaply.

Active coordinates are found from a penalized anisotropic fit: a coordinate
is active when its lengthscale, measured in units of that coordinate's
range, is within a factor of the smallest one.  The additive model then
pairs a full anisotropic kernel on the active coordinates with a single
isotropic kernel on all the others.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .gp import (NUGGET_START, Component, GpModel, _lengthscale_grad, _profile, _sample_starts, _slope,
                 condition, correlation, fit_gp, input_ranges, maximize, scaled_distance)


@dataclass
class Selection:
    """Outcome of active-coordinate selection."""

    active: np.ndarray
    theta: np.ndarray
    ranges: np.ndarray
    penalty: float
    degenerate: bool = False

    @property
    def normalized(self) -> np.ndarray:
        return self.theta / self.ranges

    @property
    def inactive(self) -> np.ndarray:
        return np.setdiff1d(np.arange(len(self.theta)), self.active)

    def to_csv(self, path) -> None:
        """CSV ``j,theta_j,range_j,normalized_theta_j,active`` (1-based ``j``)."""
        act = set(self.active.tolist())
        with open(path, "w") as fh:
            fh.write("j,theta_j,range_j,normalized_theta_j,active\n")
            for j, (t, r) in enumerate(zip(self.theta, self.ranges)):
                fh.write(f"{j + 1},{t:.17g},{r:.17g},{t / r:.17g},{int(j in act)}\n")


def select_active(X, y, penalty: float | None = None, ratio: float = 10.0, kind: str = "matern52",
                  n_starts: int = 5, seed: int = 0, min_per_dim: int = 5, ranges=None) -> Selection:
    """Coordinates whose range-normalized lengthscale is within ``ratio`` of the smallest.

    The anisotropic fit subtracts ``penalty * sum(1/theta)`` from the
    log-likelihood, pushing uninformative lengthscales to their upper
    bound; the default penalty is ``n / p``.  If every coordinate qualifies
    the set is cut to the ``max(1, n // min_per_dim)`` smallest.  Lengthscales
    are normalized by ``ranges``, by default the observed range of each column;
    pass the domain widths to normalize by the search box instead.
    """
    X = np.atleast_2d(np.asarray(X, float))
    y = np.asarray(y, float)
    n, p = X.shape
    ranges = input_ranges(X) if ranges is None else np.asarray(ranges, float)
    if ranges.shape != (p,) or np.any(ranges <= 0):
        raise ValueError(f"ranges must be {p} positive widths")
    if penalty is None:
        penalty = n / p
    if np.ptp(y) == 0:
        warnings.warn("constant responses; keeping the widest-ranged coordinate only", RuntimeWarning)
        j = int(np.argmax(np.ptp(X, axis=0)))
        return Selection(np.array([j]), ranges.copy(), ranges, penalty, degenerate=True)
    model = fit_gp(X, y, kind=kind, penalty=penalty, n_starts=n_starts, seed=seed)
    theta = model.components[0].lengthscales
    norm = theta / ranges
    active = np.flatnonzero(norm <= ratio * norm.min())
    if len(active) == p:
        cap = min(p, max(1, n // min_per_dim))
        active = np.sort(np.argsort(norm, kind="stable")[:cap])
    return Selection(active, theta, ranges, penalty)


@dataclass
class AdditiveFit:
    model: GpModel
    active: np.ndarray
    share: float  # variance share of the inactive component, in [0, 1]


def fit_additive(X, y, active, kind: str = "matern52", n_starts: int = 5, seed: int = 0,
                 nugget: float = NUGGET_START) -> AdditiveFit:
    """Anisotropic kernel on ``active`` plus an isotropic kernel on the rest.

    The covariance is ``s2 * ((1 - eta) R_active + eta R_rest)``; ``s2`` is
    profiled, while the active lengthscales, the shared inactive
    lengthscale and ``eta`` are optimized jointly.
    """
    X = np.atleast_2d(np.asarray(X, float))
    y = np.asarray(y, float)
    n, p = X.shape
    active = np.unique(np.asarray(active, dtype=int))
    rest = np.setdiff1d(np.arange(p), active)
    if len(active) == 0:
        raise ValueError("the active set is empty")
    if len(rest) == 0:
        model = fit_gp(X, y, kind=kind, n_starts=n_starts, seed=seed, nugget=nugget)
        model.components[0].columns = active
        return AdditiveFit(model, active, 0.0)
    if len(np.unique(X, axis=0)) < n:
        raise ValueError("duplicate training inputs")
    Xa, Xr = X[:, active], X[:, rest]
    ra = input_ranges(Xa)
    rr = np.array([np.sqrt(np.sum(input_ranges(Xr) ** 2))])
    scale = np.concatenate([ra, rr])
    lo = np.concatenate([np.log(scale * 1e-3), [0.0]])
    hi = np.concatenate([np.log(scale * 1e3), [1.0]])
    center = np.concatenate([np.log(scale), [0.5]])
    starts = _sample_starts(center, lo, hi, n_starts, np.random.default_rng(seed))
    k = len(active)

    def parts(params):
        ta, tr, eta = np.exp(params[:k]), np.exp(params[k]), params[k + 1]
        da, dr = scaled_distance(Xa, Xa, ta), scaled_distance(Xr, Xr, np.full(len(rest), tr))
        return ta, tr, eta, da, dr, correlation(kind, da), correlation(kind, dr)

    def fun(params):
        ta, tr, eta, da, dr, Ra, Rr = parts(params)
        prof = _profile((1 - eta) * Ra + eta * Rr, y, nugget)
        ga = (1 - eta) * _lengthscale_grad(prof.Q * _slope(kind, da), Xa, ta)
        gr = eta * np.sum(prof.Q * _slope(kind, dr) * dr * dr)
        ge = np.sum(prof.Q * (Rr - Ra))
        return prof.value, np.concatenate([ga, [gr, ge]])

    best, value = maximize(fun, starts, list(zip(lo, hi)))
    ta, tr, eta, _, _, Ra, Rr = parts(best)
    prof = _profile((1 - eta) * Ra + eta * Rr, y, nugget, need_grad=False)
    comps = [Component(active, ta, prof.sigma2 * (1 - eta), kind),
             Component(rest, np.full(len(rest), tr), prof.sigma2 * eta, kind)]
    comps = [c for c in comps if c.variance > 0] or comps[:1]
    model = condition(comps, X, y, prof.nugget, prof.beta)
    model.loglik = value
    return AdditiveFit(model, active, float(eta))


@dataclass
class Embedding:
    """Search space of active coordinates plus one random inactive direction.

    ``matrix`` maps ``(alpha_active, t)`` to full coordinates: identity on the
    active rows and ``t * direction`` on the inactive rows.
    """

    active: np.ndarray
    inactive: np.ndarray
    direction: np.ndarray
    matrix: np.ndarray
    t_bounds: tuple[float, float]


def draw_embedding(active, dim: int, lower, upper, seed: int = 0, sample=None) -> Embedding:
    """Random unit direction in the inactive coordinates and its admissible range.

    The range of ``t`` is the span of the projections of ``sample`` (or of
    the box corners) onto the direction, intersected with the box
    constraints ``lower_j <= t * direction_j <= upper_j``.  An empty
    intersection collapses to ``[0, 0]``.
    """
    active = np.unique(np.asarray(active, dtype=int))
    inactive = np.setdiff1d(np.arange(dim), active)
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    rng = np.random.default_rng(seed)
    k = len(active)
    A = np.zeros((dim, k + 1))
    A[active, np.arange(k)] = 1.0
    if len(inactive) == 0:
        return Embedding(active, inactive, np.zeros(0), A[:, :k], (0.0, 0.0))
    u = rng.standard_normal(len(inactive))
    u /= np.linalg.norm(u)
    A[inactive, k] = u
    lo_i, hi_i = lower[inactive], upper[inactive]
    if sample is not None:
        proj = np.asarray(sample, float)[:, inactive] @ u
        t_lo, t_hi = proj.min(), proj.max()
    else:
        corner_lo = np.where(u > 0, lo_i, hi_i) @ u
        corner_hi = np.where(u > 0, hi_i, lo_i) @ u
        t_lo, t_hi = corner_lo, corner_hi
    with np.errstate(divide="ignore"):
        a = np.where(u > 0, lo_i / u, np.where(u < 0, hi_i / u, -np.inf))
        b = np.where(u > 0, hi_i / u, np.where(u < 0, lo_i / u, np.inf))
    t_lo, t_hi = max(t_lo, a.max()), min(t_hi, b.min())
    if t_lo > t_hi:
        t_lo = t_hi = 0.0
    return Embedding(active, inactive, u, A, (float(t_lo), float(t_hi)))


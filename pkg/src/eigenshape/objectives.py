"""Benchmark objectives, all to be minimized, and the problems that bundle them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .shapes import CatenoidFamily, Family, RectangleFamily, RedundantCircleFamily, get_family


def disk_objective(X) -> np.ndarray:
    """``r - pi r^2 - ||(s, t) - (3, 2)||`` for the 39-parameter circle."""
    s, t, r = RedundantCircleFamily.center_radius(np.asarray(X, float))
    return r - np.pi * r ** 2 - np.hypot(s - 3.0, t - 2.0)


# heart-like target: notch at the top, point at the bottom, lobes on the sides
_HEART_PERT = np.concatenate([
    0.1 * (1 - np.abs(np.arange(1, 10) - 5) / 5),            # bottom: outward point
    0.06 * np.sin(np.pi * np.arange(1, 10) / 10) ** 2 * np.linspace(0.2, 1, 9),   # right lobe, rising
    -0.1 * np.maximum(0, 1 - np.abs(np.arange(1, 10) - 5) / 3),  # top: inward notch
    0.06 * np.sin(np.pi * np.arange(1, 10) / 10) ** 2 * np.linspace(1, 0.2, 9),   # left lobe
])
HEART_TARGET = np.concatenate([[2.5, 2.5, 2.0, 2.0], _HEART_PERT])


def shape_match_objective(X, target=HEART_TARGET, family: RectangleFamily | None = None) -> np.ndarray:
    """Sum of squared node distances to ``target`` after moving corner ``A`` onto the target's."""
    fam = family or RectangleFamily()
    X = np.atleast_2d(np.asarray(X, float)).copy()
    X[:, :2] = np.asarray(target)[:2]
    diff = fam.vertices(X) - fam.vertices(np.asarray(target)[None])
    return np.sum(diff ** 2, axis=(1, 2))


def revolution_area(X, family: CatenoidFamily | None = None) -> np.ndarray:
    """Area of the surface swept by the curve rotating around the horizontal axis.

    The curve is piecewise linear, so summing frustum areas is exact.
    """
    fam = family or CatenoidFamily()
    V = fam.vertices(X)
    r = np.abs(V[..., 1])
    slant = np.linalg.norm(np.diff(V, axis=1), axis=2)
    return np.pi * np.sum((r[:, 1:] + r[:, :-1]) * slant, axis=1)


GRIEWANK_OFFSETS = np.array([-140.0, -100.0, -60.0, -20.0, 20.0, 60.0, 100.0, 140.0])


def griewank_modified(X) -> np.ndarray:
    """2-D Griewank on the first two inputs plus a faint quadratic on the next eight.

    Defined on ``[-600, 600]^40``; the remaining 30 inputs are ignored.
    """
    X = np.atleast_2d(np.asarray(X, float))
    if X.shape[1] != 40:
        raise ValueError("expects 40 inputs")
    x1, x2 = X[:, 0], X[:, 1]
    grie = 1.0 + (x1 ** 2 + x2 ** 2) / 4000.0 - np.cos(x1) * np.cos(x2 / np.sqrt(2.0))
    return grie + np.sum((X[:, 2:10] - GRIEWANK_OFFSETS) ** 2, axis=1) / 400000.0


@dataclass
class Problem:
    """Objective plus the design space it is searched over.

    ``family`` is ``None`` when designs are not shapes; such problems can
    only be searched in design coordinates.
    """

    name: str
    objective: Callable[[np.ndarray], np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    family: Family | None = None

    @property
    def d(self) -> int:
        return len(self.lower)

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        if X.shape[1] != self.d:
            raise ValueError(f"{self.name} expects {self.d} inputs, got {X.shape[1]}")
        slack = 1e-9 * (self.upper - self.lower)
        if np.any(X < self.lower - slack) or np.any(X > self.upper + slack):
            raise ValueError(f"design outside the domain of {self.name}")
        return self.objective(X)


ALIASES = {"disk": "f2", "heart": "f4", "catenoid": "f5", "griewank": "griewank40", "fmg": "griewank40"}


def get_problem(name: str) -> Problem:
    name = ALIASES.get(name, name)
    if name == "f2":
        fam = get_family("circle39")
        return Problem(name, disk_objective, fam.lower, fam.upper, fam)
    if name == "f4":
        fam = get_family("rectangle")
        return Problem(name, lambda X: shape_match_objective(X, family=fam), fam.lower, fam.upper, fam)
    if name == "f5":
        fam = get_family("catenoid")
        return Problem(name, lambda X: revolution_area(X, fam), fam.lower, fam.upper, fam)
    if name == "griewank40":
        return Problem(name, griewank_modified, np.full(40, -600.0), np.full(40, 600.0))
    raise ValueError(f"unknown problem {name!r}; choose from {', '.join(PROBLEMS)}")


PROBLEMS = ("f2", "f4", "f5", "griewank40")

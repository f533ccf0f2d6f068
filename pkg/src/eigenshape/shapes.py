"""Parametric shape families and their vector representations.

Every family turns a design vector ``x`` into a planar contour (one or more
closed polygons, or a single open curve).  A contour is then mapped to a
fixed-length vector ``phi`` by one of three mappings:

* ``characteristic``: indicator of the interior sampled on a regular grid,
* ``signed_distance``: distance to the contour on the same grid, positive
  inside,
* ``contour``: the contour resampled at ``M`` points (a point distribution
  model), flattened as ``(x_1, y_1, ..., x_M, y_M)``.

The contour mapping is consistent: every vertex a family emits carries a
design-independent curve parameter, and resampling is linear interpolation
in that parameter.  Shapes built from the same family therefore share a
point-to-point correspondence, and for families whose vertices are affine in
``x`` the resulting ``phi`` is affine in ``x`` too.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np


class Mapping(str, Enum):
    CHARACTERISTIC = "characteristic"
    SIGNED_DISTANCE = "signed_distance"
    CONTOUR = "contour"


@dataclass(frozen=True)
class GridSpec:
    """Regular ``nx`` by ``ny`` grid over ``[xmin, xmax] x [ymin, ymax]``."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float
    nx: int = 64
    ny: int = 64

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 nodes per axis")
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("grid bounds must be increasing")

    def points(self) -> np.ndarray:
        """Grid nodes as an ``(nx*ny, 2)`` array, x varying fastest."""
        gx = np.linspace(self.xmin, self.xmax, self.nx)
        gy = np.linspace(self.ymin, self.ymax, self.ny)
        xx, yy = np.meshgrid(gx, gy)
        return np.column_stack([xx.ravel(), yy.ravel()])

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("xmin", "xmax", "ymin", "ymax", "nx", "ny")}


@dataclass(frozen=True)
class MappingSpec:
    """Which mapping to apply and at what resolution."""

    kind: Mapping = Mapping.CONTOUR
    num_points: int | None = None
    grid: GridSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Mapping(self.kind))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "num_points": self.num_points,
            "grid": None if self.grid is None else self.grid.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MappingSpec":
        grid = data.get("grid")
        return cls(Mapping(data["kind"]), data.get("num_points"),
                   None if grid is None else GridSpec(**grid))


@dataclass(frozen=True)
class ContourShape:
    """Discretized contour.

    Parameters
    ----------
    points : (k, 2) array
        Vertices, ordered along each component.
    closed : bool
        Closed polygons or a single open curve.
    params : (k,) array, optional
        Curve parameter of each vertex in ``[0, 1)`` (closed) or ``[0, 1]``
        (open), increasing within a component.  When absent, normalized
        arclength is used.
    parts : (k,) int array, optional
        Component index of each vertex; components are contiguous.
    """

    points: np.ndarray
    closed: bool = True
    params: np.ndarray | None = None
    parts: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must have shape (k, 2)")
        if not np.all(np.isfinite(pts)):
            raise ValueError("contour has non-finite vertices")
        object.__setattr__(self, "points", pts)
        parts = np.zeros(len(pts), dtype=int) if self.parts is None else np.asarray(self.parts, dtype=int)
        object.__setattr__(self, "parts", parts)
        if self.params is not None:
            object.__setattr__(self, "params", np.asarray(self.params, dtype=float))
        minimum = 3 if self.closed else 2
        for p in np.unique(parts):
            if np.count_nonzero(parts == p) < minimum:
                raise ValueError(f"each component needs at least {minimum} vertices")
        if not self.closed and len(np.unique(parts)) != 1:
            raise ValueError("an open contour has a single component")

    def components(self):
        """Yield ``(points, params)`` per component."""
        for p in np.unique(self.parts):
            mask = self.parts == p
            yield self.points[mask], None if self.params is None else self.params[mask]


@dataclass(frozen=True)
class ShapeRepresentation:
    phi: np.ndarray
    mapping: MappingSpec


# ---------------------------------------------------------------------------
# resampling


def _arclength_params(points: np.ndarray, closed: bool) -> np.ndarray:
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    if closed:
        seg = np.append(seg, np.linalg.norm(points[0] - points[-1]))
    total = seg.sum()
    if total <= 0:
        raise ValueError("degenerate contour of zero length")
    s = np.concatenate([[0.0], np.cumsum(seg)[:-1] if closed else np.cumsum(seg)])
    return s / total


def _interp_matrix(params: np.ndarray, targets: np.ndarray, closed: bool) -> np.ndarray:
    """Linear-interpolation weights mapping vertices to samples at ``targets``."""
    k = len(params)
    if closed:
        knots = np.append(params, 1.0)
    else:
        knots = params
    idx = np.clip(np.searchsorted(knots, targets, side="right") - 1, 0, len(knots) - 2)
    left, right = knots[idx], knots[idx + 1]
    width = right - left
    w = np.where(width > 0, (targets - left) / np.where(width > 0, width, 1.0), 0.0)
    W = np.zeros((len(targets), k))
    rows = np.arange(len(targets))
    W[rows, idx] += 1.0 - w
    W[rows, (idx + 1) % k] += w
    return W


def resample_matrix(params: np.ndarray, parts: np.ndarray, closed: bool, num_points: int) -> np.ndarray:
    """Block matrix ``W`` such that ``W @ vertices`` is the resampled contour.

    Each of the ``c`` components receives ``num_points / c`` samples at
    equispaced parameter values (endpoints included for an open curve).
    """
    labels = np.unique(parts)
    if num_points % len(labels):
        raise ValueError("num_points must be divisible by the number of components")
    per = num_points // len(labels)
    if per < (3 if closed else 2):
        raise ValueError("too few contour points")
    targets = np.arange(per) / per if closed else np.linspace(0.0, 1.0, per)
    W = np.zeros((num_points, len(parts)))
    for i, lab in enumerate(labels):
        cols = np.flatnonzero(parts == lab)
        W[i * per:(i + 1) * per, cols] = _interp_matrix(params[cols], targets, closed)
    return W


# ---------------------------------------------------------------------------
# mappings


def map_contour(shape: ContourShape, num_points: int) -> ShapeRepresentation:
    """Resample ``shape`` at ``num_points`` points and flatten."""
    out = []
    labels = np.unique(shape.parts)
    if num_points % len(labels):
        raise ValueError("num_points must be divisible by the number of components")
    per = num_points // len(labels)
    for pts, params in shape.components():
        if params is None:
            params = _arclength_params(pts, shape.closed)
        W = resample_matrix(params, np.zeros(len(pts), dtype=int), shape.closed, per)
        out.append(W @ pts)
    phi = np.concatenate(out).ravel()
    return ShapeRepresentation(phi, MappingSpec(Mapping.CONTOUR, num_points=num_points))


def _inside(shape: ContourShape, pts: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Even-odd point-in-polygon test over all components."""
    if not shape.closed:
        raise ValueError("interior is undefined for an open curve")
    odd = np.zeros(len(pts), dtype=bool)
    for comp, _ in shape.components():
        b = np.roll(comp, -1, axis=0)
        xi, yi, xj, yj = comp[:, 0], comp[:, 1], b[:, 0], b[:, 1]
        dy = np.where(yj != yi, yj - yi, 1.0)
        slope = (xj - xi) / dy
        for start in range(0, len(pts), chunk):
            px, py = pts[start:start + chunk, :1], pts[start:start + chunk, 1:]
            straddle = (yi > py) != (yj > py)
            hits = straddle & (px < xi + (py - yi) * slope)
            odd[start:start + chunk] ^= (np.count_nonzero(hits, axis=1) % 2).astype(bool)
    return odd


def _distance_to_edges(shape: ContourShape, pts: np.ndarray, chunk: int = 256) -> np.ndarray:
    segs = []
    for comp, _ in shape.components():
        b = np.roll(comp, -1, axis=0) if shape.closed else comp[1:]
        a = comp if shape.closed else comp[:-1]
        segs.append((a, b))
    a = np.concatenate([s[0] for s in segs])
    b = np.concatenate([s[1] for s in segs])
    ab = b - a
    ab2 = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
    out = np.empty(len(pts))
    for start in range(0, len(pts), chunk):
        p = pts[start:start + chunk, None, :]
        t = np.clip(np.einsum("pkj,kj->pk", p - a, ab) / ab2, 0.0, 1.0)
        d = p - (a + t[..., None] * ab)
        out[start:start + chunk] = np.sqrt(np.min(np.einsum("pkj,pkj->pk", d, d), axis=1))
    return out


def map_characteristic(shape: ContourShape, grid: GridSpec) -> ShapeRepresentation:
    """Indicator of the shape interior (even-odd rule) at each grid node."""
    phi = _inside(shape, grid.points()).astype(float)
    return ShapeRepresentation(phi, MappingSpec(Mapping.CHARACTERISTIC, grid=grid))


def map_signed_distance(shape: ContourShape, grid: GridSpec) -> ShapeRepresentation:
    """Distance to the contour at each grid node, positive inside."""
    pts = grid.points()
    dist = _distance_to_edges(shape, pts)
    phi = np.where(_inside(shape, pts), dist, -dist)
    return ShapeRepresentation(phi, MappingSpec(Mapping.SIGNED_DISTANCE, grid=grid))


def apply_mapping(shape: ContourShape, spec: MappingSpec) -> ShapeRepresentation:
    if spec.kind is Mapping.CONTOUR:
        return map_contour(shape, spec.num_points)
    if spec.grid is None:
        raise ValueError("grid mappings need a GridSpec")
    if spec.kind is Mapping.CHARACTERISTIC:
        return map_characteristic(shape, spec.grid)
    return map_signed_distance(shape, spec.grid)


# ---------------------------------------------------------------------------
# families


@dataclass
class Family:
    """A parametric shape generator.

    Subclasses implement ``_vertices`` (batched, ``(m, d) -> (m, K, 2)``) and
    set the vertex template ``params`` / ``parts``.
    """

    name: str
    lower: np.ndarray
    upper: np.ndarray
    closed: bool
    num_points: int
    box: tuple[float, float, float, float]
    params: np.ndarray = field(repr=False)
    parts: np.ndarray = field(repr=False)

    @property
    def d(self) -> int:
        return len(self.lower)

    def _vertices(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _as_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        X2 = np.atleast_2d(X)
        if X2.ndim != 2 or X2.shape[1] != self.d:
            raise ValueError(f"{self.name} expects designs of dimension {self.d}, got {X.shape}")
        if not np.all(np.isfinite(X2)):
            raise ValueError("design has non-finite entries")
        return X2

    def vertices(self, X) -> np.ndarray:
        return self._vertices(self._as_batch(X))

    def shape(self, x) -> ContourShape:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise ValueError("shape() takes a single design vector")
        return ContourShape(self.vertices(x)[0], self.closed, self.params, self.parts)

    def default_mapping(self, kind: Mapping | str = Mapping.CONTOUR) -> MappingSpec:
        kind = Mapping(kind)
        if kind is Mapping.CONTOUR:
            return MappingSpec(kind, num_points=self.num_points)
        return MappingSpec(kind, grid=self.default_grid())

    def default_grid(self, n: int = 64, margin: float = 0.1) -> GridSpec:
        x0, x1, y0, y1 = self.box
        mx, my = margin * (x1 - x0), margin * (y1 - y0)
        return GridSpec(x0 - mx, x1 + mx, y0 - my, y1 + my, n, n)

    def contour_matrix(self, num_points: int) -> np.ndarray:
        return resample_matrix(self.params, self.parts, self.closed, num_points)

    def phi(self, X, mapping: MappingSpec | None = None) -> np.ndarray:
        """Representations of a batch of designs, shape ``(m, D)``."""
        mapping = mapping or self.default_mapping()
        if mapping.kind is not Mapping.CONTOUR:
            exact = self._grid_phi(self._as_batch(X), mapping)
            if exact is not None:
                return exact
        V = self.vertices(X)
        if mapping.kind is Mapping.CONTOUR:
            W = self.contour_matrix(mapping.num_points)
            return np.einsum("pk,mkj->mpj", W, V).reshape(len(V), -1)
        return np.array([
            apply_mapping(ContourShape(v, self.closed, self.params, self.parts), mapping).phi for v in V
        ])

    def _grid_phi(self, X: np.ndarray, mapping: MappingSpec) -> np.ndarray | None:
        """Closed-form grid mapping, when the family has one."""
        return None

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform designs within the bounds."""
        return self.lower + (self.upper - self.lower) * rng.random((n, self.d))


def _circle_points(center: np.ndarray, radius: np.ndarray, k: int) -> np.ndarray:
    """``(m, k, 2)`` vertices of circles, counter-clockwise from angle 0."""
    theta = 2 * np.pi * np.arange(k) / k
    ring = np.column_stack([np.cos(theta), np.sin(theta)])
    if np.any(radius <= 0):
        raise ValueError("circle radius must be positive")
    return center[:, None, :] + radius[:, None, None] * ring[None]


def circles_on_grid(centers: np.ndarray, radii: np.ndarray, grid: GridSpec, kind: Mapping) -> np.ndarray:
    """Exact grid mappings of unions of disjoint circles.

    ``centers`` is ``(m, c, 2)`` and ``radii`` ``(m, c)``; returns ``(m, nx*ny)``.
    """
    pts = grid.points()
    dist = np.linalg.norm(pts[None, None] - centers[:, :, None, :], axis=3)  # (m, c, G)
    inside = np.any(dist <= radii[..., None], axis=1)
    if kind is Mapping.CHARACTERISTIC:
        return inside.astype(float)
    gap = np.min(np.abs(dist - radii[..., None]), axis=1)
    return np.where(inside, gap, -gap)


def circle_contour(center, radius: float, resolution: int = 800) -> ContourShape:
    """Single circle as a ``ContourShape`` with angle-based parameters."""
    pts = _circle_points(np.asarray(center, float)[None], np.array([radius], float), resolution)[0]
    return ContourShape(pts, True, np.arange(resolution) / resolution)


class CircleFamily(Family):
    """A circle parameterized by ``(r)``, ``(cx, r)`` or ``(cx, cy, r)``."""

    def __init__(self, d: int = 3, resolution: int = 800, num_points: int = 200):
        if d not in (1, 2, 3):
            raise ValueError("circle family has 1, 2 or 3 parameters")
        lo = np.array([-1.0, -1.0, 0.5])[3 - d:]
        hi = np.array([1.0, 1.0, 2.0])[3 - d:]
        super().__init__(f"circle{d}d", lo, hi, True, num_points, (-3.0, 3.0, -3.0, 3.0),
                         np.arange(resolution) / resolution, np.zeros(resolution, dtype=int))
        self.resolution = resolution

    def _centers(self, X):
        m, d = X.shape
        c = np.zeros((m, 2))
        c[:, :d - 1] = X[:, :d - 1]
        return c

    def _vertices(self, X):
        return _circle_points(self._centers(X), X[:, -1], self.resolution)

    def _grid_phi(self, X, mapping):
        if np.any(X[:, -1] <= 0):
            raise ValueError("circle radius must be positive")
        return circles_on_grid(self._centers(X)[:, None], X[:, -1:], mapping.grid, mapping.kind)


class RedundantCircleFamily(Family):
    """A circle driven by 39 parameters.

    Center and radius are the sums ``s = x[0:13]``, ``t = x[13:26]`` and
    ``r = x[26:39]``, so only three directions of the design space matter.
    """

    def __init__(self, resolution: int = 800, num_points: int = 200):
        lo = np.concatenate([[0.0], np.full(12, -0.1), [0.0], np.full(12, -0.1), [1.0], np.full(12, -0.05)])
        hi = np.concatenate([[5.0], np.full(12, 0.1), [4.0], np.full(12, 0.1), [2.0], np.full(12, 0.05)])
        super().__init__("circle39", lo, hi, True, num_points, (-3.0, 9.5, -3.5, 8.5),
                         np.arange(resolution) / resolution, np.zeros(resolution, dtype=int))
        self.resolution = resolution

    @staticmethod
    def center_radius(X):
        X = np.atleast_2d(X)
        return X[:, 0:13].sum(1), X[:, 13:26].sum(1), X[:, 26:39].sum(1)

    def _vertices(self, X):
        s, t, r = self.center_radius(X)
        return _circle_points(np.column_stack([s, t]), r, self.resolution)

    def _grid_phi(self, X, mapping):
        s, t, r = self.center_radius(X)
        if np.any(r <= 0):
            raise ValueError("circle radius must be positive")
        return circles_on_grid(np.column_stack([s, t])[:, None], r[:, None], mapping.grid, mapping.kind)


class ThreeCirclesFamily(Family):
    """Three disjoint circles, each with its own center offset and radius.

    ``x = (dx1, dy1, r1, dx2, dy2, r2, dx3, dy3, r3)``; circle ``k`` is centered
    at ``nominal_k + (dx_k, dy_k)`` with nominal centers ``(-3, 0)``, ``(0, 0)``
    and ``(3, 0)``.  The bounds keep the circles apart.
    """

    nominal = np.array([[-3.0, 0.0], [0.0, 0.0], [3.0, 0.0]])

    def __init__(self, resolution: int = 300, num_points: int = 210):
        lo = np.tile([-0.5, -0.5, 0.3], 3)
        hi = np.tile([0.5, 0.5, 0.9], 3)
        params = np.tile(np.arange(resolution) / resolution, 3)
        parts = np.repeat(np.arange(3), resolution)
        super().__init__("three_circles", lo, hi, True, num_points, (-4.5, 4.5, -1.5, 1.5), params, parts)
        self.resolution = resolution

    def _circles(self, X):
        blocks = X.reshape(len(X), 3, 3)
        centers = self.nominal[None] + blocks[:, :, :2]
        radii = blocks[:, :, 2]
        if np.any(radii <= 0):
            raise ValueError("circle radius must be positive")
        gap = np.linalg.norm(centers[:, 1:] - centers[:, :-1], axis=2) - radii[:, 1:] - radii[:, :-1]
        if np.any(gap <= 0):
            raise ValueError("circles overlap")
        return centers, radii

    def _grid_phi(self, X, mapping):
        centers, radii = self._circles(X)
        return circles_on_grid(centers, radii, mapping.grid, mapping.kind)

    def _vertices(self, X):
        centers, radii = self._circles(X)
        return np.concatenate([_circle_points(centers[:, k], radii[:, k], self.resolution) for k in range(3)],
                              axis=1)


class RectangleFamily(Family):
    """Rectangle with 36 outward-normal node perturbations.

    ``x[0:2]`` is the lower-left corner ``A``, ``x[2]`` the width, ``x[3]`` the
    height.  ``x[4:40]`` displace the nodes at fractions ``k/10``
    (``k = 1..9``) of each side along the outward normal, sides taken
    counter-clockwise from ``A``.  The polygon has 40 vertices (4 corners
    and 36 nodes).
    """

    normals = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    directions = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])

    def __init__(self, num_points: int = 200, perturbation: float = 0.1):
        lo = np.concatenate([[-1.0, -1.0, 1.0, 1.0], np.full(36, -perturbation)])
        hi = np.concatenate([[1.0, 1.0, 3.0, 3.0], np.full(36, perturbation)])
        side = np.repeat(np.arange(4), 10)
        step = np.tile(np.arange(10), 4)
        super().__init__("rectangle", lo, hi, True, num_points, (-1.5, 4.5, -1.5, 4.5),
                         (side + step / 10.0) / 4.0, np.zeros(40, dtype=int))

    def _vertices(self, X):
        m = len(X)
        w, h = X[:, 2], X[:, 3]
        if np.any(w <= 0) or np.any(h <= 0):
            raise ValueError("rectangle width and height must be positive")
        lengths = np.stack([w, h, w, h], axis=1)
        corners = np.zeros((m, 4, 2))
        corners[:, 0] = X[:, :2]
        for s in range(3):
            corners[:, s + 1] = corners[:, s] + lengths[:, s, None] * self.directions[s]
        frac = np.arange(10) / 10.0
        pert = np.concatenate([np.zeros((m, 4, 1)), X[:, 4:].reshape(m, 4, 9)], axis=2)
        V = (corners[:, :, None, :]
             + frac[None, None, :, None] * lengths[:, :, None, None] * self.directions[None, :, None, :]
             + pert[..., None] * self.normals[None, :, None, :])
        return V.reshape(m, 40, 2)


class CatenoidFamily(Family):
    """Open curve from ``A = (0, y_a)`` to ``B = (1, y_b)``.

    The curve is the segment ``AB`` plus vertical offsets ``x[j-1]`` at the
    29 interior stations ``u_j = j/30``, linearly interpolated.  Rotating the
    curve around the horizontal axis gives a surface of revolution.
    """

    n_stations = 29

    def __init__(self, y_a: float = 4.15, y_b: float = 4.15, half_width: float = 0.5,
                 num_points: int = 100, prior_sd: float = 0.2, prior_lengthscale: float = 1.0 / 6.0):
        n = self.n_stations
        u = np.arange(n + 2) / (n + 1)
        lo, hi = np.full(n, -half_width), np.full(n, half_width)
        top = max(y_a, y_b) + half_width
        super().__init__("catenoid", lo, hi, False, num_points, (0.0, 1.0, -top, top),
                         u, np.zeros(n + 2, dtype=int))
        self.y_a, self.y_b, self.half_width = y_a, y_b, half_width
        self.prior_sd, self.prior_lengthscale = prior_sd, prior_lengthscale

    def _vertices(self, X):
        m = len(X)
        u = self.params
        base = self.y_a + (self.y_b - self.y_a) * u
        offs = np.zeros((m, len(u)))
        offs[:, 1:-1] = X
        return np.stack([np.broadcast_to(u, (m, len(u))), base + offs], axis=2)

    def prior_covariance(self) -> np.ndarray:
        """Squared-exponential covariance at the interior stations, pinned to zero at both ends."""
        u = self.params
        K = np.exp(-0.5 * ((u[:, None] - u[None, :]) / self.prior_lengthscale) ** 2)
        inner, ends = slice(1, -1), [0, len(u) - 1]
        Kii = K[inner, inner]
        Kie = K[inner][:, ends]
        Kee = K[np.ix_(ends, ends)]
        return self.prior_sd ** 2 * (Kii - Kie @ np.linalg.solve(Kee, Kie.T))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Gaussian-process curves kept only when they stay inside the band."""
        C = self.prior_covariance()
        L = np.linalg.cholesky(C + 1e-10 * np.trace(C) / len(C) * np.eye(len(C)))
        out = []
        count = 0
        while count < n:
            Z = rng.standard_normal((max(2 * (n - count), 16), len(C))) @ L.T
            Z = Z[np.max(np.abs(Z), axis=1) <= self.half_width]
            out.append(Z)
            count += len(Z)
        return np.concatenate(out)[:n]


def naca_vertices(m_camber, p_camber, thickness, half: int) -> tuple[np.ndarray, np.ndarray]:
    """Batched NACA 4-digit contour with a closed trailing edge.

    Returns ``(V, xc)`` with ``V`` of shape ``(m, 2*half, 2)`` ordered from the
    leading edge along the lower surface to the trailing edge and back along
    the upper surface, and ``xc`` the chordwise station of every vertex.
    """
    m_camber, p_camber, thickness = (np.atleast_1d(np.asarray(v, float))[:, None]
                                     for v in (m_camber, p_camber, thickness))
    beta = np.pi * np.arange(half + 1) / half
    xc = 0.5 * (1.0 - np.cos(beta))[None, :]
    yt = 5 * thickness * (0.2969 * np.sqrt(xc) - 0.1260 * xc - 0.3516 * xc ** 2
                          + 0.2843 * xc ** 3 - 0.1036 * xc ** 4)
    fore = xc < p_camber
    pp = np.clip(p_camber, 1e-12, 1 - 1e-12)
    yc = np.where(fore, m_camber / pp ** 2 * (2 * pp * xc - xc ** 2),
                  m_camber / (1 - pp) ** 2 * ((1 - 2 * pp) + 2 * pp * xc - xc ** 2))
    dyc = np.where(fore, 2 * m_camber / pp ** 2 * (pp - xc), 2 * m_camber / (1 - pp) ** 2 * (pp - xc))
    th = np.arctan(dyc)
    lower = np.stack([xc + yt * np.sin(th), yc - yt * np.cos(th)], axis=2)
    upper = np.stack([xc - yt * np.sin(th), yc + yt * np.cos(th)], axis=2)
    V = np.concatenate([lower, upper[:, -2:0:-1]], axis=1)
    stations = np.concatenate([xc[0], xc[0, -2:0:-1]])
    return V, stations


class NacaFamily(Family):
    """NACA 4-digit airfoils, ``x = (max camber, camber position, thickness)``."""

    def __init__(self, num_points: int = 200):
        half = num_points // 2
        lo = np.array([0.0, 0.2, 0.05])
        hi = np.array([0.1, 0.6, 0.25])
        super().__init__("naca3", lo, hi, True, num_points, (0.0, 1.0, -0.2, 0.25),
                         np.arange(2 * half) / (2 * half), np.zeros(2 * half, dtype=int))
        self.half = half

    def _vertices(self, X):
        if np.any(X[:, 2] <= 0):
            raise ValueError("airfoil thickness must be positive")
        return naca_vertices(X[:, 0], X[:, 1], X[:, 2], self.half)[0]


class BumpedNacaFamily(Family):
    """NACA 4-digit airfoil plus 19 Hicks-Henne bumps along the surface normal.

    ``x[0:3]`` is the 4-digit triple; ``x[3:13]`` scale ten bumps on the upper
    surface (peaks at ``k/11``) and ``x[13:22]`` nine on the lower surface
    (peaks at ``k/10``).
    """

    width = 3.0

    def __init__(self, num_points: int = 200, bump: float = 0.01):
        half = num_points // 2
        lo = np.concatenate([[0.0, 0.2, 0.05], np.full(19, -bump)])
        hi = np.concatenate([[0.1, 0.6, 0.25], np.full(19, bump)])
        super().__init__("naca22", lo, hi, True, num_points, (0.0, 1.0, -0.2, 0.25),
                         np.arange(2 * half) / (2 * half), np.zeros(2 * half, dtype=int))
        self.half = half
        _, xc = naca_vertices(0.0, 0.5, 0.1, half)
        peaks_up = np.arange(1, 11) / 11.0
        peaks_low = np.arange(1, 10) / 10.0
        on_lower = np.zeros(2 * half, dtype=bool)
        on_lower[:half + 1] = True

        def profile(peaks, mask):
            expo = np.log(0.5) / np.log(peaks)
            B = np.sin(np.pi * np.clip(xc, 0, 1)[None, :] ** expo[:, None]) ** self.width
            return B * mask[None, :]

        # upper bumps skip the shared leading/trailing-edge vertices
        self.bumps = np.concatenate([profile(peaks_up, ~on_lower), profile(peaks_low, on_lower)])

    def _vertices(self, X):
        if np.any(X[:, 2] <= 0):
            raise ValueError("airfoil thickness must be positive")
        V = naca_vertices(X[:, 0], X[:, 1], X[:, 2], self.half)[0]
        tangent = np.roll(V, -1, axis=1) - np.roll(V, 1, axis=1)
        # counter-clockwise traversal, outward normal is the tangent turned clockwise
        normal = np.stack([tangent[..., 1], -tangent[..., 0]], axis=2)
        normal /= np.linalg.norm(normal, axis=2, keepdims=True)
        amp = X[:, 3:] @ self.bumps
        return V + amp[..., None] * normal


FAMILIES = {
    "circle1d": lambda: CircleFamily(1),
    "circle2d": lambda: CircleFamily(2),
    "circle3d": lambda: CircleFamily(3),
    "circle39": RedundantCircleFamily,
    "three_circles": ThreeCirclesFamily,
    "rectangle": RectangleFamily,
    "catenoid": CatenoidFamily,
    "naca3": NacaFamily,
    "naca22": BumpedNacaFamily,
}


def get_family(problem_id: str | Family) -> Family:
    if isinstance(problem_id, Family):
        return problem_id
    try:
        return FAMILIES[problem_id]()
    except KeyError:
        raise ValueError(f"unknown shape family {problem_id!r}; choose from {sorted(FAMILIES)}") from None


@dataclass(frozen=True)
class DesignVector:
    """A design checked against its family's bounds."""

    values: np.ndarray
    problem_id: str

    def __post_init__(self):
        fam = get_family(self.problem_id)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (fam.d,):
            raise ValueError(f"expected {fam.d} values, got {v.shape}")
        if np.any(v < fam.lower) or np.any(v > fam.upper):
            raise ValueError("design outside the family bounds")
        object.__setattr__(self, "values", v)


def generate_shape(problem_id: str | Family, x) -> ContourShape:
    """Contour of design ``x`` in the given family."""
    if isinstance(x, DesignVector):
        x = x.values
    return get_family(problem_id).shape(x)


# ---------------------------------------------------------------------------
# databases


@dataclass
class ShapeDatabase:
    """Designs and their representations, rows aligned."""

    designs: np.ndarray
    phi: np.ndarray
    problem_id: str
    mapping: MappingSpec
    seed: int | None = None

    def __post_init__(self):
        self.designs = np.atleast_2d(np.asarray(self.designs, float))
        self.phi = np.atleast_2d(np.asarray(self.phi, float))
        if len(self.designs) != len(self.phi):
            raise ValueError("designs and representations must have the same number of rows")

    @property
    def size(self) -> int:
        return len(self.phi)


def build_database(problem_id: str | Family, n: int, mapping: MappingSpec | str | None = None,
                   seed: int = 0) -> ShapeDatabase:
    """Sample ``n`` designs and map them.

    Designs are uniform in the bounds except for the catenoid, whose
    profiles come from its Gaussian-process prior.
    """
    if n < 2:
        raise ValueError("a database needs at least 2 designs")
    fam = get_family(problem_id)
    if mapping is None or isinstance(mapping, (str, Mapping)):
        mapping = fam.default_mapping(mapping or Mapping.CONTOUR)
    rng = np.random.default_rng(seed)
    X = fam.sample(n, rng)
    return ShapeDatabase(X, fam.phi(X, mapping), fam.name, mapping, seed)


def save_database(db: ShapeDatabase, path: str | Path) -> None:
    """CSV with a JSON header comment, then ``design_*, phi_*`` columns."""
    header = {"problem": db.problem_id, "mapping": db.mapping.to_dict(), "seed": db.seed,
              "d": db.designs.shape[1], "D": db.phi.shape[1]}
    names = [f"design_{i}" for i in range(db.designs.shape[1])] + [f"phi_{j}" for j in range(db.phi.shape[1])]
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(header) + "\n")
        fh.write(",".join(names) + "\n")
        np.savetxt(fh, np.hstack([db.designs, db.phi]), delimiter=",", fmt="%.17g")


def load_database(path: str | Path) -> ShapeDatabase:
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError("missing database header")
        header = json.loads(first[2:])
        fh.readline()
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    d = header["d"]
    return ShapeDatabase(data[:, :d], data[:, d:], header["problem"],
                         MappingSpec.from_dict(header["mapping"]), header.get("seed"))

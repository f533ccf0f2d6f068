"""Principal axes of a shape database and the statistics of its projection.

The basis holds the eigenvectors of the covariance of the centered
representations.  By default they come from a thin SVD of the centered
data, which resolves small eigenvalues far better than diagonalizing the
covariance itself; the covariance and Gram-matrix routes remain available.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares, minimize
from scipy.spatial import cKDTree

from .shapes import Family, MappingSpec, ShapeDatabase, get_family


@dataclass(frozen=True)
class TruncationPolicy:
    """How many principal axes are worth keeping.

    ``cumulative`` is the share of total variance the kept axes must reach;
    ``ratio`` is the smallest eigenvalue, relative to the first, an axis may
    have.  Either may be ``None``.  When both are set, the stricter one wins.
    """

    cumulative: float | None = 0.9999
    ratio: float | None = 1e-6


@dataclass(frozen=True)
class EigenBasis:
    """Mean shape, eigenvalues (descending) and orthonormal eigenvectors.

    ``vectors[:, j]`` is the j-th axis.  Coordinates live in the first
    ``d_prime`` axes; ``values`` and ``vectors`` keep the full spectrum so
    that reconstruction errors and wider projections stay available.
    """

    mean: np.ndarray
    values: np.ndarray
    vectors: np.ndarray
    d_prime: int
    mapping: MappingSpec | None = None
    problem_id: str | None = None
    n_samples: int | None = None

    def __post_init__(self):
        if not 1 <= self.d_prime <= self.vectors.shape[1]:
            raise ValueError("d_prime must be between 1 and the number of stored axes")

    @property
    def D(self) -> int:
        return len(self.mean)

    def with_dim(self, k: int) -> "EigenBasis":
        return replace(self, d_prime=int(k))

    def project(self, phi, k: int | None = None) -> np.ndarray:
        """Coordinates of representation(s) ``phi`` on the first ``k`` axes."""
        k = self.d_prime if k is None else k
        phi = np.asarray(phi, float)
        if phi.shape[-1] != self.D:
            raise ValueError(f"representation length {phi.shape[-1]} does not match basis ({self.D})")
        return (phi - self.mean) @ self.vectors[:, :k]

    def reconstruct(self, alpha, delta: int | None = None) -> np.ndarray:
        """Mean plus the first ``delta`` coordinates of ``alpha`` along their axes."""
        alpha = np.asarray(alpha, float)
        delta = alpha.shape[-1] if delta is None else delta
        if delta > alpha.shape[-1] or delta > self.vectors.shape[1]:
            raise ValueError("delta exceeds the available coordinates")
        return self.mean + alpha[..., :delta] @ self.vectors[:, :delta].T

    def explained(self) -> np.ndarray:
        """Cumulative share of variance, in percent."""
        total = self.values.sum()
        return 100.0 * np.cumsum(self.values) / total if total > 0 else np.full(len(self.values), 100.0)


def _orient(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def pca_fit(data: ShapeDatabase | np.ndarray, d: int | None = None,
            policy: TruncationPolicy | None = TruncationPolicy(), route: str = "auto") -> EigenBasis:
    """Principal axes of the rows of ``data``.

    Parameters
    ----------
    data : ShapeDatabase or (N, D) array
    d : int, optional
        Design-space dimension; caps the number of coordinates kept.  Read
        from the family when ``data`` is a database.
    policy : TruncationPolicy or None
        ``None`` keeps ``min(d, rank)`` axes.
    route : {"auto", "svd", "covariance", "gram"}
        ``auto`` is ``svd``.  ``covariance`` diagonalizes the ``D x D``
        covariance; ``gram`` the ``N x N`` Gram matrix, lifting its
        eigenvectors back.  Eigenvalues from the two matrix routes carry
        absolute errors near machine precision times the largest one.
    """
    if isinstance(data, ShapeDatabase):
        Phi, mapping, pid = data.phi, data.mapping, data.problem_id
        if d is None:
            d = data.designs.shape[1]
    else:
        Phi, mapping, pid = np.atleast_2d(np.asarray(data, float)), None, None
    N, D = Phi.shape
    if N < 2:
        raise ValueError("need at least two rows")
    if not np.all(np.isfinite(Phi)):
        raise ValueError("database contains non-finite entries")
    mean = Phi.mean(axis=0)
    Xc = Phi - mean
    if route == "auto":
        route = "svd"
    if route == "svd":
        _, sing, vt = np.linalg.svd(Xc, full_matrices=False)
        lam, vec = sing ** 2 / N, vt.T
    elif route == "covariance":
        lam, vec = np.linalg.eigh(Xc.T @ Xc / N)
        lam, vec = lam[::-1], vec[:, ::-1]
    elif route == "gram":
        lam, U = np.linalg.eigh(Xc @ Xc.T / N)
        lam, U = lam[::-1], U[:, ::-1]
        keep = lam > max(lam[0], 0.0) * 1e-13
        if not np.any(keep):
            keep[0] = True
        lam, U = lam[keep], U[:, keep]
        vec = Xc.T @ U / np.sqrt(N * np.maximum(lam, 1e-300))
    else:
        raise ValueError(f"unknown route {route!r}")
    lam = np.maximum(lam, 0.0)
    vec = _orient(vec)
    rank = max(1, int(np.count_nonzero(lam > lam[0] * 1e-12))) if lam[0] > 0 else 1
    if lam[0] <= 0:
        raise ValueError("all rows are identical; the spectrum is empty")
    cap = min(d if d is not None else vec.shape[1], vec.shape[1])
    dp = cap if policy is None else effective_dim(lam, cap, policy)
    return EigenBasis(mean, lam, vec, max(1, min(dp, rank if policy is not None else cap)), mapping, pid, N)


def effective_dim(values, d: int | None = None, policy: TruncationPolicy = TruncationPolicy()) -> int:
    """Number of axes to keep: ``min(d, axes allowed by the policy)``."""
    lam = np.asarray(values, float)
    if lam.ndim != 1 or len(lam) == 0:
        raise ValueError("empty spectrum")
    if np.any(np.diff(lam) > 1e-12 * max(abs(lam[0]), 1.0)):
        raise ValueError("eigenvalues must be sorted in decreasing order")
    if lam[0] <= 0:
        raise ValueError("spectrum has no positive eigenvalue")
    if policy.cumulative is not None and not 0 < policy.cumulative <= 1:
        raise ValueError("cumulative share must lie in (0, 1]")
    if policy.ratio is not None and not 0 <= policy.ratio <= 1:
        raise ValueError("eigenvalue ratio must lie in [0, 1]")
    counts = [len(lam)]
    if policy.cumulative is not None:
        share = np.cumsum(lam) / lam.sum()
        counts.append(int(np.argmax(share >= policy.cumulative * (1 - 1e-12))) + 1)
    if policy.ratio is not None:
        counts.append(int(np.count_nonzero(lam / lam[0] >= policy.ratio)))
    if d is not None:
        counts.append(int(d))
    return max(1, min(counts))


def reconstruction_error(basis: EigenBasis, phi: np.ndarray, delta: int) -> float:
    """Squared Frobenius norm of ``phi`` minus its rank-``delta`` reconstruction."""
    alpha = basis.project(phi, delta)
    return float(np.sum((np.asarray(phi) - basis.reconstruct(alpha, delta)) ** 2))


@dataclass
class ManifoldStats:
    """Statistics of the projected database.

    ``sample`` holds the projected rows, ``covering_box`` their coordinate
    ranges, ``d95`` the 95th percentile of nearest-neighbour distances within
    ``sample`` and ``d0`` the smallest distance between two database rows.
    """

    sample: np.ndarray
    covering_box: tuple[np.ndarray, np.ndarray]
    d95: float
    d0: float
    designs: np.ndarray | None = field(default=None, repr=False)
    _tree: cKDTree | None = field(default=None, repr=False)

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.sample)
        return self._tree

    def restrict(self, k: int) -> "ManifoldStats":
        """Same statistics on the first ``k`` coordinates (``d0`` is kept)."""
        sub = self.sample[:, :k]
        return ManifoldStats(sub, (sub.min(0), sub.max(0)), _nn_quantile(sub), self.d0, self.designs)

    def is_on_manifold(self, alpha) -> np.ndarray | bool:
        """Whether ``alpha`` lies within ``d95`` of some projected database row."""
        alpha = np.asarray(alpha, float)
        dist, _ = self.tree.query(np.atleast_2d(alpha), k=1)
        inside = dist <= self.d95
        return bool(inside[0]) if alpha.ndim == 1 else inside

    def nearest(self, alpha, k: int = 1) -> np.ndarray:
        """Indices of the ``k`` database rows nearest to ``alpha``."""
        _, idx = self.tree.query(np.asarray(alpha, float), k=min(k, len(self.sample)))
        return np.atleast_1d(idx)


def _nn_quantile(points: np.ndarray, q: float = 0.95) -> float:
    dist, _ = cKDTree(points).query(points, k=2)
    return float(np.quantile(dist[:, 1], q, method="higher"))


def manifold_stats(basis: EigenBasis, db: ShapeDatabase | np.ndarray, max_rows: int = 5000,
                   seed: int = 0) -> ManifoldStats:
    """Projection of the database and its distance statistics."""
    if isinstance(db, ShapeDatabase):
        Phi, designs = db.phi, db.designs
    else:
        Phi, designs = np.atleast_2d(np.asarray(db, float)), None
    if len(Phi) < 2:
        raise ValueError("need at least two rows")
    A = basis.project(Phi)
    lo, hi = A.min(axis=0), A.max(axis=0)
    # distances between rows are preserved by projecting on all axes with
    # nonzero variance, which span the centered rows
    full = basis.project(Phi, int(np.count_nonzero(basis.values > basis.values[0] * 1e-14)))
    if len(full) > max_rows:
        full = full[np.random.default_rng(seed).choice(len(full), max_rows, replace=False)]
    dist, _ = cKDTree(full).query(full, k=2)
    return ManifoldStats(A, (lo, hi), _nn_quantile(A), float(dist[:, 1].min()), designs)


def equivalent_kernel(basis: EigenBasis, x, x_prime, family: Family | str,
                      mapping: MappingSpec | None = None) -> float:
    """Inner product of two centered representations, from distances only."""
    fam = get_family(family)
    mapping = mapping or basis.mapping
    phi = fam.phi(np.vstack([x, x_prime]), mapping)
    a, b = phi[0] - basis.mean, phi[1] - basis.mean
    return 0.5 * (a @ a + b @ b - np.sum((phi[0] - phi[1]) ** 2))


@dataclass
class PreImageResult:
    x: np.ndarray
    alpha: np.ndarray
    residual: float
    converged: bool


def pre_image(basis: EigenBasis, alpha_star, family: Family | str, stats: ManifoldStats | None = None,
              mapping: MappingSpec | None = None, n_starts: int = 10, seed: int = 0,
              tol: float = 1e-8) -> PreImageResult:
    """Design whose representation best matches ``mean + V alpha_star``.

    Minimizes ``||phi(x) - mean - V[:, :k] alpha_star||^2`` over the design
    bounds from ``n_starts`` starting points: the designs of the nearest
    database rows (when ``stats`` carries them) topped up with uniform draws.
    Grid mappings are piecewise constant in ``x`` and use Powell; the
    contour mapping is smooth and uses bounded Gauss-Newton (trust-region
    least squares) with a finite-difference Jacobian.
    """
    fam = get_family(family)
    mapping = mapping or basis.mapping or fam.default_mapping()
    alpha_star = np.asarray(alpha_star, float)
    k = len(alpha_star)
    target = basis.mean + basis.vectors[:, :k] @ alpha_star
    rng = np.random.default_rng(seed)
    lo, hi = fam.lower, fam.upper
    starts = []
    if stats is not None and stats.designs is not None:
        idx = stats.nearest(alpha_star[: stats.sample.shape[1]] if k >= stats.sample.shape[1]
                            else np.pad(alpha_star, (0, stats.sample.shape[1] - k)), n_starts // 2 or 1)
        starts.extend(stats.designs[idx])
    while len(starts) < n_starts:
        starts.append(fam.sample(1, rng)[0])
    starts = np.clip(np.array(starts), lo, hi)

    def resid(X):
        return np.sum((fam.phi(X, mapping) - target) ** 2, axis=1)

    step = 1e-7 * (hi - lo)

    def jac(x):
        # forward differences in one batch, stepping backwards at the upper bound
        h = np.where(x + step > hi, -step, step)
        r = fam.phi(np.vstack([x, x + np.diag(h)]), mapping)
        return ((r[1:] - r[0]) / h[:, None]).T

    smooth = mapping.kind.value == "contour"
    values = resid(starts)
    best_x, best_f, converged = starts[np.argmin(values)], float(values.min()), False
    for x0 in starts[np.argsort(values)]:
        if smooth:
            res = least_squares(lambda x: fam.phi(x[None], mapping)[0] - target, x0, jac=jac, bounds=(lo, hi),
                                method="trf", xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=200)
        else:
            res = minimize(lambda x: float(resid(x[None])[0]), x0, method="Powell",
                           bounds=list(zip(lo, hi)), options={"xtol": 1e-6, "ftol": tol})
        x = np.clip(res.x, lo, hi)
        f = float(resid(x[None])[0])
        if f < best_f:
            best_x, best_f = x, f
        converged = converged or bool(res.success)
        if best_f <= tol ** 2:
            break
    alpha = basis.project(fam.phi(best_x[None], mapping)[0], k)
    return PreImageResult(best_x, alpha, best_f, converged)


# ---------------------------------------------------------------------------
# persistence


def save_basis(basis: EigenBasis, path: str | Path) -> None:
    """Plain-text basis: JSON header line, then mean, eigenvalues and the
    eigenvector matrix column by column, one number per line."""
    header = {"D": basis.D, "d_prime": basis.d_prime, "n_axes": basis.vectors.shape[1],
              "mapping": None if basis.mapping is None else basis.mapping.to_dict(),
              "problem": basis.problem_id, "n_samples": basis.n_samples}
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        body = np.concatenate([basis.mean, basis.values, basis.vectors.ravel(order="F")])
        np.savetxt(fh, body, fmt="%.17g")


def load_basis(path: str | Path) -> EigenBasis:
    with open(path) as fh:
        header = json.loads(fh.readline())
        body = np.loadtxt(fh, ndmin=1)
    D, n = header["D"], header["n_axes"]
    if len(body) != D + n + D * n:
        raise ValueError("basis file is truncated or malformed")
    mapping = None if header["mapping"] is None else MappingSpec.from_dict(header["mapping"])
    return EigenBasis(body[:D], body[D:D + n], body[D + n:].reshape((D, n), order="F"),
                      header["d_prime"], mapping, header.get("problem"), header.get("n_samples"))


def save_spectrum(basis: EigenBasis, path: str | Path) -> None:
    """CSV ``j,eigenvalue,cumulative_pct``."""
    cum = basis.explained()
    with open(path, "w") as fh:
        fh.write("j,eigenvalue,cumulative_pct\n")
        for j, (lam, c) in enumerate(zip(basis.values, cum), start=1):
            fh.write(f"{j},{lam:.17g},{c:.17g}\n")

"""Sequential EI optimization in design or principal-component coordinates."""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from .acquisition import SearchSpace, active_space, embedded_space, full_space, maximize_ei
from .eigenbasis import ManifoldStats, manifold_stats, pca_fit, pre_image
from .gp import GpModel, fit_gp
from .objectives import Problem, get_problem
from .reduction import draw_embedding, fit_additive, select_active
from .shapes import build_database

log = logging.getLogger(__name__)

SPACES = ("x", "alpha")
MODELS = ("gp", "addgp")
STRATEGIES = ("full", "active", "embed", "viax")
DOMAINS = ("box", "manifold")


@dataclass
class RunConfig:
    """Settings of one optimization run.

    ``space`` is the coordinate system the model lives in: design variables
    (``x``) or the first ``n_components`` principal coordinates
    (``alpha``).  ``active`` fixes the active set of the additive model;
    otherwise it is re-selected every iteration.
    """

    problem: str
    space: str = "alpha"
    model: str = "gp"
    strategy: str = "full"
    domain: str = "box"
    n_components: int | None = None
    active: tuple[int, ...] | None = None
    replication: bool = False
    n_init: int = 20
    iterations: int = 80
    database_size: int = 5000
    seed: int = 0
    kernel: str = "matern52"
    fit_starts: int = 5
    population: int = 50
    generations: int = 40
    n_polish: int = 5
    preimage_starts: int = 10
    sample_inactive: bool = False
    label: str | None = None

    def __post_init__(self):
        for name, allowed in (("space", SPACES), ("model", MODELS), ("strategy", STRATEGIES),
                              ("domain", DOMAINS)):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.n_init < 2 or self.iterations < 0:
            raise ValueError("need n_init >= 2 and iterations >= 0")
        if self.space == "x" and self.domain == "manifold":
            raise ValueError("the manifold domain needs principal coordinates")
        if self.strategy == "viax" and self.space == "x":
            raise ValueError("searching through designs only makes sense in principal coordinates")
        if self.strategy in ("active", "embed") and self.model != "addgp" and self.active is None:
            raise ValueError(f"strategy {self.strategy!r} needs an additive model or a fixed active set")
        if self.active is not None:
            self.active = tuple(int(a) for a in self.active)

    @property
    def name(self) -> str:
        return self.label or f"{self.model}-{self.space}-{self.strategy}-{self.domain}"

    @classmethod
    def from_json(cls, path: str | Path, **overrides) -> "RunConfig":
        with open(path) as fh:
            data = json.load(fh)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


@dataclass
class LogRow:
    iter: int
    eval_index: int
    x: np.ndarray
    alpha: np.ndarray
    y: float
    f_min: float
    replicated: bool
    strategy: str
    active_set: tuple[int, ...]
    ei_value: float
    wall_ms: float


@dataclass
class RunResult:
    config: RunConfig
    X: np.ndarray
    y: np.ndarray
    rows: list[LogRow] = field(default_factory=list)
    n_virtual: int = 0
    training: "TrainingSet | None" = field(default=None, repr=False)

    @property
    def trace(self) -> np.ndarray:
        """Best value after each true evaluation."""
        return np.minimum.accumulate(self.y)

    @property
    def best(self) -> float:
        return float(self.y.min())

    def write_log(self, path: str | Path) -> None:
        d = self.X.shape[1]
        k = len(self.rows[0].alpha) if self.rows else 0
        head = (["iter", "eval_index"] + [f"x_{i}" for i in range(d)] + [f"alpha_{j}" for j in range(k)]
                + ["y", "f_min", "replicated", "strategy", "active_set", "ei_value", "wall_ms"])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(head)
            for r in self.rows:
                w.writerow([r.iter, r.eval_index, *map(repr, r.x.tolist()), *map(repr, r.alpha.tolist()),
                            repr(r.y), repr(r.f_min), int(r.replicated), r.strategy,
                            " ".join(map(str, r.active_set)), repr(r.ei_value), f"{r.wall_ms:.1f}"])


class TrainingSet:
    """Model inputs and responses; virtual rows are kept apart from true evaluations."""

    def __init__(self, dim: int, scale: np.ndarray):
        self.Z = np.zeros((0, dim))
        self.y = np.zeros(0)
        self.virtual = np.zeros(0, dtype=bool)
        self.iteration = np.zeros(0, dtype=int)
        self.scale = np.where(scale > 0, scale, 1.0)

    def add(self, z, y: float, virtual: bool = False, iteration: int = 0) -> bool:
        """Append a row unless it duplicates an existing input; returns whether it was added."""
        z = np.asarray(z, float)
        if len(self.Z) and np.min(np.max(np.abs(self.Z - z) / self.scale, axis=1)) < 1e-10:
            return False
        self.Z = np.vstack([self.Z, z])
        self.y = np.append(self.y, y)
        self.virtual = np.append(self.virtual, virtual)
        self.iteration = np.append(self.iteration, iteration)
        return True

    @property
    def f_min(self) -> float:
        return float(self.y[~self.virtual].min())


class Optimizer:
    """Runs the loop described by a :class:`RunConfig`.

    In principal coordinates every proposal is turned into a design by
    pre-image search; the model is trained on the coordinates the design
    actually reaches, plus (with replication) a virtual copy at the
    proposed point when the two are farther apart than the closest pair of
    database shapes.
    """

    def __init__(self, config: RunConfig, problem: Problem | None = None):
        self.config = config
        self.problem = problem or get_problem(config.problem)
        self.rng = np.random.default_rng(config.seed)
        if config.space == "alpha":
            if self.problem.family is None:
                raise ValueError(f"problem {self.problem.name!r} has no shape family")
            fam = self.problem.family
            db = build_database(fam, config.database_size, seed=config.seed)
            self.basis = pca_fit(db)
            k = config.n_components or self.basis.d_prime
            if k > self.basis.vectors.shape[1]:
                raise ValueError("more components requested than the basis provides")
            self.basis = self.basis.with_dim(k)
            self.stats: ManifoldStats | None = manifold_stats(self.basis, db)
            self.lower, self.upper = self.stats.covering_box
        else:
            self.basis, self.stats = None, None
            self.lower, self.upper = self.problem.lower, self.problem.upper
        self.dim = len(self.lower)

    # -- mapping between designs and model coordinates

    def to_model(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.basis is None:
            return X.copy()
        return self.basis.project(self.problem.family.phi(X, self.basis.mapping))

    def to_design(self, z, seed: int) -> np.ndarray:
        if self.basis is None:
            return np.clip(z, self.problem.lower, self.problem.upper)
        res = pre_image(self.basis, z, self.problem.family, self.stats, n_starts=self.config.preimage_starts,
                        seed=seed)
        return res.x

    def initial_design(self) -> np.ndarray:
        cfg = self.config
        U = qmc.LatinHypercube(d=self.dim, seed=self.rng).random(cfg.n_init)
        Z = self.lower + (self.upper - self.lower) * U
        if self.basis is None:
            return Z
        return np.array([self.to_design(z, cfg.seed * 7919 + i) for i, z in enumerate(Z)])

    # -- one iteration

    def _fit(self, train: TrainingSet, seed: int) -> tuple[GpModel, tuple[int, ...]]:
        cfg = self.config
        if cfg.model == "gp":
            model = fit_gp(train.Z, train.y, kind=cfg.kernel, n_starts=cfg.fit_starts, seed=seed)
            return model, tuple(cfg.active or range(self.dim))
        if cfg.active is not None:
            active = np.array(cfg.active)
        else:
            active = select_active(train.Z, train.y, kind=cfg.kernel, n_starts=cfg.fit_starts, seed=seed).active
        fit = fit_additive(train.Z, train.y, active, kind=cfg.kernel, n_starts=cfg.fit_starts, seed=seed)
        return fit.model, tuple(int(a) for a in active)

    def _space(self, active: tuple[int, ...], seed: int) -> SearchSpace:
        cfg = self.config
        if cfg.strategy == "full":
            return full_space(self.lower, self.upper)
        if cfg.strategy == "active":
            fill = None
            if cfg.sample_inactive and self.stats is not None:
                fill = self.stats.sample[self.rng.integers(len(self.stats.sample))]
            return active_space(active, self.dim, self.lower, self.upper, fill)
        if cfg.strategy == "embed":
            sample = None if self.stats is None else self.stats.sample
            emb = draw_embedding(active, self.dim, self.lower, self.upper, seed=seed, sample=sample)
            return embedded_space(emb, self.lower, self.upper)
        fam = self.problem.family
        return SearchSpace(fam.lower, fam.upper, decoder=self.to_model)

    def _seed_points(self, train: TrainingSet, active, designs) -> np.ndarray | None:
        """Training inputs expressed in the search variable of the current strategy."""
        real = train.Z[~train.virtual]
        strategy = self.config.strategy
        if strategy == "full":
            return real
        if strategy == "active":
            return real[:, list(active)]
        if strategy == "viax":
            return np.array(designs)
        return None

    def run(self) -> RunResult:
        cfg = self.config
        t0 = time.perf_counter()
        X0 = self.initial_design()
        Z0 = self.to_model(X0)
        y0 = self.problem(X0)
        train = TrainingSet(self.dim, self.upper - self.lower)
        rows: list[LogRow] = []
        evals_x, evals_y = list(X0), list(y0)
        for i, (x, z, y) in enumerate(zip(X0, Z0, y0)):
            train.add(z, y)
            rows.append(LogRow(0, i + 1, x, z, float(y), float(np.min(y0[:i + 1])), False, "doe", (), np.nan,
                               (time.perf_counter() - t0) * 1e3))
        manifold = self.stats if cfg.domain == "manifold" else None
        n_virtual = 0
        for it in range(1, cfg.iterations + 1):
            t_it = time.perf_counter()
            seed = cfg.seed * 100003 + it
            model, active = self._fit(train, seed)
            space = self._space(active, seed)
            res = maximize_ei(model, train.f_min, space, manifold, cfg.population, cfg.generations,
                              cfg.n_polish, seed, init=self._seed_points(train, active, evals_x))
            x = self.to_design(res.z, seed) if cfg.strategy != "viax" else np.asarray(res.u)
            z = self.to_model(x)[0]
            y = float(self.problem(x[None])[0])
            evals_x.append(x)
            evals_y.append(y)
            train.add(z, y, iteration=it)
            replicated = False
            if cfg.replication and self.stats is not None and np.linalg.norm(res.z - z) > self.stats.d0:
                replicated = train.add(res.z, y, virtual=True, iteration=it)
                n_virtual += replicated
            rows.append(LogRow(it, len(evals_y), x, z, y, min(evals_y), replicated, cfg.strategy, active,
                               res.ei, (time.perf_counter() - t_it) * 1e3))
            log.debug("iter %d y=%.6g best=%.6g ei=%.3g", it, y, train.f_min, res.ei)
        return RunResult(cfg, np.array(evals_x), np.array(evals_y), rows, n_virtual, train)


def run_optimization(config: RunConfig) -> RunResult:
    return Optimizer(config).run()


def config_dict(config: RunConfig) -> dict:
    return asdict(config)


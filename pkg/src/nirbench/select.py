"""Supervised wavelength selection: marginal relevance filter and GA wrapper."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .classify.tree import forest_cv_accuracy
from .dataset import SpectraDataset, derive_seed, stratified_folds
from .errors import DataError, SplitError


def _xy(train, labels=None):
    if isinstance(train, SpectraDataset):
        return train.absorbances, train.labels, train.k, train.wavelengths
    X = np.asarray(train, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    return X, y, int(y.max()) + 1, None


@dataclass(frozen=True, eq=False)
class FeatureSubset:
    indices: np.ndarray
    provenance: str  # "MR" or "GA"
    wavelengths: np.ndarray | None = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if np.unique(idx).size != idx.size:
            raise DataError("feature subset has duplicate indices")
        if idx.size and idx.min() < 0:
            raise DataError("negative feature index")
        object.__setattr__(self, "indices", np.sort(idx))

    def transform(self, rows) -> np.ndarray:
        X = rows.absorbances if isinstance(rows, SpectraDataset) else np.asarray(rows, dtype=float)
        return X[:, self.indices]

    def to_json(self) -> str:
        wl = None if self.wavelengths is None else self.wavelengths[self.indices].tolist()
        return json.dumps({"provenance": self.provenance, "indices": self.indices.tolist(), "wavelengths": wl})


# ------------------------------------------------------------ marginal relevance


@dataclass(frozen=True, eq=False)
class MrRanking:
    scores: np.ndarray  # may hold +inf
    order: np.ndarray


def mr_scores(train, labels=None) -> MrRanking:
    """Between-class over within-class sum of squares for every feature.

    Zero within-class and positive between-class spread gives +inf; a feature
    with neither scores 0. ``order`` sorts scores descending, lower index first
    on ties.
    """
    X, y, k, _ = _xy(train, labels)
    present = np.unique(y)
    if present.size < 2:
        raise DataError("marginal relevance needs at least two classes")
    grand = X.mean(axis=0)
    bss = np.zeros(X.shape[1])
    wss = np.zeros(X.shape[1])
    for c in present:
        Xc = X[y == c]
        mc = Xc.mean(axis=0)
        bss += Xc.shape[0] * (mc - grand) ** 2
        wss += np.sum((Xc - mc) ** 2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(wss > 0, bss / np.where(wss > 0, wss, 1.0), np.where(bss > 0, np.inf, 0.0))
    order = np.lexsort((np.arange(scores.size), -scores))
    return MrRanking(scores, order)


def mr_top(ranking: MrRanking, count: int = 10, wavelengths=None) -> FeatureSubset:
    p = ranking.scores.size
    if not 1 <= count <= p:
        raise DataError(f"count must lie in [1, {p}], got {count}")
    return FeatureSubset(ranking.order[:count], "MR", wavelengths)


def mr_select(train, count: int = 10) -> FeatureSubset:
    _, _, _, wl = _xy(train)
    return mr_top(mr_scores(train), count, wl)


# ------------------------------------------------------------- genetic algorithm


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 50
    generations: int = 100
    crossover_prob: float = 0.8
    mutation_prob: float = 0.1
    cv_folds: int = 10
    top_k: int = 5
    seed: int = 0
    n_trees: int = 100
    init_density: float = 0.05
    tournament_size: int = 2
    mutation: str = "bit"  # or "individual"

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.mutation not in ("individual", "bit"):
            raise ValueError("mutation must be 'individual' or 'bit'")
        for name in ("crossover_prob", "mutation_prob", "init_density"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class GaResult:
    subset: FeatureSubset
    frequency: np.ndarray  # inclusion count per feature over every evaluated individual
    best_mask: np.ndarray
    trace: list = field(repr=False)  # per generation: (best, mean, mean active features)
    n_evaluations: int = 0

    def trace_csv(self) -> str:
        return ga_trace_csv(self.trace)


def ga_trace_csv(trace) -> str:
    """Per-generation fitness trace as CSV."""
    lines = ["generation,best_fitness,mean_fitness,mean_features"]
    lines += [f"{g},{b:.6f},{m:.6f},{f:.3f}" for g, (b, m, f) in enumerate(trace)]
    return "\n".join(lines) + "\n"


def _draw_folds(y, n_folds, rng):
    k = int(y.max()) + 1
    for _ in range(2):
        folds = stratified_folds(y, n_folds, rng)
        if all(np.unique(y[folds != f]).size == k for f in range(n_folds)):
            return folds
    raise SplitError("a CV training part is missing a class even after re-drawing the folds")


def ga_fitness(X, y, mask, folds, n_folds, n_trees, seed) -> float:
    """Mean CV accuracy of a random forest on the features switched on in ``mask``."""
    cols = np.flatnonzero(mask)
    sub = np.ascontiguousarray(X[:, cols])
    mtry = int(math.ceil(math.sqrt(cols.size)))
    k = int(y.max()) + 1
    return float(forest_cv_accuracy(sub, y, k, folds, n_folds, n_trees, mtry, seed % (2**31 - 64)))


def _init_individual(rng, p, density):
    mask = rng.random(p) < density
    while not mask.any():
        mask = rng.random(p) < density
    return mask


def ga_run(train, config: GaConfig, labels=None) -> GaResult:
    """Evolve feature bitmasks under RF cross-validated accuracy.

    Tournament selection, uniform crossover applied to a parent pair with
    probability ``crossover_prob``, mutation and one elite carried over
    unchanged. With ``mutation="individual"`` a child is mutated with
    probability ``mutation_prob`` by flipping one random bit; with ``"bit"``
    every bit flips independently with that probability. Fitness is cached
    per distinct mask, so a mask keeps the score of its first evaluation.
    The returned
    subset holds the ``top_k`` features included most often across all
    individuals of all generations (lower index first on ties).
    """
    X, y, k, wl = _xy(train, labels)
    n, p = X.shape
    cfg = config
    if np.bincount(y, minlength=k).min() < 2:
        raise SplitError("every class needs at least 2 samples for cross-validated fitness")
    if n < cfg.cv_folds:
        raise SplitError(f"{n} samples cannot fill {cfg.cv_folds} folds")
    if cfg.top_k > p:
        raise DataError(f"top_k={cfg.top_k} exceeds {p} features")
    folds = _draw_folds(y, cfg.cv_folds, np.random.default_rng(derive_seed(cfg.seed, 0xF01D)))
    X = np.ascontiguousarray(X)

    cache: dict[bytes, float] = {}

    def evaluate(mask, gen, i):
        key = np.packbits(mask).tobytes()
        if key not in cache:
            cache[key] = ga_fitness(X, y, mask, folds, cfg.cv_folds, cfg.n_trees, derive_seed(cfg.seed, gen, i, 1))
        return cache[key]

    rng0 = np.random.default_rng(derive_seed(cfg.seed, 0, 0))
    pop = np.array([_init_individual(rng0, p, cfg.init_density) for _ in range(cfg.population_size)])
    fit = np.array([evaluate(m, 0, i) for i, m in enumerate(pop)])
    freq = pop.sum(axis=0).astype(np.int64)
    trace = [(float(fit.max()), float(fit.mean()), float(pop.sum(axis=1).mean()))]

    for gen in range(1, cfg.generations):
        rng = np.random.default_rng(derive_seed(cfg.seed, gen, 0))
        # np.argmax picks the first maximum: the elite is the lowest-index best
        elite = int(np.argmax(fit))
        new_pop = [pop[elite].copy()]
        new_fit = [fit[elite]]

        def pick():
            cand = rng.integers(0, cfg.population_size, size=cfg.tournament_size)
            return pop[cand[np.argmax(fit[cand])]]

        children = []
        while len(children) < cfg.population_size - 1:
            a, b = pick().copy(), pick().copy()
            if rng.random() < cfg.crossover_prob:
                swap = rng.random(p) < 0.5
                a[swap], b[swap] = b[swap], a[swap].copy()
            children.extend([a, b])
        for i, child in enumerate(children[: cfg.population_size - 1], start=1):
            if cfg.mutation == "bit":
                child ^= rng.random(p) < cfg.mutation_prob
            elif rng.random() < cfg.mutation_prob:
                j = rng.integers(0, p)
                child[j] = not child[j]
            if not child.any():
                child[:] = _init_individual(rng, p, cfg.init_density)
            new_pop.append(child)
            new_fit.append(evaluate(child, gen, i))
        pop = np.array(new_pop)
        fit = np.array(new_fit)
        freq += pop.sum(axis=0)
        trace.append((float(fit.max()), float(fit.mean()), float(pop.sum(axis=1).mean())))

    top = np.lexsort((np.arange(p), -freq))[: cfg.top_k]
    best = pop[int(np.argmax(fit))].copy()
    return GaResult(FeatureSubset(top, "GA", wl), freq, best, trace, len(cache))


def ga_select(train, config: GaConfig, labels=None) -> FeatureSubset:
    return ga_run(train, config, labels).subset

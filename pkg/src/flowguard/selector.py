"""Genetic feature selection with eagle-style local refinement.

The GA evolves continuous positions in [0,1]^d; a position becomes a binary
feature mask by thresholding at 0.5 (an all-zero mask is repaired by setting
the largest coordinate). After the classic generation step the best few
members are refined by three hunting moves, each kept only when it lowers
the subset fitness:

* select: jump near the best position, perturbed toward the population mean,
* spiral: circle the current position using sine/cosine components that are
  normalized by the population-wide maxima,
* swoop: dive toward the best position using sinh/cosh components under two
  control coefficients.

Subset fitness is ``w1 * L + w2 * |S|/|T|`` (minimized), where L is the
cross-validated misclassification rate of a shallow proxy decision tree on
the masked columns and |S|/|T| is the fraction of features kept.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import InsufficientDataError, ParameterError
from .flowdata import FlowDataset
from .trees import DecisionTree
from .validation import (
    as_labels,
    as_matrix,
    check_count,
    check_fraction,
    rng_stream,
    stratified_fold_indices,
)

__all__ = [
    "EagleParams",
    "GaParams",
    "EagleGaState",
    "mask_from_position",
    "subset_fitness",
    "eagle_select",
    "eagle_spiral",
    "eagle_swoop",
    "select_features",
    "EagleGeneticSelector",
]

_INIT, _CHILD, _REFINE = 0, 1, 2


@dataclass(frozen=True)
class EagleParams:
    """Gains for the three refinement moves.

    ``omega`` (the number of search cycles) must stay within [0.5, 2].
    """

    eta_sel: float = 2.0
    omega: float = 1.5
    phi: float = 5.0
    c1: float = 2.0
    c2: float = 2.0

    def __post_init__(self) -> None:
        if not 0.5 <= self.omega <= 2.0:
            raise ParameterError(f"omega must be in [0.5, 2], got {self.omega}")
        for name in ("eta_sel", "phi", "c1", "c2"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")


@dataclass(frozen=True)
class GaParams:
    """Genetic-loop knobs. ``mutation_rate=None`` means 1/|T| per bit.

    ``w1`` weighs the proxy error, ``w2`` the selected-feature fraction;
    they must sum to 1.
    """

    population_size: int = 30
    generations: int = 50
    tournament_k: int = 3
    crossover_rate: float = 0.9
    mutation_rate: float | None = None
    elitism: int = 2
    eagle_fraction: float = 0.2
    w1: float = 0.9
    w2: float = 0.1
    proxy_max_depth: int = 6
    proxy_folds: int = 3

    def __post_init__(self) -> None:
        check_count("population_size", self.population_size, minimum=2)
        check_count("generations", self.generations, minimum=0)
        check_count("tournament_k", self.tournament_k)
        check_fraction("crossover_rate", self.crossover_rate, inclusive_low=True, inclusive_high=True)
        if self.mutation_rate is not None:
            check_fraction("mutation_rate", self.mutation_rate, inclusive_low=True, inclusive_high=True)
        check_count("elitism", self.elitism, minimum=0)
        if self.elitism >= self.population_size:
            raise ParameterError("elitism must be smaller than population_size")
        check_fraction("eagle_fraction", self.eagle_fraction, inclusive_low=True, inclusive_high=True)
        if abs(self.w1 + self.w2 - 1.0) > 1e-9:
            raise ParameterError(f"w1 + w2 must equal 1, got {self.w1 + self.w2}")


@dataclass
class EagleGaState:
    """Continuous population snapshot consumed by the refinement moves."""

    positions: np.ndarray
    best_position: np.ndarray
    generation: int = 0
    rng_seed: int = 0
    mean_position: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[0] == 0:
            raise ParameterError("positions must be a non-empty 2-D array")
        self.best_position = np.asarray(self.best_position, dtype=np.float64)
        self.mean_position = self.positions.mean(axis=0)


def mask_from_position(position: np.ndarray) -> np.ndarray:
    """Threshold a continuous position at 0.5; repair empty masks by
    switching on the largest coordinate."""
    mask = np.asarray(position) >= 0.5
    if not mask.any():
        mask = mask.copy()
        mask[int(np.argmax(position))] = True
    return mask


def subset_fitness(mask, X, y=None, params: GaParams = GaParams(), seed: int = 0) -> float:
    """Score a feature mask: ``w1 * L + w2 * |S|/|T|``, lower is better.

    L is the mean misclassification rate of a depth-limited decision tree
    under stratified cross-validation on the masked columns. The fold
    partition depends only on ``seed``, so scores of different masks are
    comparable.
    """
    if isinstance(X, FlowDataset):
        X, y = X.values, X.labels
    X = as_matrix(X)
    y = as_labels(y, X.shape[0])
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (X.shape[1],):
        raise ParameterError(f"mask length {mask.size} does not match feature count {X.shape[1]}")
    n_selected = int(mask.sum())
    if n_selected == 0:
        raise ParameterError("mask selects no features")

    Xm = X[:, mask]
    folds = stratified_fold_indices(y, params.proxy_folds, seed)
    errors = []
    for f, test_idx in enumerate(folds):
        train_idx = np.concatenate([folds[g] for g in range(len(folds)) if g != f])
        tree = DecisionTree(max_depth=params.proxy_max_depth).fit(Xm[train_idx], y[train_idx])
        pred = tree.predict(Xm[test_idx])
        errors.append(float(np.mean(pred != y[test_idx])))
    L = float(np.mean(errors))
    return params.w1 * L + params.w2 * (n_selected / X.shape[1])


# -- eagle refinement moves ------------------------------------------------


def eagle_select(state: EagleGaState, i: int, params: EagleParams,
                 rng: np.random.Generator) -> np.ndarray:
    """Jump to the best position plus a gated step along (mean - current).

    The gate ``delta`` is a fair coin in {0, 1}; with delta = 0 the move
    lands exactly on the best position.
    """
    delta = float(rng.integers(0, 2))
    new = state.best_position + params.eta_sel * delta * (state.mean_position - state.positions[i])
    return np.clip(new, 0.0, 1.0)


def _polar_components(n: int, params: EagleParams, rng: np.random.Generator,
                      hyperbolic: bool) -> tuple[np.ndarray, np.ndarray]:
    """Normalized spiral (sin/cos) or swoop (sinh/cosh) coefficients.

    One uniform vector is drawn for the angles and a second for the radial
    terms, in that order; normalization divides by the population-wide
    maximum magnitude so every coefficient lies in [-1, 1].
    """
    r_theta = rng.random(n)
    r_delta = rng.random(n)
    theta = params.phi * np.pi * r_theta
    delta = theta + params.omega * r_delta
    if hyperbolic:
        z_raw = delta * np.sinh(theta)
        y_raw = delta * np.cosh(theta)
    else:
        z_raw = delta * np.sin(theta)
        y_raw = delta * np.cos(theta)
    z = z_raw / max(float(np.max(np.abs(z_raw))), 1e-300)
    y = y_raw / max(float(np.max(np.abs(y_raw))), 1e-300)
    return z, y


def eagle_spiral(state: EagleGaState, i: int, params: EagleParams,
                 rng: np.random.Generator) -> np.ndarray:
    """Circle the current position against the ring-order neighbor and the
    population mean, with population-normalized sin/cos coefficients."""
    n = state.positions.shape[0]
    if n < 2:
        raise InsufficientDataError("spiral move needs a population of at least 2")
    z, y = _polar_components(n, params, rng, hyperbolic=False)
    x_i = state.positions[i]
    x_next = state.positions[(i + 1) % n]
    new = x_i + y[i] * (x_i - x_next) + z[i] * (x_i - state.mean_position)
    return np.clip(new, 0.0, 1.0)


def eagle_swoop(state: EagleGaState, i: int, params: EagleParams,
                rng: np.random.Generator) -> np.ndarray:
    """Dive toward the best position with sinh/cosh coefficients.

    After the two population-wide uniform vectors, one extra scalar is drawn
    to scale the best-position term.
    """
    n = state.positions.shape[0]
    if n < 2:
        raise InsufficientDataError("swoop move needs a population of at least 2")
    z1, y1 = _polar_components(n, params, rng, hyperbolic=True)
    r = rng.random()
    x_i = state.positions[i]
    new = (r * state.best_position
           + z1[i] * (x_i - params.c1 * state.mean_position)
           + y1[i] * (x_i - params.c2 * state.best_position))
    return np.clip(new, 0.0, 1.0)


# -- the GA loop -------------------------------------------------------------


def select_features(X, y=None, ga: GaParams = GaParams(), eagle: EagleParams = EagleParams(),
                    seed: int = 0) -> tuple[np.ndarray, list[dict]]:
    """Search for the best feature mask; returns ``(mask, history)``.

    History holds one record per generation (plus the initial population)
    with keys ``generation``, ``best_fitness``, ``mean_fitness``, and
    ``n_selected``; the best-fitness sequence is non-increasing because
    elites are copied unchanged and refinements are only kept on
    improvement.
    """
    if isinstance(X, FlowDataset):
        X, y = X.values, X.labels
    X = as_matrix(X)
    y = as_labels(y, X.shape[0])
    d = X.shape[1]
    if d < 2:
        raise InsufficientDataError("feature selection needs at least 2 columns")

    mutation_rate = ga.mutation_rate if ga.mutation_rate is not None else 1.0 / d
    cache: dict[bytes, float] = {}

    def evaluate(position: np.ndarray) -> float:
        mask = mask_from_position(position)
        key = mask.tobytes()
        if key not in cache:
            cache[key] = subset_fitness(mask, X, y, ga, seed)
        return cache[key]

    rng_init = rng_stream(seed, _INIT)
    positions = rng_init.random((ga.population_size, d))
    fits = np.array([evaluate(p) for p in positions])

    best_i = int(np.argmin(fits))
    best_fit = float(fits[best_i])
    best_position = positions[best_i].copy()

    history = [_generation_record(0, fits, best_fit, best_position)]

    n_refine = int(round(ga.eagle_fraction * ga.population_size))
    for gen in range(1, ga.generations + 1):
        order = np.argsort(fits, kind="stable")
        new_positions = np.empty_like(positions)
        new_fits = np.empty_like(fits)
        for e in range(ga.elitism):
            new_positions[e] = positions[order[e]]
            new_fits[e] = fits[order[e]]

        for m in range(ga.elitism, ga.population_size):
            rng = rng_stream(seed, _CHILD, gen, m)
            p1 = _tournament(positions, fits, ga.tournament_k, rng)
            p2 = _tournament(positions, fits, ga.tournament_k, rng)
            child = p1.copy()
            if rng.random() < ga.crossover_rate:
                swap = rng.random(d) < 0.5
                child[swap] = p2[swap]
            mutate = rng.random(d) < mutation_rate
            if mutate.any():
                child[mutate] = rng.random(int(mutate.sum()))
            new_positions[m] = child
            new_fits[m] = evaluate(child)

        positions, fits = new_positions, new_fits
        gen_best = int(np.argmin(fits))
        if fits[gen_best] < best_fit:
            best_fit = float(fits[gen_best])
            best_position = positions[gen_best].copy()

        if n_refine > 0:
            refine_order = np.argsort(fits, kind="stable")[:n_refine]
            for i in sorted(int(r) for r in refine_order):
                rng = rng_stream(seed, _REFINE, gen, i)
                for move in (eagle_select, eagle_spiral, eagle_swoop):
                    state = EagleGaState(positions=positions, best_position=best_position,
                                         generation=gen, rng_seed=seed)
                    candidate = move(state, i, eagle, rng)
                    cand_fit = evaluate(candidate)
                    if cand_fit < fits[i]:
                        positions[i] = candidate
                        fits[i] = cand_fit
                        if cand_fit < best_fit:
                            best_fit = float(cand_fit)
                            best_position = candidate.copy()

        history.append(_generation_record(gen, fits, best_fit, best_position))

    return mask_from_position(best_position), history


def _generation_record(gen: int, fits: np.ndarray, best_fit: float,
                       best_position: np.ndarray) -> dict:
    return {
        "generation": gen,
        "best_fitness": float(best_fit),
        "mean_fitness": float(np.mean(fits)),
        "n_selected": int(mask_from_position(best_position).sum()),
    }


def _tournament(positions: np.ndarray, fits: np.ndarray, k: int,
                rng: np.random.Generator) -> np.ndarray:
    contenders = rng.integers(0, positions.shape[0], size=k)
    winner = contenders[int(np.argmin(fits[contenders]))]
    return positions[winner].copy()


class EagleGeneticSelector(BaseEstimator, TransformerMixin):
    """Estimator wrapper around :func:`select_features`.

    After ``fit`` the chosen mask is in ``support_`` and the per-generation
    fitness records in ``history_``.
    """

    def __init__(self, ga: GaParams | None = None, eagle: EagleParams | None = None,
                 random_state: int = 0):
        self.ga = ga
        self.eagle = eagle
        self.random_state = random_state

    def fit(self, X, y):
        ga = self.ga if self.ga is not None else GaParams()
        eagle = self.eagle if self.eagle is not None else EagleParams()
        self.support_, self.history_ = select_features(X, y, ga, eagle, self.random_state)
        return self

    def transform(self, X):
        X = as_matrix(X)
        if X.shape[1] != self.support_.size:
            raise ParameterError(
                f"X has {X.shape[1]} columns, selector was fitted on {self.support_.size}"
            )
        return X[:, self.support_]

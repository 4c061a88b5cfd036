"""Hyperparameter search: simulated annealing over swarm proposals.

Each agent is an annealing chain living in the unit cube of normalized
knobs. A proposal move blends five swarm behaviors measured against the
iteration-start snapshot (separation from crowding neighbors, alignment
with neighbor steps, cohesion toward the neighborhood center, attraction to
the best position seen, repulsion from the worst); an agent with no
neighbors inside the shrinking radius takes a heavy-tailed Levy step
instead. The Metropolis rule then decides whether the agent actually moves,
under a temperature that cools geometrically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensemble import Hyperparameters, VotingEnsemble
from .errors import InsufficientDataError, ParameterError
from .flowdata import FlowDataset
from .validation import as_labels, as_matrix, check_count, check_positive, rng_stream

__all__ = [
    "KnobSpec",
    "ParamSpace",
    "SaParams",
    "BehaviorWeights",
    "SwarmState",
    "sa_fitness",
    "sa_accept",
    "levy_step",
    "dragonfly_step",
    "neighborhood_radius",
    "tune",
]

_LEVY_BETA = 1.5
_LEVY_SCALE = 0.01

_INIT, _AGENT = 0, 1


@dataclass(frozen=True)
class KnobSpec:
    name: str
    low: float
    high: float
    integer: bool = False

    def __post_init__(self) -> None:
        if not self.low < self.high:
            raise ParameterError(f"knob {self.name!r}: lower bound must be below upper")


@dataclass(frozen=True)
class ParamSpace:
    """Search bounds for the numeric ensemble knobs.

    The voting mode is a pipeline-level choice and is carried through
    unchanged rather than searched.
    """

    knobs: tuple[KnobSpec, ...]

    @classmethod
    def default(cls) -> "ParamSpace":
        return cls(knobs=(
            KnobSpec("dt_max_depth", 2, 12, integer=True),
            KnobSpec("rf_n_trees", 5, 60, integer=True),
            KnobSpec("rf_max_depth", 2, 12, integer=True),
            KnobSpec("gbt_n_rounds", 10, 80, integer=True),
            KnobSpec("gbt_max_depth", 1, 8, integer=True),
            KnobSpec("gbt_learning_rate", 0.05, 1.0),
            KnobSpec("gbt_reg_lambda", 0.0, 5.0),
        ))

    @property
    def dim(self) -> int:
        return len(self.knobs)

    def denormalize(self, u: np.ndarray, voting: str = "soft") -> Hyperparameters:
        """Map a point of the unit cube onto concrete hyperparameters.

        Integer knobs round half-up; everything is clipped into bounds.
        """
        u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
        if u.shape != (self.dim,):
            raise ParameterError(f"expected {self.dim} coordinates, got {u.shape}")
        fields = {}
        for j, knob in enumerate(self.knobs):
            v = knob.low + u[j] * (knob.high - knob.low)
            if knob.integer:
                v = int(min(max(math.floor(v + 0.5), knob.low), knob.high))
            fields[knob.name] = v
        return Hyperparameters(voting=voting, **fields)

    def normalize(self, hp: Hyperparameters) -> np.ndarray:
        u = np.empty(self.dim)
        for j, knob in enumerate(self.knobs):
            v = float(getattr(hp, knob.name))
            u[j] = (v - knob.low) / (knob.high - knob.low)
        return np.clip(u, 0.0, 1.0)


@dataclass(frozen=True)
class SaParams:
    n_agents: int = 8
    iterations: int = 40
    t0: float = 1.0
    cooling_alpha: float = 0.9
    radius_start: float = 0.5
    radius_end: float = 0.1

    def __post_init__(self) -> None:
        check_count("n_agents", self.n_agents)
        check_count("iterations", self.iterations, minimum=0)
        check_positive("t0", self.t0)
        if not 0.0 < self.cooling_alpha < 1.0:
            raise ParameterError(f"cooling_alpha must be in (0, 1), got {self.cooling_alpha}")


@dataclass(frozen=True)
class BehaviorWeights:
    """Mixing weights of the swarm forces plus the step-inertia term."""

    separation: float
    alignment: float
    cohesion: float
    food: float
    enemy: float
    inertia: float

    @classmethod
    def at(cls, progress: float) -> "BehaviorWeights":
        """Schedule: crowd forces fade with progress, attraction grows.

        ``progress`` runs from 0 (first iteration) to 1 (last); early
        iterations explore, late ones refine around the best point.
        """
        tau = min(max(progress, 0.0), 1.0)
        fade = 1.0 - tau
        return cls(
            separation=0.1 + 0.9 * fade,
            alignment=0.1 + 0.9 * fade,
            cohesion=0.1 + 0.9 * fade,
            food=0.1 + 0.9 * tau,
            enemy=0.1 * fade,
            inertia=0.9 - 0.5 * tau,
        )


@dataclass
class SwarmState:
    """Snapshot of the swarm at the start of an iteration.

    Proposals for every agent are computed against the same snapshot, so
    evaluating agents concurrently cannot change the outcome.
    """

    positions: np.ndarray
    steps: np.ndarray
    food: np.ndarray
    enemy: np.ndarray
    temperature: float
    iteration: int
    neighborhood_radius: float


def neighborhood_radius(iteration: int, total: int, start: float = 0.5, end: float = 0.1) -> float:
    """Linear shrink from ``start`` to ``end`` over ``total`` iterations."""
    if total <= 1:
        return start
    frac = (iteration - 1) / (total - 1)
    return start + (end - start) * min(max(frac, 0.0), 1.0)


def levy_step(dim: int, rng: np.random.Generator, beta: float = _LEVY_BETA,
              scale: float = _LEVY_SCALE) -> np.ndarray:
    """Heavy-tailed random step (Mantegna construction)."""
    sigma = (math.gamma(1 + beta) * math.sin(math.pi * beta / 2)
             / (math.gamma((1 + beta) / 2) * beta * 2 ** ((beta - 1) / 2))) ** (1 / beta)
    u = rng.normal(0.0, sigma, size=dim)
    v = rng.normal(0.0, 1.0, size=dim)
    return scale * u / np.abs(v) ** (1 / beta)


def dragonfly_step(state: SwarmState, agent: int, weights: BehaviorWeights,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Propose a new position for one agent; returns ``(position, step)``.

    With at least one neighbor inside the radius the step is

        inertia * step_old + s * S + a * A + c * C + f * F + e * E

    where S = -sum(X - X_j), A = mean neighbor step, C = mean neighbor
    position - X, F = food - X, and E = X - enemy. Without neighbors the
    agent takes a Levy step. Positions are clamped to the unit cube and the
    returned step is the clamped displacement.
    """
    x = state.positions[agent]
    diffs = state.positions - x
    dist = np.sqrt(np.sum(diffs ** 2, axis=1))
    neighbor_mask = (dist <= state.neighborhood_radius)
    neighbor_mask[agent] = False

    if neighbor_mask.any():
        neighbors = state.positions[neighbor_mask]
        separation = -np.sum(x - neighbors, axis=0)
        alignment = state.steps[neighbor_mask].mean(axis=0)
        cohesion = neighbors.mean(axis=0) - x
        food = state.food - x
        enemy = x - state.enemy
        step = (weights.inertia * state.steps[agent]
                + weights.separation * separation
                + weights.alignment * alignment
                + weights.cohesion * cohesion
                + weights.food * food
                + weights.enemy * enemy)
    else:
        step = levy_step(x.size, rng)

    new = np.clip(x + step, 0.0, 1.0)
    return new, new - x


def sa_accept(delta_fitness: float, temperature: float, rng: np.random.Generator) -> bool:
    """Metropolis rule: improvements always pass, worsenings pass with
    probability exp(-delta / temperature)."""
    if temperature <= 0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    if delta_fitness < 0:
        return True
    return bool(rng.random() < math.exp(-delta_fitness / temperature))


def sa_fitness(hp: Hyperparameters, X, y=None, mask=None, seed: int = 0,
               train_fraction: float = 0.8) -> float:
    """Misclassification percentage of the full ensemble on an inner split.

    Trains on a stratified ``train_fraction`` share of the (masked) data and
    returns ``100 * errors / total`` on the held-out rest.
    """
    if isinstance(X, FlowDataset):
        X, y = X.values, X.labels
    X = as_matrix(X)
    y = as_labels(y, X.shape[0])
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        X = X[:, mask]

    train_idx, test_idx = _inner_split(y, train_fraction, seed)
    model = VotingEnsemble.from_hyperparameters(hp, random_state=seed)
    model.fit(X[train_idx], y[train_idx])
    pred = model.predict(X[test_idx])
    return 100.0 * float(np.mean(pred != y[test_idx]))


def _inner_split(y: np.ndarray, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = rng_stream(seed, 0x1717, 2)
    train_parts, test_parts = [], []
    for cls in (0, 1):
        cls_idx = np.flatnonzero(y == cls)
        if cls_idx.size < 2:
            raise InsufficientDataError(f"class {cls} has {cls_idx.size} rows, cannot split")
        n_train = int(math.floor(train_fraction * cls_idx.size + 0.5))
        n_train = min(max(n_train, 1), cls_idx.size - 1)
        shuffled = rng.permutation(cls_idx)
        train_parts.append(shuffled[:n_train])
        test_parts.append(shuffled[n_train:])
    return np.sort(np.concatenate(train_parts)), np.sort(np.concatenate(test_parts))


def tune(X, y=None, mask=None, space: ParamSpace | None = None,
         sa: SaParams = SaParams(), seed: int = 0,
         voting: str = "soft") -> tuple[Hyperparameters, list[dict]]:
    """Run the annealed swarm search; returns the best parameters ever
    evaluated and the best-so-far trace (one record per iteration).
    """
    if isinstance(X, FlowDataset):
        X, y = X.values, X.labels
    space = space if space is not None else ParamSpace.default()

    rng_init = rng_stream(seed, _INIT)
    positions = rng_init.random((sa.n_agents, space.dim))
    steps = np.zeros_like(positions)

    def evaluate(u: np.ndarray) -> float:
        return sa_fitness(space.denormalize(u, voting), X, y, mask, seed)

    fits = np.array([evaluate(p) for p in positions])
    best_i = int(np.argmin(fits))
    best_fit = float(fits[best_i])
    best_u = positions[best_i].copy()

    temperature = sa.t0
    trace = [{"iteration": 0, "best_fitness": best_fit, "temperature": temperature}]

    for it in range(1, sa.iterations + 1):
        weights = BehaviorWeights.at((it - 1) / max(sa.iterations - 1, 1))
        snapshot = SwarmState(
            positions=positions.copy(),
            steps=steps.copy(),
            food=positions[int(np.argmin(fits))].copy(),
            enemy=positions[int(np.argmax(fits))].copy(),
            temperature=temperature,
            iteration=it,
            neighborhood_radius=neighborhood_radius(it, sa.iterations,
                                                    sa.radius_start, sa.radius_end),
        )
        for a in range(sa.n_agents):
            rng = rng_stream(seed, _AGENT, it, a)
            proposal, step = dragonfly_step(snapshot, a, weights, rng)
            f_new = evaluate(proposal)
            if f_new < best_fit:
                best_fit = float(f_new)
                best_u = proposal.copy()
            if sa_accept(f_new - fits[a], temperature, rng):
                positions[a] = proposal
                steps[a] = step
                fits[a] = f_new
        temperature *= sa.cooling_alpha
        trace.append({"iteration": it, "best_fitness": best_fit, "temperature": temperature})

    return space.denormalize(best_u, voting), trace

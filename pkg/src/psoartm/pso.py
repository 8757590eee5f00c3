"""Maximizing particle swarm optimization over the unit hypercube.

Particles are moved one at a time and the global best is refreshed as soon
as a particle improves on it, so later particles of the same generation are
already pulled towards the new best.  The evaluation budget ``n_fes``
counts every objective call, including the initial population.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence, TextIO

import numpy as np

Objective = Callable[[np.ndarray], float]
Harvest = Callable[[np.ndarray, float], None]


@dataclass(frozen=True)
class PsoParams:
    """Swarm settings.

    ``c1`` weighs the pull towards the global best and ``c2`` the pull
    towards the particle's own best.  With ``literal_position_update`` the
    position moves by the velocity from before this step's update.
    """

    dim: int
    pop_size: int = 200
    c1: float = 2.0
    c2: float = 2.0
    inertia: float = 0.7
    n_fes: int = 10_000
    seed: Optional[int] = None
    literal_position_update: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.pop_size < 1:
            raise ValueError(f"pop_size must be >= 1, got {self.pop_size}")
        if self.n_fes < self.pop_size:
            raise ValueError(f"n_fes ({self.n_fes}) must be >= pop_size ({self.pop_size})")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("c1 and c2 must be non-negative")
        if not 0.0 <= self.inertia <= 1.0:
            raise ValueError(f"inertia must lie in [0, 1], got {self.inertia}")


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_fitness: float = -math.inf


@dataclass
class SwarmState:
    particles: list[Particle]
    global_best_position: np.ndarray
    global_best_fitness: float = -math.inf
    evaluations: int = 0
    history: list[float] = field(default_factory=list)


class RunResult(NamedTuple):
    best_position: np.ndarray
    best_fitness: float
    history: list[float]


def _evaluate(state: SwarmState, particle: Particle, objective: Objective, harvest: Optional[Harvest]) -> None:
    x = particle.position
    f = float(objective(x))
    state.evaluations += 1
    if harvest is not None:
        harvest(x, f)
    # ">=" so equal fitness replaces the incumbent
    if f >= particle.best_fitness:
        particle.best_position = x.copy()
        particle.best_fitness = f
    if f >= state.global_best_fitness:
        state.global_best_position = x.copy()
        state.global_best_fitness = f


def initialize(
    params: PsoParams,
    objective: Objective,
    rng: np.random.Generator,
    harvest: Optional[Harvest] = None,
) -> SwarmState:
    """Uniform random positions, zero velocities, one evaluation per particle."""
    positions = rng.random((params.pop_size, params.dim))
    particles = [
        Particle(positions[i].copy(), np.zeros(params.dim), positions[i].copy())
        for i in range(params.pop_size)
    ]
    state = SwarmState(particles, positions[0].copy())
    for particle in particles:
        _evaluate(state, particle, objective, harvest)
    state.history.append(state.global_best_fitness)
    return state


def step(
    state: SwarmState,
    objective: Objective,
    params: PsoParams,
    rng: np.random.Generator,
    harvest: Optional[Harvest] = None,
) -> SwarmState:
    """Move and re-evaluate particles in order until the generation or the budget ends."""
    remaining = params.n_fes - state.evaluations
    if remaining <= 0:
        return state
    n_moves = min(remaining, len(state.particles))
    draws = rng.random((n_moves, 2, params.dim))
    for particle, (r1, r2) in zip(state.particles[:n_moves], draws):
        x = particle.position
        old_velocity = particle.velocity
        velocity = (
            params.inertia * old_velocity
            + params.c1 * r1 * (state.global_best_position - x)
            + params.c2 * r2 * (particle.best_position - x)
        )
        moved = x + (old_velocity if params.literal_position_update else velocity)
        np.clip(moved, 0.0, 1.0, out=moved)
        particle.velocity = velocity
        particle.position = moved
        _evaluate(state, particle, objective, harvest)
    state.history.append(state.global_best_fitness)
    return state


def run(params: PsoParams, objective: Objective, harvest: Optional[Harvest] = None) -> RunResult:
    """Optimize ``objective`` until ``params.n_fes`` evaluations are spent.

    ``harvest(position, fitness)`` is called right after every evaluation.
    ``history`` holds the global best after initialization and after each
    generation.
    """
    rng = np.random.default_rng(params.seed)
    state = initialize(params, objective, rng, harvest)
    while state.evaluations < params.n_fes:
        step(state, objective, params, rng, harvest)
    return RunResult(state.global_best_position.copy(), state.global_best_fitness, list(state.history))


def write_history_csv(history: Sequence[float], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(("generation", "best_fitness"))
    for gen, value in enumerate(history):
        writer.writerow((gen, repr(float(value))))

"""Social spider algorithm: vibration mechanics and the iteration loop.

The population is held as a set of arrays (one row per spider) so the
inner loop stays vectorized. The single-spider operations below are thin
views over the same kernels and exist mostly for inspection and testing.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

SIGMA_FLOOR = 1e-30
DEFAULT_C = -1e-100


class ConfigurationError(ValueError):
    """Raised when run parameters are invalid, before any evaluation happens."""


class NumericFailure(FloatingPointError):
    """Raised when a spider position becomes non-finite."""


@dataclass(frozen=True)
class SsaParams:
    pop_size: int
    r_a: float
    p_c: float
    p_m: float
    intensity_floor_c: float = DEFAULT_C
    seed: int = 0

    def __post_init__(self):
        if int(self.pop_size) != self.pop_size or self.pop_size < 2:
            raise ConfigurationError(f"pop_size must be an integer >= 2, got {self.pop_size!r}")
        if not (self.r_a > 0 and math.isfinite(self.r_a)):
            raise ConfigurationError(f"r_a must be positive and finite, got {self.r_a!r}")
        if not 0 < self.p_c < 1:
            raise ConfigurationError(f"p_c must lie in (0, 1), got {self.p_c!r}")
        if not 0 < self.p_m < 1:
            raise ConfigurationError(f"p_m must lie in (0, 1), got {self.p_m!r}")
        if not math.isfinite(self.intensity_floor_c):
            raise ConfigurationError("intensity_floor_c must be finite")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")

    def check_against(self, infimum: float) -> None:
        if not self.intensity_floor_c < infimum:
            raise ConfigurationError(
                f"intensity_floor_c={self.intensity_floor_c!r} is not below the "
                f"objective infimum {infimum!r}"
            )

    def as_tuple(self):
        return (self.pop_size, self.r_a, self.p_c, self.p_m)


@dataclass
class Vibration:
    source_position: np.ndarray
    intensity: float

    def __post_init__(self):
        self.source_position = np.asarray(self.source_position, dtype=float)
        if not (math.isfinite(self.intensity) and self.intensity >= 0):
            raise ValueError(f"vibration intensity must be finite and >= 0, got {self.intensity!r}")


@dataclass
class Spider:
    position: np.ndarray
    fitness: float
    previous_position: np.ndarray
    following_vibration: Vibration
    inactive_degree: int
    mask: np.ndarray

    @classmethod
    def fresh(cls, position, mask=None) -> "Spider":
        """A spider at ``position`` that has not yet received any vibration."""
        position = np.asarray(position, dtype=float)
        if mask is None:
            mask = np.zeros(position.size, dtype=bool)
        return cls(
            position=position.copy(),
            fitness=math.inf,
            previous_position=position.copy(),
            following_vibration=Vibration(position.copy(), 0.0),
            inactive_degree=0,
            mask=np.asarray(mask, dtype=bool).copy(),
        )


# --------------------------------------------------------------------------
# scalar formulas


def source_intensity(fitness, c):
    """Intensity of a vibration emitted at a position of the given fitness.

    Computes ``log(1 / (fitness - c) + 1)`` with the natural logarithm.
    Accepts scalars or arrays.

    Raises
    ------
    ConfigurationError
        If any fitness is not strictly above ``c``.
    """
    f = np.asarray(fitness, dtype=float)
    gap = f - c
    if not np.all(np.isfinite(f)) or not math.isfinite(c):
        raise ValueError("fitness and c must be finite")
    if np.any(gap <= 0):
        raise ConfigurationError("fitness must exceed the intensity constant C (C not below infimum)")
    out = np.log1p(1.0 / gap)
    return float(out) if out.ndim == 0 else out


def mean_dimension_stddev(positions) -> float:
    """Average over dimensions of the population standard deviation (ddof=0)."""
    try:
        arr = np.asarray(positions, dtype=float)
    except ValueError as exc:
        raise ValueError("positions must all have the same length") from exc
    if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 1:
        raise ValueError("need at least two positions of equal, non-zero length")
    return float(arr.std(axis=0).mean())


def attenuated_intensity(intensity, distance, sigma_bar, r_a):
    """Vibration intensity after travelling ``distance`` over the web."""
    scale = max(float(sigma_bar), SIGMA_FLOOR) * r_a
    out = np.asarray(intensity, dtype=float) * np.exp(-np.asarray(distance, dtype=float) / scale)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# population kernels (row i = spider i)


def _select(stored_int, stored_pos, inactive, received_int, source_pos):
    """Update following vibrations in place; returns a bool array of changes."""
    best = np.argmax(received_int, axis=1)  # first maximum => lowest index wins ties
    rows = np.arange(received_int.shape[0])
    best_int = received_int[rows, best]
    changed = best_int > stored_int
    stored_int[changed] = best_int[changed]
    stored_pos[changed] = source_pos[best[changed]]
    inactive[changed] = 0
    inactive[~changed] += 1
    return changed


def _draw_masks(n, dim, p_m, rng):
    masks = rng.random((n, dim)) < p_m
    empty = ~masks.any(axis=1)
    if empty.any():
        idx = np.flatnonzero(empty)
        masks[idx, rng.integers(0, dim, size=idx.size)] = True
    return masks


def _update_masks(masks, inactive, p_c, p_m, rng):
    n, dim = masks.shape
    change = rng.random(n) < 1.0 - p_c ** inactive
    fresh = _draw_masks(n, dim, p_m, rng)
    masks[change] = fresh[change]
    inactive[change] = 0
    return change


def _following_positions(masks, target_pos, population, rng):
    n, dim = masks.shape
    pick = rng.integers(0, population.shape[0], size=(n, dim))
    random_coords = population[pick, np.arange(dim)]
    return np.where(masks, random_coords, target_pos)


def reflect_into(x, lower, upper):
    """Mirror coordinates back into ``[lower, upper]``.

    Equivalent to reflecting off whichever bound is violated until the
    value lands inside, but done in closed form via the period-2W fold.
    """
    width = upper - lower
    t = np.mod(x - lower, 2.0 * width)
    t = np.where(t > width, 2.0 * width - t, t)
    out = np.where((x < lower) | (x > upper), lower + t, x)
    return np.clip(out, lower, upper)


def _walk(position, previous, following, lower, upper, rng):
    n, dim = position.shape
    r = rng.random((n, 1))
    big_r = rng.random((n, dim))
    cand = position + r * (position - previous) + big_r * (following - position)
    if not np.all(np.isfinite(cand)):
        raise NumericFailure("non-finite spider position produced by random walk")
    return reflect_into(cand, lower, upper)


# --------------------------------------------------------------------------
# single-spider operations


def select_following_vibration(spider: Spider, received: Sequence[Vibration]) -> Spider:
    """Keep whichever is stronger: the stored vibration or the best received one.

    Ties keep the stored vibration; among equally strong received
    vibrations the first one wins. The inactive degree is reset when the
    following vibration changes and incremented otherwise.
    """
    if len(received) == 0:
        raise ValueError("no vibrations received")
    stored_int = np.array([spider.following_vibration.intensity])
    stored_pos = spider.following_vibration.source_position[None, :].copy()
    inactive = np.array([spider.inactive_degree])
    received_int = np.array([[v.intensity for v in received]])
    source_pos = np.stack([v.source_position for v in received])
    _select(stored_int, stored_pos, inactive, received_int, source_pos)
    spider.following_vibration = Vibration(stored_pos[0], float(stored_int[0]))
    spider.inactive_degree = int(inactive[0])
    return spider


def update_mask(spider: Spider, p_c: float, p_m: float, rng: np.random.Generator) -> Spider:
    """Regenerate the mask with probability ``1 - p_c**inactive_degree``.

    A regenerated mask has each bit set with probability ``p_m``; an
    all-zero draw gets one random bit forced on. Regenerating the mask also
    restarts the inactive degree, so a fresh mask is kept for a while.
    """
    masks = spider.mask[None, :].copy()
    inactive = np.array([spider.inactive_degree])
    _update_masks(masks, inactive, p_c, p_m, rng)
    spider.mask = masks[0]
    spider.inactive_degree = int(inactive[0])
    return spider


def generate_following_position(spider: Spider, population: Sequence[Spider], rng) -> np.ndarray:
    """Per dimension: the followed source coordinate, or (mask bit set) that
    coordinate of a uniformly drawn member of ``population``."""
    if len(population) == 0:
        raise ValueError("population is empty")
    pop = np.stack([s.position for s in population])
    return _following_positions(
        spider.mask[None, :], spider.following_vibration.source_position[None, :], pop, rng
    )[0]


def random_walk(spider: Spider, following_position, lower, upper, rng) -> np.ndarray:
    """Move the spider; updates ``previous_position`` and ``position`` and returns the new position."""
    lower = np.broadcast_to(np.asarray(lower, dtype=float), spider.position.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), spider.position.shape)
    if np.any(lower >= upper):
        raise ValueError("each lower bound must be below its upper bound")
    new = _walk(
        spider.position[None, :],
        spider.previous_position[None, :],
        np.asarray(following_position, dtype=float)[None, :],
        lower,
        upper,
        rng,
    )[0]
    spider.previous_position = spider.position
    spider.position = new
    return new


# --------------------------------------------------------------------------
# run state and loop


@dataclass
class SsaState:
    params: SsaParams
    position: np.ndarray
    previous: np.ndarray
    fitness: np.ndarray
    target_pos: np.ndarray
    target_int: np.ndarray
    inactive: np.ndarray
    mask: np.ndarray
    rng: np.random.Generator
    iteration: int = 0
    fe_count: int = 0
    best_position: np.ndarray | None = None
    best_fitness: float = math.inf

    @classmethod
    def initialize(cls, params: SsaParams, problem) -> "SsaState":
        rng = np.random.default_rng(params.seed)
        n, dim = params.pop_size, problem.dimension
        lower, upper = problem.lower, problem.upper
        position = lower + rng.random((n, dim)) * (upper - lower)
        return cls(
            params=params,
            position=position,
            previous=position.copy(),
            fitness=np.full(n, np.inf),
            target_pos=position.copy(),
            target_int=np.zeros(n),
            inactive=np.zeros(n, dtype=np.int64),
            mask=_draw_masks(n, dim, params.p_m, rng),
            rng=rng,
        )

    @property
    def spiders(self) -> list[Spider]:
        return [
            Spider(
                position=self.position[i].copy(),
                fitness=float(self.fitness[i]),
                previous_position=self.previous[i].copy(),
                following_vibration=Vibration(self.target_pos[i].copy(), float(self.target_int[i])),
                inactive_degree=int(self.inactive[i]),
                mask=self.mask[i].copy(),
            )
            for i in range(self.params.pop_size)
        ]


def step(state: SsaState, problem) -> SsaState:
    """Advance one iteration: evaluate, vibrate, change masks, walk."""
    p = state.params
    fitness = problem.evaluate_many(state.position)
    state.fitness = fitness
    state.fe_count += p.pop_size
    i_best = int(np.argmin(fitness))
    if fitness[i_best] < state.best_fitness:
        state.best_fitness = float(fitness[i_best])
        state.best_position = state.position[i_best].copy()

    intensity = source_intensity(fitness, p.intensity_floor_c)
    sigma_bar = mean_dimension_stddev(state.position)
    distance = np.abs(state.position[:, None, :] - state.position[None, :, :]).sum(axis=2)
    received = attenuated_intensity(intensity[None, :], distance, sigma_bar, p.r_a)
    _select(state.target_int, state.target_pos, state.inactive, received, state.position)

    _update_masks(state.mask, state.inactive, p.p_c, p.p_m, state.rng)
    following = _following_positions(state.mask, state.target_pos, state.position, state.rng)
    new = _walk(state.position, state.previous, following, problem.lower, problem.upper, state.rng)
    state.previous = state.position
    state.position = new
    state.iteration += 1
    return state


@dataclass
class RunRecord:
    """Best-so-far trace of one seeded run."""

    params: SsaParams
    problem: str
    budget_fes: int
    checkpoint_interval: int
    checkpoints: list[tuple[int, float]]
    final_best: float
    iterations: int
    fe_count: int
    run_index: int = 0
    setting_index: int = 0
    wall_time: float = field(default=0.0, compare=False)

    def payload(self) -> dict:
        """Everything except wall time; identical for identical inputs."""
        d = asdict(self)
        d.pop("wall_time")
        d["checkpoints"] = [[int(fe), float(v)] for fe, v in self.checkpoints]
        return d

    @classmethod
    def from_payload(cls, d: dict, wall_time: float = 0.0) -> "RunRecord":
        d = dict(d)
        d["params"] = SsaParams(**d["params"])
        d["checkpoints"] = [(int(fe), float(v)) for fe, v in d["checkpoints"]]
        return cls(**d, wall_time=wall_time)


def optimize(params: SsaParams, problem, budget_fes: int = 300_000, checkpoint_interval: int = 3000,
             run_index: int = 0, setting_index: int = 0) -> RunRecord:
    """Run the algorithm on ``problem`` until the evaluation budget is spent.

    Iterations continue while a full population evaluation still fits in
    the budget. The best-so-far fitness is recorded at every multiple of
    ``checkpoint_interval``; checkpoints beyond the last iteration carry the
    final value.
    """
    if budget_fes < params.pop_size:
        raise ConfigurationError("budget_fes must be at least pop_size")
    if checkpoint_interval <= 0 or budget_fes % checkpoint_interval:
        raise ConfigurationError("checkpoint_interval must be positive and divide budget_fes")
    params.check_against(problem.infimum)

    t0 = time.perf_counter()
    state = SsaState.initialize(params, problem)
    marks = list(range(checkpoint_interval, budget_fes + 1, checkpoint_interval))
    trace: list[tuple[int, float]] = []
    k = 0
    while state.fe_count + params.pop_size <= budget_fes:
        before, best_before = state.fe_count, state.best_fitness
        step(state, problem)
        while k < len(marks) and marks[k] <= state.fe_count:
            upto = marks[k] - before  # evaluations of this batch that precede the mark
            if upto >= params.pop_size:
                trace.append((marks[k], state.best_fitness))
            else:
                trace.append((marks[k], float(min(best_before, state.fitness[:upto].min(initial=np.inf)))))
            k += 1
    for fe in marks[k:]:
        trace.append((fe, state.best_fitness))

    return RunRecord(
        params=params,
        problem=problem.id,
        budget_fes=budget_fes,
        checkpoint_interval=checkpoint_interval,
        checkpoints=trace,
        final_best=state.best_fitness,
        iterations=state.iteration,
        fe_count=state.fe_count,
        run_index=run_index,
        setting_index=setting_index,
        wall_time=time.perf_counter() - t0,
    )

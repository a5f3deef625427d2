"""Eleven shifted-box benchmark functions (f1-f11), all minimized at the origin.

The shift moves the search box, not the function: problem ``fk`` searches
``[lo, hi]^D - s*o`` where ``o`` is a shared base shift vector and ``s`` a
per-function scale. The optimum therefore stays at an exactly representable
point while no longer sitting in the middle of the box.

All objective functions take a 2-D array (one point per row) and return one
value per row.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ConfigurationError

DEFAULT_SHIFT_SEED = 20050101
SHIFT_BASE_RANGE = (-100.0, 100.0)


def sphere(x):
    return np.sum(x**2, axis=1)


def cigar(x):
    return x[:, 0] ** 2 + 1e6 * np.sum(x[:, 1:] ** 2, axis=1)


def schwefel_1_2(x):
    return np.sum(np.cumsum(x, axis=1) ** 2, axis=1)


def schwefel_2_21(x):
    return np.max(np.abs(x), axis=1)


def rosenbrock(x):
    return np.sum(100.0 * (x[:, 1:] - x[:, :-1] ** 2) ** 2 + (x[:, :-1] - 1.0) ** 2, axis=1)


def modified_schwefel(x):
    d = x.shape[1]
    z = x + 420.9687
    g = np.empty_like(z)
    inside = np.abs(z) <= 500.0
    g[inside] = z[inside] * np.sin(np.sqrt(np.abs(z[inside])))
    hi = z > 500.0
    y = 500.0 - np.mod(z[hi], 500.0)
    g[hi] = y * np.sin(np.sqrt(np.abs(y))) - (z[hi] - 500.0) ** 2 / (1e4 * d)
    lo = z < -500.0
    y = np.mod(-z[lo], 500.0) - 500.0
    g[lo] = y * np.sin(np.sqrt(np.abs(y))) - (z[lo] + 500.0) ** 2 / (1e4 * d)
    return 418.9829 * d - np.sum(g, axis=1)


def rastrigin(x):
    return np.sum(x**2 - 10.0 * np.cos(2.0 * np.pi * x) + 10.0, axis=1)


def ackley(x):
    d = x.shape[1]
    a = -20.0 * np.exp(-0.2 * np.sqrt(np.sum(x**2, axis=1) / d))
    b = np.exp(np.sum(np.cos(2.0 * np.pi * x), axis=1) / d)
    return a - b + 20.0 + np.e


def griewank(x):
    i = np.arange(1, x.shape[1] + 1)
    return np.sum(x**2, axis=1) / 4000.0 - np.prod(np.cos(x / np.sqrt(i)), axis=1) + 1.0


def _scaffer_pair(a, b):
    r2 = a**2 + b**2
    return 0.5 + (np.sin(np.sqrt(r2)) ** 2 - 0.5) / (1.0 + 0.001 * r2) ** 2


def expanded_scaffer_f6(x):
    return np.sum(_scaffer_pair(x, np.roll(x, -1, axis=1)), axis=1)


_POW2 = 2.0 ** np.arange(1, 33)


def katsuura(x):
    d = x.shape[1]
    t = x[:, :, None] * _POW2
    inner = np.sum(np.abs(t - np.round(t)) / _POW2, axis=2)
    i = np.arange(1, d + 1)
    factor = 10.0 / d**2
    return factor * np.prod((1.0 + i * inner) ** (10.0 / d**1.2), axis=1) - factor


# id -> (name, objective, base half-width, shift scale, unimodal)
FUNCTIONS = {
    "f1": ("Generalized Sphere Function", sphere, 100.0, 1.0, True),
    "f2": ("Generalized Cigar Function", cigar, 100.0, 1.0, True),
    "f3": ("Schwefel's Function 1.2", schwefel_1_2, 100.0, 1.0, True),
    "f4": ("Schwefel's Function 2.21", schwefel_2_21, 100.0, 1.0, True),
    "f5": ("Generalized Rosenbrock's Function", rosenbrock, 100.0, 1.0, False),
    "f6": ("Modified Schwefel's Function", modified_schwefel, 1000.0, 10.0, False),
    "f7": ("Generalized Rastrigin's Function", rastrigin, 5.12, 0.0512, False),
    "f8": ("Ackley's Function", ackley, 32.0, 0.32, False),
    "f9": ("Generalized Griewank's Function", griewank, 600.0, 6.0, False),
    "f10": ("Scaffer's Function F6", expanded_scaffer_f6, 100.0, 1.0, False),
    "f11": ("Katsuura's Function", katsuura, 5.12, 0.0512, False),
}

PROBLEM_IDS = tuple(FUNCTIONS)


@dataclass(frozen=True)
class ShiftVector:
    o: np.ndarray
    scale_tag: float

    @property
    def offset(self) -> np.ndarray:
        return self.scale_tag * self.o


@dataclass(frozen=True, eq=False)
class BenchmarkProblem:
    id: str
    name: str
    dimension: int
    base_range: tuple[float, float]
    shift: ShiftVector
    unimodal: bool
    infimum: float = 0.0

    @property
    def modality_class(self) -> str:
        return "unimodal" if self.unimodal else "multimodal"

    @property
    def lower(self) -> np.ndarray:
        return self.base_range[0] - self.shift.offset

    @property
    def upper(self) -> np.ndarray:
        return self.base_range[1] - self.shift.offset

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= self.lower) & (x <= self.upper)))

    def evaluate_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.dimension:
            raise ValueError(f"{self.id}: expected points of dimension {self.dimension}, got shape {xs.shape}")
        if not self.contains(xs):
            raise ValueError(f"{self.id}: point outside the search box")
        return FUNCTIONS[self.id][1](xs)

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise ValueError("evaluate takes a single point; use evaluate_many for batches")
        return float(self.evaluate_many(x[None, :])[0])

    __call__ = evaluate


def evaluate(problem: BenchmarkProblem, x) -> float:
    return problem.evaluate(x)


def generate_shift(dimension: int, seed: int = DEFAULT_SHIFT_SEED) -> np.ndarray:
    """Base shift drawn uniformly from the central 80% of [-100, 100]."""
    lo, hi = SHIFT_BASE_RANGE
    half = 0.4 * (hi - lo)
    mid = 0.5 * (lo + hi)
    return np.random.default_rng(seed).uniform(mid - half, mid + half, size=dimension)


def read_shift_file(path) -> np.ndarray:
    try:
        text = Path(path).read_text()
        values = [float(line) for line in text.split("\n") if line.strip()]
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read shift vector file {path}: {exc}") from exc
    return np.asarray(values, dtype=float)


def write_shift_file(path, o) -> None:
    Path(path).write_text("".join(f"{v:.17e}\n" for v in np.asarray(o, dtype=float)))


def resolve_shift(dimension: int, shift_source=None) -> np.ndarray:
    """Turn a seed (int), a file path, or None (default seed) into a base shift."""
    if shift_source is None:
        o = generate_shift(dimension)
    elif isinstance(shift_source, (int, np.integer)) and not isinstance(shift_source, bool):
        o = generate_shift(dimension, int(shift_source))
    else:
        o = read_shift_file(shift_source)
    if o.shape != (dimension,):
        raise ConfigurationError(f"shift vector has {o.size} entries, expected {dimension}")
    lo, hi = SHIFT_BASE_RANGE
    if np.any(o <= lo) or np.any(o >= hi):
        raise ConfigurationError("shift vector entries must lie strictly inside [-100, 100]")
    return o


def make_problem(problem_id: str, dimension: int, o) -> BenchmarkProblem:
    if problem_id not in FUNCTIONS:
        raise ConfigurationError(f"unknown problem {problem_id!r}; expected one of {', '.join(PROBLEM_IDS)}")
    name, _, half, scale, unimodal = FUNCTIONS[problem_id]
    return BenchmarkProblem(
        id=problem_id,
        name=name,
        dimension=dimension,
        base_range=(-half, half),
        shift=ShiftVector(np.asarray(o, dtype=float), scale),
        unimodal=unimodal,
    )


def make_suite(dimension: int = 30, shift_source=None, ids=PROBLEM_IDS) -> list[BenchmarkProblem]:
    """Build the benchmark problems sharing one base shift vector.

    Parameters
    ----------
    dimension : int
        Problem dimension, at least 2.
    shift_source : int, path or None
        Seed for the shift generator, or a text file with one value per line.
        ``None`` uses the default seed.
    ids : sequence of str
        Subset of ``f1`` .. ``f11`` to build, in the given order.
    """
    if dimension < 2:
        raise ConfigurationError("dimension must be at least 2")
    o = resolve_shift(dimension, shift_source)
    return [make_problem(pid, dimension, o) for pid in ids]


def optimum_point(problem: BenchmarkProblem) -> np.ndarray:
    """Known global minimizer (origin, or all-ones for Rosenbrock)."""
    if problem.id == "f5":
        return np.ones(problem.dimension)
    return np.zeros(problem.dimension)

"""Parameter grids, seeded repeated runs and resumable sweeps."""

from __future__ import annotations

import hashlib
import itertools
import logging
import struct
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .benchmarks import make_problem, resolve_shift
from .core import DEFAULT_C, ConfigurationError, RunRecord, SsaParams, optimize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParameterGrid:
    pop_sizes: Sequence[int]
    r_as: Sequence[float]
    p_cs: Sequence[float]
    p_ms: Sequence[float]

    @property
    def size(self) -> int:
        return len(self.pop_sizes) * len(self.r_as) * len(self.p_cs) * len(self.p_ms)


PAPER_GRID = ParameterGrid(
    pop_sizes=(10, 20, 30, 40, 50, 70),
    r_as=(0.2, 0.5, 1.0, 2.0, 4.0, 8.0),
    p_cs=(0.1, 0.3, 0.5, 0.7, 0.9),
    p_ms=(0.1, 0.3, 0.5, 0.7, 0.9),
)
RECOMMENDED = (30, 1.0, 0.7, 0.1)


def expand_grid(grid: ParameterGrid, intensity_floor_c: float = DEFAULT_C) -> list[SsaParams]:
    """Cartesian product of the axes, pop size varying slowest."""
    for name in ("pop_sizes", "r_as", "p_cs", "p_ms"):
        if len(getattr(grid, name)) == 0:
            raise ConfigurationError(f"grid axis {name} is empty")
    return [
        SsaParams(int(n), float(ra), float(pc), float(pm), intensity_floor_c)
        for n, ra, pc, pm in itertools.product(grid.pop_sizes, grid.r_as, grid.p_cs, grid.p_ms)
    ]


def derive_seed(master_seed: int, setting_index: int, problem_id: str, run_index: int,
                paired: bool = False) -> int:
    """Stable 64-bit seed for one run.

    With ``paired`` the setting index is left out, so every setting sees the
    same seeds on a given (problem, run) pair.
    """
    si = -1 if paired else setting_index
    msg = struct.pack("<QqQ", master_seed % 2**64, si, run_index) + problem_id.encode()
    return int.from_bytes(hashlib.blake2b(msg, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class RunSpec:
    params: SsaParams
    setting_index: int
    problem_id: str
    run_index: int
    budget_fes: int
    checkpoint_interval: int
    dimension: int
    shift: tuple[float, ...]

    @property
    def key(self) -> tuple[int, str, int]:
        return (self.setting_index, self.problem_id, self.run_index)


def run_spec(spec: RunSpec) -> RunRecord:
    problem = make_problem(spec.problem_id, spec.dimension, np.asarray(spec.shift))
    return optimize(spec.params, problem, spec.budget_fes, spec.checkpoint_interval,
                    run_index=spec.run_index, setting_index=spec.setting_index)


@dataclass
class Summary:
    mean: float
    std: float
    best: float
    worst: float
    median: float
    n: int

    COLUMNS = ("Mean", "Std. Div.", "Best", "Worst", "Median")

    def row(self) -> tuple[float, float, float, float, float]:
        return (self.mean, self.std, self.best, self.worst, self.median)


def summarize(finals) -> Summary:
    """Mean, sample std (N-1), min, max and median of final best values."""
    x = np.asarray([r.final_best if isinstance(r, RunRecord) else r for r in finals], dtype=float)
    if x.size == 0:
        raise ValueError("need at least one value")
    std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return Summary(float(np.mean(x)), std, float(x.min()), float(x.max()), float(np.median(x)), int(x.size))


@dataclass
class SweepResult:
    settings: list[SsaParams]
    problems: list[str]
    repeats: int
    records: dict[tuple[int, str], list[RunRecord]] = field(default_factory=dict)
    failures: dict[tuple[int, str, int], str] = field(default_factory=dict)
    new_runs: int = 0

    def cell(self, setting_index: int, problem_id: str) -> list[RunRecord]:
        return self.records.get((setting_index, problem_id), [])

    def summary(self, setting_index: int, problem_id: str) -> Summary:
        return summarize(self.cell(setting_index, problem_id))

    def failure_count(self, setting_index: int, problem_id: str) -> int:
        return sum(1 for (s, p, _) in self.failures if (s, p) == (setting_index, problem_id))

    def missing_cells(self) -> list[tuple[int, str]]:
        return [(s, p) for s in range(len(self.settings)) for p in self.problems if not self.cell(s, p)]

    def all_records(self) -> list[RunRecord]:
        return [r for key in sorted(self.records) for r in self.records[key]]

    def mean_scores(self) -> np.ndarray:
        """(problems x settings) matrix of mean final fitness, NaN for empty cells."""
        m = np.full((len(self.problems), len(self.settings)), np.nan)
        for j in range(len(self.settings)):
            for i, pid in enumerate(self.problems):
                cell = self.cell(j, pid)
                if cell:
                    m[i, j] = np.mean([r.final_best for r in cell])
        return m


def build_specs(settings, problem_ids, repeats, budget_fes, checkpoint_interval, dimension, shift,
                master_seed, paired=False) -> list[RunSpec]:
    if repeats < 1:
        raise ConfigurationError("repeats must be at least 1")
    if budget_fes < max(s.pop_size for s in settings):
        raise ConfigurationError("budget_fes must be at least the largest pop_size")
    shift = tuple(float(v) for v in shift)
    specs = []
    for si, params in enumerate(settings):
        for pid in problem_ids:
            for run in range(repeats):
                seed = derive_seed(master_seed, si, pid, run, paired)
                specs.append(RunSpec(replace(params, seed=seed), si, pid, run, budget_fes,
                                     checkpoint_interval, dimension, shift))
    return specs


def execute_sweep(settings: list[SsaParams], problem_ids: Sequence[str], repeats: int, budget_fes: int,
                  checkpoint_interval: int = 3000, *, dimension: int = 30, shift=None, master_seed: int = 0,
                  workers: int = 1, paired: bool = False, store=None, progress=None) -> SweepResult:
    """Run every (setting x problem x repeat) once.

    Parameters
    ----------
    store : RecordStore, optional
        When given, finished runs are persisted one file per run and runs
        already present in the store are loaded instead of re-executed.
    progress : callable, optional
        Called with each completed ``RunRecord``.

    Failed runs are retried once; a second failure is recorded in
    ``SweepResult.failures`` and left out of the statistics.
    """
    if shift is None:
        shift = resolve_shift(dimension)
    specs = build_specs(settings, list(problem_ids), repeats, budget_fes, checkpoint_interval,
                        dimension, shift, master_seed, paired)
    result = SweepResult(list(settings), list(problem_ids), repeats)
    done: dict[tuple[int, str, int], RunRecord] = {}
    if store is not None:
        existing, failed = store.load(specs)
        done.update(existing)
        result.failures.update(failed)
    todo = [s for s in specs if s.key not in done and s.key not in result.failures]

    def finish(spec, rec=None, error=None):
        if rec is not None:
            done[spec.key] = rec
            if store is not None:
                store.save(spec, rec)
            if progress is not None:
                progress(rec)
        else:
            log.warning("run %s failed twice: %s", spec.key, error)
            result.failures[spec.key] = error
            if store is not None:
                store.save_failure(spec, error)

    if workers <= 1:
        for spec in todo:
            rec, err = _attempt_twice(spec)
            finish(spec, rec, err)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pending = {pool.submit(run_spec, s): (s, 0) for s in todo}
            while pending:
                finished, _ = wait(pending, return_when=FIRST_COMPLETED)
                for fut in finished:
                    spec, tries = pending.pop(fut)
                    try:
                        finish(spec, fut.result())
                    except Exception as exc:  # noqa: BLE001 - any worker failure gets one retry
                        if tries == 0:
                            pending[pool.submit(run_spec, spec)] = (spec, 1)
                        else:
                            finish(spec, error=f"{type(exc).__name__}: {exc}")
    result.new_runs = len(todo)

    for spec in specs:
        rec = done.get(spec.key)
        if rec is not None:
            result.records.setdefault((spec.setting_index, spec.problem_id), []).append(rec)
    if store is not None:
        store.write_index(specs, done, result.failures)
    return result


def _attempt_twice(spec):
    err = None
    for _ in range(2):
        try:
            return run_spec(spec), None
        except Exception as exc:  # noqa: BLE001
            err = f"{type(exc).__name__}: {exc}"
    return None, err

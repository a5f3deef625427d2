"""Rank-based comparison of parameter settings and success-rate curves.

Settings are treatments and benchmark functions are blocks. The Friedman
test checks whether any setting differs; if so, every setting is compared
against the best-ranked one (the control) and the Hochberg step-up
procedure decides which are significantly worse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .core import ConfigurationError


@dataclass
class RankTable:
    ranks: np.ndarray  # (n_functions, n_settings)
    functions: list[str] = field(default_factory=list)

    @property
    def n_blocks(self) -> int:
        return self.ranks.shape[0]

    @property
    def n_treatments(self) -> int:
        return self.ranks.shape[1]

    @property
    def mean_ranks(self) -> np.ndarray:
        return self.ranks.mean(axis=0)


@dataclass
class FriedmanResult:
    statistic: float
    dof: int
    p_value: float
    mean_ranks: np.ndarray
    n_blocks: int

    @property
    def n_treatments(self) -> int:
        return len(self.mean_ranks)


@dataclass
class PosthocResult:
    control: int
    alpha: float
    z: np.ndarray
    p_values: np.ndarray
    rejected: np.ndarray
    applicable: bool = True
    note: str = ""

    @property
    def accepted(self) -> list[int]:
        """Indices of the control plus every setting not found significantly worse."""
        return [j for j in range(len(self.rejected)) if not self.rejected[j]]


@dataclass
class SuccessCurve:
    fes: np.ndarray
    rates: np.ndarray
    threshold: float
    n_runs: int


def rank_settings(scores, functions: Sequence[str] | None = None) -> RankTable:
    """Rank settings within each function; rank 1 is the smallest score.

    ``scores`` is a (functions x settings) matrix. Ties get average ranks.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.ndim == 1:
        scores = scores[None, :]
    if scores.ndim != 2 or scores.size == 0:
        raise ValueError("scores must be a non-empty functions x settings matrix")
    if np.isnan(scores).any():
        raise ValueError("score matrix has missing cells")
    ranks = np.vstack([sps.rankdata(row, method="average") for row in scores])
    return RankTable(ranks, list(functions) if functions is not None else [])


def friedman_test(table: RankTable) -> FriedmanResult:
    n, k = table.ranks.shape
    if n < 2 or k < 2:
        raise ValueError("Friedman test needs at least 2 blocks and 2 treatments")
    rbar = table.mean_ranks
    stat = 12.0 * n / (k * (k + 1)) * (np.sum(rbar**2) - k * (k + 1) ** 2 / 4.0)
    stat = max(float(stat), 0.0)
    if np.allclose(rbar, rbar[0], rtol=0, atol=1e-12):
        stat = 0.0
    p = float(sps.chi2.sf(stat, k - 1)) if stat > 0 else 1.0
    return FriedmanResult(stat, k - 1, p, rbar, n)


def hochberg_reject(p_values, alpha: float) -> np.ndarray:
    """Hochberg step-up over a family of hypotheses.

    With p-values sorted ascending, find the largest i such that
    p_(i) <= alpha / (m - i + 1) and reject hypotheses 1..i.
    """
    if not 0 < alpha < 1:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha!r}")
    p = np.asarray(p_values, dtype=float)
    m = p.size
    rejected = np.zeros(m, dtype=bool)
    if m == 0:
        return rejected
    order = np.argsort(p, kind="stable")
    thresholds = alpha / (m - np.arange(m))  # i = 1..m -> alpha/(m-i+1)
    ok = np.flatnonzero(p[order] <= thresholds)
    if ok.size:
        rejected[order[: ok[-1] + 1]] = True
    return rejected


def hochberg_posthoc(result: FriedmanResult, alpha: float = 0.05) -> PosthocResult:
    """Compare every setting with the best-ranked control (one-sided)."""
    if not 0 < alpha < 1:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha!r}")
    k, n = result.n_treatments, result.n_blocks
    rbar = np.asarray(result.mean_ranks, dtype=float)
    control = int(np.argmin(rbar))
    se = np.sqrt(k * (k + 1) / (6.0 * n))
    z = (rbar - rbar[control]) / se
    p = sps.norm.sf(z)
    p[control] = 1.0
    rejected = np.zeros(k, dtype=bool)
    if result.p_value > alpha:
        return PosthocResult(control, alpha, z, p, rejected, applicable=False,
                             note="Friedman null not rejected; no setting is significantly worse")
    others = np.array([j for j in range(k) if j != control])
    rejected[others] = hochberg_reject(p[others], alpha)
    return PosthocResult(control, alpha, z, p, rejected)


def success_bits(trace_values, threshold: float) -> np.ndarray:
    return np.asarray(trace_values, dtype=float) < threshold


def success_curve(records, threshold: float = 1e-8) -> SuccessCurve:
    """Fraction of runs whose best-so-far is below ``threshold`` at each checkpoint."""
    if threshold <= 0:
        raise ConfigurationError("threshold must be positive")
    if not records:
        raise ValueError("no records")
    grid = [fe for fe, _ in records[0].checkpoints]
    bits = []
    for rec in records:
        if [fe for fe, _ in rec.checkpoints] != grid:
            raise ValueError("records do not share a checkpoint grid")
        bits.append(success_bits([v for _, v in rec.checkpoints], threshold))
    rates = np.mean(bits, axis=0)
    return SuccessCurve(np.asarray(grid), rates, threshold, len(records))


def sensitivity_table(posthoc: PosthocResult, settings, r_as, p_cs, p_ms) -> dict:
    """Accepted population sizes per (p_m, p_c, r_a) cell; ``"-"`` when none."""
    cells: dict[tuple[float, float, float], list[int]] = {
        (pm, pc, ra): [] for pm in p_ms for pc in p_cs for ra in r_as
    }
    for j in posthoc.accepted:
        s = settings[j]
        key = (s.p_m, s.p_c, s.r_a)
        if key in cells:
            cells[key].append(s.pop_size)
    return {key: "/".join(str(v) for v in sorted(pops)) if pops else "-" for key, pops in cells.items()}

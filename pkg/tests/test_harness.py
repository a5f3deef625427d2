import itertools
from dataclasses import replace

import numpy as np
import pytest

from socialspider import harness
from socialspider.benchmarks import make_problem, resolve_shift
from socialspider.core import ConfigurationError, optimize
from socialspider.harness import (
    PAPER_GRID,
    ParameterGrid,
    derive_seed,
    execute_sweep,
    expand_grid,
    summarize,
)
from socialspider.report import RecordStore

DIM = 4
SHIFT = resolve_shift(DIM, 3)


def small_settings():
    return expand_grid(ParameterGrid([5, 8], [1.0], [0.7], [0.1, 0.5]))


def sweep(**kw):
    args = dict(dimension=DIM, shift=SHIFT, master_seed=17)
    args.update(kw)
    return execute_sweep(small_settings(), ["f1", "f8"], 3, 200, 40, **args)


def test_expand_grid_counts_and_order():
    assert len(expand_grid(PAPER_GRID)) == 900 == PAPER_GRID.size
    assert len(expand_grid(ParameterGrid([30], [1.0], [0.7], [0.1]))) == 1
    g = ParameterGrid([10, 20], [0.5, 1.0], [0.3, 0.7], [0.1, 0.9])
    got = [s.as_tuple() for s in expand_grid(g)]
    assert len(got) == 16
    assert got == list(itertools.product(*[g.pop_sizes, g.r_as, g.p_cs, g.p_ms]))
    assert got == sorted(got)


def test_expand_grid_empty_axis():
    with pytest.raises(ConfigurationError):
        expand_grid(ParameterGrid([], [1.0], [0.7], [0.1]))


def test_derive_seed_stable_and_collision_free():
    assert derive_seed(0, 0, "f1", 0) == derive_seed(0, 0, "f1", 0)
    assert derive_seed(0, 0, "f1", 0) != derive_seed(1, 0, "f1", 0)
    assert derive_seed(5, 3, "f1", 2, paired=True) == derive_seed(5, 7, "f1", 2, paired=True)
    seeds = {derive_seed(2015, s, f"f{p}", r) for s in range(900) for p in range(1, 12) for r in range(51)}
    assert len(seeds) == 900 * 11 * 51
    assert all(0 <= s < 2**64 for s in itertools.islice(seeds, 1000))


def test_summarize_examples():
    s = summarize([1.0, 2.0, 3.0])
    assert (s.mean, s.std, s.best, s.worst, s.median) == (2.0, 1.0, 1.0, 3.0, 2.0)
    s = summarize([5.0])
    assert s.row() == (5.0, 0.0, 5.0, 5.0, 5.0)
    assert summarize([1.0, 2.0, 3.0, 4.0]).median == 2.5
    with pytest.raises(ValueError):
        summarize([])


def test_repeats_count():
    res = execute_sweep(expand_grid(ParameterGrid([5], [1.0], [0.7], [0.1])), ["f1"], 51, 50, 10,
                        dimension=DIM, shift=SHIFT)
    assert len(res.cell(0, "f1")) == 51
    assert [r.run_index for r in res.cell(0, "f1")] == list(range(51))


def test_sweep_totals_and_summary_recomputable():
    res = sweep()
    recs = res.all_records()
    assert len(recs) == 4 * 2 * 3
    assert len({(r.setting_index, r.problem, r.run_index) for r in recs}) == len(recs)
    for (si, pid), cell in res.records.items():
        finals = np.array([r.final_best for r in cell])
        s = res.summary(si, pid)
        assert s.mean == pytest.approx(finals.mean()) and s.median == np.median(finals)
        assert all(len(r.checkpoints) == 5 for r in cell)


def test_worker_count_does_not_change_results():
    a, b = sweep(workers=1), sweep(workers=3)
    assert [r.payload() for r in a.all_records()] == [r.payload() for r in b.all_records()]


def test_sweep_record_equals_standalone_run():
    res = sweep()
    rec = res.cell(2, "f8")[1]
    seed = derive_seed(17, 2, "f8", 1)
    params = replace(small_settings()[2], seed=seed)
    alone = optimize(params, make_problem("f8", DIM, SHIFT), 200, 40, run_index=1, setting_index=2)
    assert alone.payload() == rec.payload()


def test_resume_after_interruption(tmp_path):
    full = sweep()
    store = RecordStore(tmp_path)
    store.ensure_writable()
    seen = []

    def boom(rec):
        seen.append(rec)
        if len(seen) == 7:
            raise KeyboardInterrupt

    with pytest.raises(KeyboardInterrupt):
        sweep(store=store, progress=boom)
    assert len(list(store.dir.glob("*.json"))) == 7

    resumed = sweep(store=store)
    assert resumed.new_runs == 24 - 7
    assert [r.payload() for r in resumed.all_records()] == [r.payload() for r in full.all_records()]

    calls = []
    monkey = harness.run_spec
    try:
        harness.run_spec = lambda spec: calls.append(spec) or monkey(spec)
        again = sweep(store=store)
    finally:
        harness.run_spec = monkey
    assert again.new_runs == 0 and calls == []
    assert (tmp_path / "index.csv").read_text().count("\n") == 25


def test_resume_rejects_foreign_records(tmp_path):
    store = RecordStore(tmp_path)
    store.ensure_writable()
    sweep(store=store)
    with pytest.raises(ConfigurationError):
        sweep(store=store, master_seed=18)


def test_failed_run_retried_once(monkeypatch):
    real = harness.run_spec
    attempts = {}

    def flaky(spec):
        attempts[spec.key] = attempts.get(spec.key, 0) + 1
        if spec.key == (0, "f1", 0) and attempts[spec.key] == 1:
            raise RuntimeError("transient")
        if spec.key == (1, "f8", 2):
            raise RuntimeError("persistent")
        return real(spec)

    monkeypatch.setattr(harness, "run_spec", flaky)
    res = sweep()
    assert attempts[(0, "f1", 0)] == 2 and len(res.cell(0, "f1")) == 3
    assert attempts[(1, "f8", 2)] == 2
    assert res.failures == {(1, "f8", 2): "RuntimeError: persistent"}
    assert len(res.cell(1, "f8")) == 2 and res.failure_count(1, "f8") == 1
    assert res.summary(1, "f8").n == 2


def test_sweep_validation():
    with pytest.raises(ConfigurationError):
        execute_sweep(small_settings(), ["f1"], 0, 200, 40, dimension=DIM, shift=SHIFT)
    with pytest.raises(ConfigurationError):
        execute_sweep(small_settings(), ["f1"], 1, 6, 2, dimension=DIM, shift=SHIFT)

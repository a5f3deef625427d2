"""Command-line front end: ``socialspider {run,sweep,stats,success}``.

Exit codes: 0 success, 2 configuration error, 3 runtime error,
4 incomplete input (a results directory missing runs).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .benchmarks import make_problem
from .core import ConfigurationError, optimize
from .harness import derive_seed, execute_sweep
from .report import (
    SEED_RULE,
    IncompleteInputError,
    Manifest,
    RecordStore,
    curves_csv,
    load_sweep_dir,
    metadata,
    paper_style_table,
    record_document,
    sensitivity_markdown,
    summary_csv,
    write_json,
)
from .stats import friedman_test, hochberg_posthoc, rank_settings, sensitivity_table, success_curve

EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_INCOMPLETE = 4

PARAM_NAMES = ("pop_size", "r_a", "p_c", "p_m")

log = logging.getLogger("socialspider")


def _parse_setting(text: str) -> tuple:
    parts = [p for p in text.replace("/", ",").split(",") if p.strip()]
    if len(parts) != 4:
        raise ConfigurationError(f"setting must be pop,r_a,p_c,p_m; got {text!r}")
    try:
        return (int(parts[0]), float(parts[1]), float(parts[2]), float(parts[3]))
    except ValueError as exc:
        raise ConfigurationError(f"bad setting {text!r}: {exc}") from exc


def _find_setting(settings, wanted: tuple) -> int:
    for i, s in enumerate(settings):
        if s.as_tuple() == wanted:
            return i
    raise ConfigurationError(f"setting {wanted} is not part of the manifest grid")


# --------------------------------------------------------------------------
# commands


def cmd_run(args) -> int:
    manifest = Manifest.from_file(args.manifest)
    settings = manifest.settings()
    si = _find_setting(settings, _parse_setting(args.setting)) if args.setting else 0
    pid = args.problem or manifest.problems[0]
    if pid not in manifest.problems:
        raise ConfigurationError(f"problem {pid!r} is not listed in the manifest")
    seed = derive_seed(manifest.master_seed, si, pid, args.run_index, manifest.paired)
    params = replace(settings[si], seed=seed)
    problem = make_problem(pid, manifest.dimension, manifest.shift_vector())
    out = Path(args.output) if args.output else \
        Path(manifest.output_dir) / f"run_s{si:04d}_{pid}_r{args.run_index:03d}.json"
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create {out.parent}: {exc}") from exc
    rec = optimize(params, problem, manifest.budget_fes, manifest.checkpoint_interval,
                   run_index=args.run_index, setting_index=si)
    write_json(out, record_document(rec, metadata(manifest), SEED_RULE))
    print(f"{pid} setting {params.as_tuple()} run {args.run_index}: final best {rec.final_best:.4E} "
          f"({len(rec.checkpoints)} checkpoints) -> {out}")
    return 0


def cmd_sweep(args) -> int:
    manifest = Manifest.from_file(args.manifest)
    workers = args.workers if args.workers is not None else manifest.workers
    out = Path(args.output or manifest.output_dir)
    meta = metadata(manifest)
    store = RecordStore(out, meta)
    store.ensure_writable()
    if args.no_resume and any(store.dir.glob("*.json")):
        raise ConfigurationError(f"{out} already holds run records and --no-resume was given")
    settings = manifest.settings()
    write_json(out / "sweep.json", {
        "meta": meta,
        "settings": [s.__dict__ for s in settings],
        "problems": manifest.problems,
        "repeats": manifest.repeats,
        "budget_fes": manifest.budget_fes,
        "checkpoint_interval": manifest.checkpoint_interval,
    })
    total = len(settings) * len(manifest.problems) * manifest.repeats
    count = [0]

    def progress(rec):
        count[0] += 1
        log.info("[%d] setting %d %s run %d: %.4E", count[0], rec.setting_index, rec.problem,
                 rec.run_index, rec.final_best)

    sweep = execute_sweep(
        settings, manifest.problems, manifest.repeats, manifest.budget_fes, manifest.checkpoint_interval,
        dimension=manifest.dimension, shift=manifest.shift_vector(), master_seed=manifest.master_seed,
        workers=workers, paired=manifest.paired, store=store, progress=progress,
    )
    (out / "summary.csv").write_text(summary_csv(sweep, meta))
    print(f"{sweep.new_runs} new runs ({total} total, {len(sweep.failures)} failed) -> {out}")
    std = tuple(manifest.standard)
    for si, s in enumerate(settings):
        if s.as_tuple() == (int(std[0]), *map(float, std[1:])):
            print(f"\nStandard setting {list(s.as_tuple())}:\n{paper_style_table(sweep, si)}")
    return 0


def cmd_stats(args) -> int:
    info, sweep = load_sweep_dir(args.results)
    missing = sweep.missing_cells()
    if missing:
        for si, pid in missing:
            print(f"missing: setting {si} {sweep.settings[si].as_tuple()} on {pid}", file=sys.stderr)
        raise IncompleteInputError(f"{len(missing)} (setting, function) cells have no completed runs")
    manifest = info["meta"]["manifest"]
    alpha = args.alpha if args.alpha is not None else manifest["alpha"]
    if not 0 < alpha < 1:
        raise ConfigurationError("alpha must lie in (0, 1)")
    outdir = Path(args.results) / "stats"
    outdir.mkdir(exist_ok=True)
    meta = dict(info["meta"], alpha=alpha)

    scores = sweep.mean_scores()
    table = rank_settings(scores, sweep.problems)
    lines = ["# Parameter sensitivity analysis", "",
             f"settings: {len(sweep.settings)}, functions: {', '.join(sweep.problems)}, "
             f"repeats: {sweep.repeats}, alpha: {alpha:g}", ""]
    ranks_rows = [["setting_index", *PARAM_NAMES, "mean_rank", *sweep.problems]]
    for j, s in enumerate(sweep.settings):
        ranks_rows.append([j, *s.as_tuple(), f"{table.mean_ranks[j]:.6g}", *[f"{v:g}" for v in table.ranks[:, j]]])
    _write_rows(outdir / "ranks.csv", ranks_rows, meta)

    if len(sweep.settings) < 2 or len(sweep.problems) < 2:
        lines.append("Post-hoc inapplicable: the Friedman test needs at least two settings and two functions.")
        report = "\n".join(lines) + "\n"
        (outdir / "sensitivity.md").write_text(_md_meta(meta) + report)
        print(report)
        return 0

    fr = friedman_test(table)
    ph = hochberg_posthoc(fr, alpha)
    write_json(outdir / "friedman.json", {
        "meta": meta, "statistic": fr.statistic, "dof": fr.dof, "p_value": fr.p_value,
        "mean_ranks": [float(v) for v in fr.mean_ranks],
    })
    post_rows = [["setting_index", *PARAM_NAMES, "mean_rank", "z", "p_value", "rejected", "accepted"]]
    for j, s in enumerate(sweep.settings):
        post_rows.append([j, *s.as_tuple(), f"{fr.mean_ranks[j]:.6g}", f"{ph.z[j]:.6g}",
                          f"{ph.p_values[j]:.6g}", int(ph.rejected[j]), int(not ph.rejected[j])])
    _write_rows(outdir / "posthoc.csv", post_rows, meta)

    ctrl = sweep.settings[ph.control]
    lines += [f"Friedman statistic {fr.statistic:.6g} (dof {fr.dof}), p = {fr.p_value:.4g}",
              f"Control (best mean rank {fr.mean_ranks[ph.control]:.4g}): {list(ctrl.as_tuple())}", ""]
    if not ph.applicable:
        lines += [f"Post-hoc inapplicable: {ph.note}.", ""]
    accepted = [list(sweep.settings[j].as_tuple()) for j in ph.accepted]
    lines += [f"Accepted settings ({len(accepted)}): " + ", ".join(str(a) for a in accepted), ""]
    axes = [sorted({getattr(s, name) for s in sweep.settings}) for name in ("r_a", "p_c", "p_m")]
    cells = sensitivity_table(ph, sweep.settings, *axes)
    lines += ["Accepted population sizes per cell:", "", sensitivity_markdown(cells, *axes), ""]
    report = "\n".join(lines)
    (outdir / "sensitivity.md").write_text(_md_meta(meta) + report)
    print(report)
    return 0


def cmd_success(args) -> int:
    info, sweep = load_sweep_dir(args.results)
    manifest = info["meta"]["manifest"]
    threshold = args.threshold if args.threshold is not None else manifest["threshold"]
    if not threshold > 0:
        raise ConfigurationError("threshold must be positive")
    if sweep.missing_cells():
        raise IncompleteInputError("results directory has settings/functions with no completed runs")
    if args.settings:
        try:
            chosen = [int(v) for v in args.settings.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigurationError(f"--settings expects indices: {exc}") from exc
        for j in chosen:
            if not 0 <= j < len(sweep.settings):
                raise ConfigurationError(f"setting index {j} out of range")
    else:
        chosen = list(range(len(sweep.settings)))
    standard = _parse_setting(args.standard) if args.standard else \
        (int(manifest["standard"][0]), *map(float, manifest["standard"][1:]))

    rows = []
    for j in chosen:
        s = sweep.settings[j]
        recs = [r for pid in sweep.problems for r in sweep.cell(j, pid)]
        curve = success_curve(recs, threshold)
        if np.any(np.diff(curve.rates) < 0) or curve.rates.min() < 0 or curve.rates.max() > 1:
            raise RuntimeError(f"success curve for setting {j} is not monotone in [0, 1]")
        rows.append((_panel(s.as_tuple(), standard), j, s, curve.n_runs, curve.fes, curve.rates))
    meta = dict(info["meta"], threshold=threshold, standard=list(standard),
                runs_per_setting=f"{len(sweep.problems)} functions x {sweep.repeats} repeats "
                                 f"= {len(sweep.problems) * sweep.repeats}")
    out = Path(args.output) if args.output else Path(args.results) / "success.csv"
    out.write_text(curves_csv(rows, meta))
    for panel, j, s, n, fes, rates in rows:
        print(f"{panel:>8}  setting {j} {list(s.as_tuple())}: final success rate {rates[-1]:.3f} over {n} runs")
    print(f"-> {out}")
    return 0


def _panel(setting: tuple, standard: tuple) -> str:
    """Which single parameter differs from the standard setting."""
    diff = [name for name, a, b in zip(PARAM_NAMES, setting, standard) if a != b]
    if not diff:
        return "standard"
    return diff[0] if len(diff) == 1 else "other"


def _md_meta(meta: dict) -> str:
    return "<!--\n" + json.dumps(meta, indent=1, sort_keys=True) + "\n-->\n\n"


def _write_rows(path, rows, meta) -> None:
    buf = io.StringIO()
    buf.write("".join(f"# {k}: {json.dumps(v, sort_keys=True)}\n" for k, v in meta.items()))
    csv.writer(buf, lineterminator="\n").writerows(rows)
    Path(path).write_text(buf.getvalue())


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="socialspider", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log every finished run")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute one seeded run and write its record")
    p.add_argument("-m", "--manifest", required=True)
    p.add_argument("--setting", help="pop,r_a,p_c,p_m (must be in the manifest grid; default: first)")
    p.add_argument("--problem", help="problem id, e.g. f1 (default: first in manifest)")
    p.add_argument("--run-index", type=int, default=0)
    p.add_argument("-o", "--output", help="record file path")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run the full grid, resuming completed runs")
    p.add_argument("-m", "--manifest", required=True)
    p.add_argument("-o", "--output", help="results directory (default: manifest output_dir)")
    p.add_argument("-w", "--workers", type=int)
    p.add_argument("--no-resume", action="store_true", help="refuse to reuse existing records")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stats", help="Friedman test, Hochberg post-hoc and sensitivity table")
    p.add_argument("results")
    p.add_argument("--alpha", type=float)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("success", help="success-rate curves as CSV")
    p.add_argument("results")
    p.add_argument("--threshold", type=float)
    p.add_argument("--settings", help="comma-separated setting indices (default: all)")
    p.add_argument("--standard", help="reference setting pop,r_a,p_c,p_m for panel labels")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_success)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IncompleteInputError as exc:
        print(f"incomplete input: {exc}", file=sys.stderr)
        return EXIT_INCOMPLETE
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

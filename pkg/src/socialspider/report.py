"""Manifests, run-record files, CSV/markdown tables and the results directory layout.

Results directory::

    <out>/sweep.json            manifest echo, shift vector, settings list
    <out>/records/*.json        one file per run (or per failed run)
    <out>/index.csv             one line per run
    <out>/summary.csv           five-number summary per (setting, function)
    <out>/stats/...             written by the ``stats`` command
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .benchmarks import PROBLEM_IDS, resolve_shift
from .core import DEFAULT_C, ConfigurationError, RunRecord, SsaParams
from .harness import ParameterGrid, RunSpec, Summary, SweepResult, expand_grid


class IncompleteInputError(RuntimeError):
    """A results directory is missing runs needed for the requested output."""


def fmt_float(v: float) -> str:
    """Round-trip exact scientific notation (17 significant digits)."""
    return f"{float(v):.16e}"


def fmt_paper(v: float) -> str:
    """Four-decimal scientific notation, e.g. ``1.1321E-73``."""
    return f"{float(v):.4E}"


# --------------------------------------------------------------------------
# manifest


@dataclass
class Manifest:
    problems: list[str] = field(default_factory=lambda: list(PROBLEM_IDS))
    dimension: int = 30
    pop_sizes: list[int] = field(default_factory=lambda: [30])
    r_as: list[float] = field(default_factory=lambda: [1.0])
    p_cs: list[float] = field(default_factory=lambda: [0.7])
    p_ms: list[float] = field(default_factory=lambda: [0.1])
    repeats: int = 51
    budget_fes: int = 300_000
    checkpoint_interval: int = 3000
    master_seed: int = 0
    shift: int | str | None = None
    intensity_floor_c: float = DEFAULT_C
    output_dir: str = "results"
    alpha: float = 0.05
    threshold: float = 1e-8
    paired: bool = False
    workers: int = 1
    standard: list[float] = field(default_factory=lambda: [30, 1.0, 0.7, 0.1])
    source_text: str = field(default="", repr=False, compare=False)

    @classmethod
    def from_text(cls, text: str, base_dir: Path | None = None) -> "Manifest":
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"manifest is not valid TOML: {exc}") from exc
        known = {f.name for f in fields(cls)} - {"source_text"}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigurationError(f"unknown manifest field(s): {', '.join(unknown)}")
        if raw.get("problems") == "all":
            raw["problems"] = list(PROBLEM_IDS)
        shift = raw.get("shift")
        if isinstance(shift, str) and base_dir is not None and not Path(shift).is_absolute():
            raw["shift"] = str(base_dir / shift)
        m = cls(**raw, source_text=text)
        m.validate()
        return m

    @classmethod
    def from_file(cls, path) -> "Manifest":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read manifest {path}: {exc}") from exc
        return cls.from_text(text, base_dir=path.parent)

    def validate(self) -> None:
        def bad(name, why):
            raise ConfigurationError(f"manifest field '{name}': {why}")

        if not isinstance(self.problems, list) or not self.problems:
            bad("problems", "must be a non-empty list or \"all\"")
        for pid in self.problems:
            if pid not in PROBLEM_IDS:
                bad("problems", f"unknown problem {pid!r}")
        if len(set(self.problems)) != len(self.problems):
            bad("problems", "duplicate entries")
        for name in ("dimension", "repeats", "budget_fes", "checkpoint_interval", "workers"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                bad(name, "must be a positive integer")
        if self.dimension < 2:
            bad("dimension", "must be at least 2")
        if self.budget_fes % self.checkpoint_interval:
            bad("checkpoint_interval", "must divide budget_fes")
        for name in ("pop_sizes", "r_as", "p_cs", "p_ms"):
            v = getattr(self, name)
            if not isinstance(v, list) or not v:
                bad(name, "must be a non-empty list")
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
                bad(name, "entries must be numbers")
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed < 2**64:
            bad("master_seed", "must be an unsigned 64-bit integer")
        if not 0 < self.alpha < 1:
            bad("alpha", "must lie in (0, 1)")
        if not self.threshold > 0:
            bad("threshold", "must be positive")
        if not isinstance(self.standard, list) or len(self.standard) != 4:
            bad("standard", "must be [pop_size, r_a, p_c, p_m]")
        try:
            settings = self.settings()
        except ConfigurationError as exc:
            bad("grid", str(exc))
        if self.budget_fes < max(s.pop_size for s in settings):
            bad("budget_fes", "must be at least the largest pop size")
        try:
            self.shift_vector()
        except ConfigurationError as exc:
            bad("shift", str(exc))

    @property
    def grid(self) -> ParameterGrid:
        return ParameterGrid(self.pop_sizes, self.r_as, self.p_cs, self.p_ms)

    def settings(self) -> list[SsaParams]:
        return expand_grid(self.grid, self.intensity_floor_c)

    def shift_vector(self) -> np.ndarray:
        return resolve_shift(self.dimension, self.shift)

    def echo(self) -> dict:
        """Fields that determine results; the worker count does not."""
        d = asdict(self)
        d.pop("source_text")
        d.pop("workers")
        return d


def metadata(manifest: Manifest, **extra) -> dict:
    meta = {
        "tool": "socialspider",
        "version": __version__,
        "master_seed": manifest.master_seed,
        "manifest": manifest.echo(),
        "manifest_text": manifest.source_text,
        "shift_vector": [float(v) for v in manifest.shift_vector()],
    }
    meta.update(extra)
    return meta


# --------------------------------------------------------------------------
# run records


def record_document(record: RunRecord, meta: dict | None = None, seed_rule: str = "") -> dict:
    doc = {"status": "ok", "record": record.payload(), "wall_time": record.wall_time}
    doc["summary"] = {
        "final_best": record.final_best,
        "iterations": record.iterations,
        "fe_count": record.fe_count,
        "checkpoints": len(record.checkpoints),
    }
    if seed_rule:
        doc["seed_rule"] = seed_rule
    if meta is not None:
        doc["meta"] = meta
    return doc


def payload_bytes(doc: dict) -> bytes:
    """Canonical bytes of a record document with wall time removed."""
    d = {k: v for k, v in doc.items() if k != "wall_time"}
    return json.dumps(d, sort_keys=True).encode()


def write_json(path, doc: dict) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    tmp.replace(path)


def read_record(path) -> RunRecord:
    doc = json.loads(Path(path).read_text())
    if doc.get("status") != "ok":
        raise ValueError(f"{path} holds a failed run")
    return RunRecord.from_payload(doc["record"], wall_time=doc.get("wall_time", 0.0))


SEED_RULE = "blake2b-64(master_seed, setting_index, problem_id, run_index)"


class RecordStore:
    """One JSON file per run under ``<root>/records``; the main process is the only writer."""

    def __init__(self, root, meta: dict | None = None):
        self.root = Path(root)
        self.dir = self.root / "records"
        self.meta = meta

    def ensure_writable(self) -> None:
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
            probe = self.root / ".write-probe"
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise ConfigurationError(f"output directory {self.root} is not writable: {exc}") from exc

    def path(self, key) -> Path:
        si, pid, run = key
        return self.dir / f"s{si:04d}_{pid}_r{run:03d}.json"

    def load(self, specs: list[RunSpec]):
        done, failed = {}, {}
        for spec in specs:
            p = self.path(spec.key)
            if not p.exists():
                continue
            doc = json.loads(p.read_text())
            if doc.get("status") == "failed":
                failed[spec.key] = doc.get("error", "")
                continue
            rec = RunRecord.from_payload(doc["record"], wall_time=doc.get("wall_time", 0.0))
            if rec.params != spec.params or rec.budget_fes != spec.budget_fes \
                    or rec.checkpoint_interval != spec.checkpoint_interval:
                raise ConfigurationError(
                    f"{p} was produced by a different configuration; use a fresh output directory")
            done[spec.key] = rec
        return done, failed

    def save(self, spec: RunSpec, record: RunRecord) -> None:
        write_json(self.path(spec.key), record_document(record, self.meta, SEED_RULE))

    def save_failure(self, spec: RunSpec, error: str) -> None:
        doc = {"status": "failed", "error": error, "params": asdict(spec.params),
               "problem": spec.problem_id, "run_index": spec.run_index, "meta": self.meta}
        write_json(self.path(spec.key), doc)

    def write_index(self, specs, done, failures) -> None:
        with open(self.root / "index.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["setting_index", "problem", "run_index", "seed", "status", "final_best", "file"])
            for spec in specs:
                if spec.key in done:
                    status, final = "ok", fmt_float(done[spec.key].final_best)
                elif spec.key in failures:
                    status, final = "failed", ""
                else:
                    status, final = "missing", ""
                w.writerow([spec.setting_index, spec.problem_id, spec.run_index, spec.params.seed,
                            status, final, self.path(spec.key).relative_to(self.root).as_posix()])


# --------------------------------------------------------------------------
# CSV helpers


def _meta_lines(meta: dict | None) -> str:
    if not meta:
        return ""
    return "".join(f"# {k}: {json.dumps(v, sort_keys=True)}\n" for k, v in meta.items())


def read_meta(path) -> dict:
    meta = {}
    for line in Path(path).read_text().splitlines():
        if not line.startswith("# "):
            break
        key, _, value = line[2:].partition(": ")
        meta[key] = json.loads(value)
    return meta


def read_csv(path) -> list[dict]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


SUMMARY_HEADER = ["setting_index", "pop_size", "r_a", "p_c", "p_m", "function", "n", "failures", *Summary.COLUMNS]


def summary_csv(sweep: SweepResult, meta: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(_meta_lines(meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for si, s in enumerate(sweep.settings):
        for pid in sweep.problems:
            nfail = sweep.failure_count(si, pid)
            if not sweep.cell(si, pid):
                w.writerow([si, s.pop_size, s.r_a, s.p_c, s.p_m, pid, 0, nfail, "", "", "", "", ""])
                continue
            summ = sweep.summary(si, pid)
            w.writerow([si, s.pop_size, s.r_a, s.p_c, s.p_m, pid, summ.n, nfail,
                        *[fmt_float(v) for v in summ.row()]])
    return buf.getvalue()


def parse_summary_rows(rows: list[dict]) -> list[dict]:
    out = []
    for r in rows:
        d = {"setting_index": int(r["setting_index"]), "pop_size": int(r["pop_size"]),
             "r_a": float(r["r_a"]), "p_c": float(r["p_c"]), "p_m": float(r["p_m"]),
             "function": r["function"], "n": int(r["n"]), "failures": int(r["failures"])}
        for col in Summary.COLUMNS:
            d[col] = float(r[col]) if r[col] else float("nan")
        out.append(d)
    return out


def paper_style_table(sweep: SweepResult, setting_index: int) -> str:
    """Markdown table with one line per function, in the four-decimal style."""
    lines = ["| Function | " + " | ".join(Summary.COLUMNS) + " |", "|---" * 6 + "|"]
    for pid in sweep.problems:
        cell = sweep.cell(setting_index, pid)
        if not cell:
            lines.append(f"| {pid} | " + " | ".join("-" * 1 for _ in range(5)) + " |")
            continue
        summ = sweep.summary(setting_index, pid)
        lines.append(f"| {pid} | " + " | ".join(fmt_paper(v) for v in summ.row()) + " |")
    return "\n".join(lines)


def curves_csv(rows: list[tuple], meta: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(_meta_lines(meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["panel", "setting_index", "pop_size", "r_a", "p_c", "p_m", "n_runs",
                "checkpoint", "fe", "success_rate"])
    for panel, si, s, n_runs, curve_fes, rates in rows:
        for c, (fe, rate) in enumerate(zip(curve_fes, rates), start=1):
            w.writerow([panel, si, s.pop_size, s.r_a, s.p_c, s.p_m, n_runs, c, int(fe), fmt_float(rate)])
    return buf.getvalue()


def sensitivity_markdown(cells: dict, r_as, p_cs, p_ms) -> str:
    """Rows are (p_m, p_c) pairs, columns are r_a values, cells list accepted pop sizes."""
    head = "| p_m | p_c | " + " | ".join(f"r_a={ra:g}" for ra in r_as) + " |"
    lines = [head, "|---|---|" + "---|" * len(r_as)]
    for pm in p_ms:
        for i, pc in enumerate(p_cs):
            label = f"{pm:g}" if i == 0 else ""
            lines.append(f"| {label} | {pc:g} | " + " | ".join(cells[(pm, pc, ra)] for ra in r_as) + " |")
    return "\n".join(lines)


def load_sweep_dir(root) -> tuple[dict, SweepResult]:
    """Rebuild a ``SweepResult`` from a results directory written by ``sweep``."""
    root = Path(root)
    try:
        info = json.loads((root / "sweep.json").read_text())
    except (OSError, ValueError) as exc:
        raise IncompleteInputError(f"{root} is not a sweep results directory: {exc}") from exc
    settings = [SsaParams(**s) for s in info["settings"]]
    problems = info["problems"]
    repeats = info["repeats"]
    store = RecordStore(root)
    sweep = SweepResult(settings, problems, repeats)
    for si in range(len(settings)):
        for pid in problems:
            for run in range(repeats):
                p = store.path((si, pid, run))
                if not p.exists():
                    continue
                doc = json.loads(p.read_text())
                if doc.get("status") == "failed":
                    sweep.failures[(si, pid, run)] = doc.get("error", "")
                    continue
                sweep.records.setdefault((si, pid), []).append(
                    RunRecord.from_payload(doc["record"], wall_time=doc.get("wall_time", 0.0)))
    return info, sweep

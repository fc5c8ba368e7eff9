"""Resumable benchmark grid over methods, parameters and seeds.

Every cell (method, parameters, seed) synthesizes its mixture, separates
it and scores the estimate at each checkpoint iteration. Cells are
independent and may run in a process pool; each finished cell is written
to its own file with write-then-rename and recorded in ``index.json``, so
an interrupted run picks up where it stopped. ``results.csv`` is rebuilt
from the cell files in grid order and is therefore identical whether or
not the run was interrupted.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import SCHEMA_VERSION, BenchConfig, RunConfig, dumps, scenario_spec
from .io import atomic_write_text
from .metrics import evaluate
from .mixgen import synthesize
from .signal import istft, stft

__all__ = ["RESULT_COLUMNS", "PARAM_COLUMNS", "WORKERS_ENV", "worker_count", "run_cell", "run_bench", "rows_to_csv"]

logger = logging.getLogger(__name__)

WORKERS_ENV = "HVABSS_WORKERS"
PARAM_COLUMNS = ("lam", "kappa", "gamma", "eps", "p", "quefrency_length")
RESULT_COLUMNS = ("schema_version", "cell", "method", *PARAM_COLUMNS, "seed", "iteration", "source", "metric", "value")
_METRICS = ("sdr", "sir", "sar", "sdr_improvement")


def worker_count(default: int = 1) -> int:
    """Worker processes from ``$HVABSS_WORKERS`` (``default`` when unset)."""
    raw = os.environ.get(WORKERS_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {n}")
    return n


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_cell(cell_id: str, run: RunConfig, scenario: dict, seed: int, checkpoints: list) -> list:
    """Separate one seeded mixture and score it at every checkpoint; returns result rows."""
    mixture, references = synthesize(scenario_spec(scenario, seed))
    spec = stft(mixture, run.stft)
    sep = run.separator()
    saved = {}

    def keep(k, w):
        if k in checkpoints:
            saved[k] = w.copy()

    sep.fit(spec, callback=keep)
    params = sep.get_params()
    ref_mic = mixture.samples[sep.ref_channel]
    rows = []
    for k in sorted(saved):
        est = istft(sep.transform(spec, demix=sep.compose(saved[k])), run.stft, length=len(mixture))
        report = evaluate(est, references, ref_mic)
        for j in range(len(report.sdr)):
            for metric in _METRICS:
                rows.append({
                    "schema_version": SCHEMA_VERSION,
                    "cell": cell_id,
                    "method": run.method,
                    **{c: params.get(c) for c in PARAM_COLUMNS},
                    "seed": seed,
                    "iteration": k,
                    "source": j + 1,
                    "metric": metric,
                    "value": getattr(report, metric)[j],
                })
    return rows


def rows_to_csv(rows: list, header: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow(RESULT_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in RESULT_COLUMNS])
    return buf.getvalue()


def _cell_file(outdir: Path, cell_id: str) -> Path:
    digest = hashlib.sha1(cell_id.encode()).hexdigest()[:16]
    return outdir / "cells" / f"{digest}.csv"


def _load_index(path: Path) -> dict:
    if not path.exists():
        return {}
    with open(path) as fh:
        return json.load(fh)


def run_bench(cfg: BenchConfig, outdir, workers: int | None = None, max_cells: int | None = None) -> dict:
    """Run (or resume) the grid and write ``results.csv``.

    Parameters
    ----------
    cfg : BenchConfig
    outdir : path
        Holds ``config.json``, ``index.json``, ``cells/`` and ``results.csv``.
    workers : int, optional
        Process count; defaults to ``$HVABSS_WORKERS`` or 1.
    max_cells : int, optional
        Stop after this many new cells (used to simulate interruption).

    Returns
    -------
    dict
        ``{"done": [...], "failed": {cell: message}, "skipped": [...], "complete": bool}``.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    workers = worker_count() if workers is None else int(workers)
    index_path = outdir / "index.json"
    atomic_write_text(outdir / "config.json", dumps({"schema_version": SCHEMA_VERSION, **cfg.to_dict()}))

    index = _load_index(index_path)
    cells = cfg.cells()
    checkpoints = cfg.checkpoint_list()
    todo = [c for c in cells if index.get(c[0], {}).get("status") != "done" or not _cell_file(outdir, c[0]).exists()]
    skipped = [c[0] for c in cells if c not in todo]
    if max_cells is not None:
        todo = todo[:max_cells]
    summary = {"done": [], "failed": {}, "skipped": skipped}

    def record(cell_id, rows=None, error=None):
        if error is None:
            atomic_write_text(_cell_file(outdir, cell_id), rows_to_csv(rows, header=False))
            index[cell_id] = {"status": "done", "rows": len(rows)}
            summary["done"].append(cell_id)
        else:
            logger.warning("cell %s failed: %s", cell_id, error)
            index[cell_id] = {"status": "failed", "error": error}
            summary["failed"][cell_id] = error
        atomic_write_text(index_path, dumps(index))

    jobs = [(cid, run, cfg.scenario, seed, checkpoints) for cid, run, seed in todo]
    if workers <= 1:
        for job in jobs:
            try:
                rows = run_cell(*job)
            except Exception as exc:  # one bad cell must not stop the grid
                record(job[0], error=f"{type(exc).__name__}: {exc}")
            else:
                record(job[0], rows)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(job[0], pool.submit(run_cell, *job)) for job in jobs]
            for cell_id, fut in futures:
                try:
                    rows = fut.result()
                except Exception as exc:
                    record(cell_id, error=f"{type(exc).__name__}: {exc}")
                else:
                    record(cell_id, rows)

    complete = all(index.get(c[0], {}).get("status") == "done" for c in cells)
    parts = [rows_to_csv([], header=True)]
    for cid, _, _ in cells:
        if index.get(cid, {}).get("status") == "done":
            parts.append(_cell_file(outdir, cid).read_text())
    atomic_write_text(outdir / "results.csv", "".join(parts))
    summary["complete"] = complete
    return summary


def median_improvement(results_csv, method: str, iteration: int | None = None, **params) -> float:
    """Median over seeds of the mean-over-sources SDR improvement in a results file."""
    per_seed = {}
    with open(results_csv) as fh:
        for row in csv.DictReader(fh):
            if row["method"] != method or row["metric"] != "sdr_improvement":
                continue
            if iteration is not None and int(row["iteration"]) != iteration:
                continue
            if any(row[k] != _fmt(v) for k, v in params.items()):
                continue
            per_seed.setdefault(int(row["seed"]), []).append(float(row["value"]))
    if not per_seed:
        raise ValueError(f"no rows for method {method!r} with {params}")
    return float(np.median([np.mean(v) for v in per_seed.values()]))

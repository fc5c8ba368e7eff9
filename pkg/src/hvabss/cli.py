"""Command line interface: ``hvabss {separate,mix,eval,bench}``.

Flags override the values of an optional ``--config`` file; the fully
resolved configuration is written next to every output so a run can be
repeated exactly.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import run_bench
from .config import SCHEMA_VERSION, BenchConfig, RunConfig, dumps, load_config
from .io import atomic_write_text, read_wav, write_wav
from .metrics import evaluate
from .mixgen import MixSpec, synthesize
from .pipeline import separate
from .signal import Audio
from .solver import DivergenceError

__all__ = ["main", "build_parser", "cmd_separate", "cmd_mix", "cmd_eval", "cmd_bench"]

logger = logging.getLogger("hvabss")

TRACE_COLUMNS = ("schema_version", "iteration", "objective", "w_norm", "mask_mean", "mask_min", "mask_max", "time")
EVAL_COLUMNS = ("schema_version", "source", "estimate", "sdr", "sir", "sar", "sdr_improvement")

# flag name -> (section, key)
_RUN_FLAGS = {
    "method": (None, "method"),
    "lam": ("params", "lam"),
    "kappa": ("params", "kappa"),
    "gamma": ("params", "gamma"),
    "eps": ("params", "eps"),
    "p": ("params", "p"),
    "quefrency_length": ("params", "quefrency_length"),
    "n_iter": ("solver", "n_iter"),
    "mu1": ("solver", "mu1"),
    "mu2": ("solver", "mu2"),
    "alpha": ("solver", "alpha"),
    "window_length": ("stft", "window_length"),
    "hop": ("stft", "hop"),
    "fft_length": ("stft", "fft_length"),
    "n_sources": (None, "n_sources"),
    "format": (None, "report_format"),
}


def _lam(text: str):
    return text if text == "auto" else float(text)


def _run_config(args) -> RunConfig:
    d = load_config(args.config) if args.config else {}
    d = {k: (dict(v) if isinstance(v, dict) else v) for k, v in d.items()}
    for flag, (section, key) in _RUN_FLAGS.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        if section is None:
            d[key] = value
        else:
            d.setdefault(section, {})[key] = value
    d["input"] = str(args.input)
    d["output"] = str(args.output)
    return RunConfig.from_dict(d)


def _trace_text(trace, fmt: str) -> str:
    rows = [{"schema_version": SCHEMA_VERSION, **r} for r in trace.records]
    if fmt == "json":
        return dumps({"schema_version": SCHEMA_VERSION, "scale": trace.scale, "records": trace.records})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TRACE_COLUMNS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def cmd_separate(run: RunConfig, encoding: str = "float32") -> list:
    """Separate ``run.input`` into ``run.output/source_<n>.wav`` plus a trace and the resolved config.

    Returns the written source paths. On divergence the partial trace is
    written before the error propagates.
    """
    out = Path(run.output)
    mixture = read_wav(run.input)
    if mixture.n_channels < 2:
        raise ValueError("determined BSS requires N >= 2 channels")
    if run.n_sources is not None and mixture.n_channels != run.n_sources:
        raise ValueError(f"input has {mixture.n_channels} channels but n_sources is {run.n_sources}")
    sep = run.separator()
    ext = run.report_format
    atomic_write_text(out / "run.json", dumps({"schema_version": SCHEMA_VERSION, **run.to_dict()}))
    try:
        estimates = separate(mixture, sep, run.stft)
    except DivergenceError as exc:
        if exc.trace is not None:
            atomic_write_text(out / f"trace.{ext}", _trace_text(exc.trace, ext))
        raise
    paths = []
    for n in range(estimates.n_channels):
        path = out / f"source_{n + 1}.wav"
        write_wav(Audio(estimates.samples[n], estimates.sample_rate), path, encoding=encoding)
        paths.append(path)
    atomic_write_text(out / f"trace.{ext}", _trace_text(sep.trace_, ext))
    return paths


def cmd_mix(spec: MixSpec, outdir, encoding: str = "float32") -> tuple[Path, list]:
    """Write ``mixture.wav`` and ``references/source_<n>.wav`` for ``spec``."""
    outdir = Path(outdir)
    mixture, refs = synthesize(spec)
    write_wav(mixture, outdir / "mixture.wav", encoding=encoding)
    ref_paths = []
    for n in range(refs.n_channels):
        path = outdir / "references" / f"source_{n + 1}.wav"
        write_wav(Audio(refs.samples[n], refs.sample_rate), path, encoding=encoding)
        ref_paths.append(path)
    return outdir / "mixture.wav", ref_paths


def _read_dir(path) -> np.ndarray:
    path = Path(path)
    files = sorted(path.glob("*.wav")) if path.is_dir() else [path]
    if not files:
        raise ValueError(f"{path}: no .wav files found")
    chans = [read_wav(f).samples for f in files]
    lengths = {c.shape[1] for c in chans}
    if len(lengths) != 1:
        raise ValueError(f"{path}: files differ in length ({sorted(lengths)})")
    return np.concatenate(chans, axis=0)


def cmd_eval(estimates, references, mixture=None, fmt: str = "csv") -> str:
    """Score a directory (or multichannel file) of estimates against references."""
    est = _read_dir(estimates)
    refs = _read_dir(references)
    if est.shape[1] != refs.shape[1]:
        raise ValueError(f"estimates have {est.shape[1]} samples but references have {refs.shape[1]}")
    mix = None if mixture is None else read_wav(mixture).samples[0]
    report = evaluate(est, refs, mix)
    if fmt == "json":
        return dumps({"schema_version": SCHEMA_VERSION, **report.to_dict()})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EVAL_COLUMNS)
    for j in range(len(report.sdr)):
        imp = "" if report.sdr_improvement is None else repr(report.sdr_improvement[j])
        writer.writerow([SCHEMA_VERSION, j + 1, report.permutation[j] + 1,
                         repr(report.sdr[j]), repr(report.sir[j]), repr(report.sar[j]), imp])
    return buf.getvalue()


def cmd_bench(cfg: BenchConfig, outdir, workers: int | None = None) -> dict:
    return run_bench(cfg, outdir, workers=workers)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hvabss", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("separate", help="separate a multichannel WAV file")
    p.add_argument("input", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="output directory")
    p.add_argument("--config", type=Path, help="YAML/JSON run config")
    p.add_argument("--method", choices=["fdica", "iva", "model_iva", "hva", "wiener_only"])
    p.add_argument("--lam", type=_lam, help="penalty / threshold weight ('auto' for fdica and iva)")
    p.add_argument("--kappa", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--p", type=float, help="shrinkage exponent for fdica/iva")
    p.add_argument("--quefrency-length", dest="quefrency_length", type=int)
    p.add_argument("--n-iter", dest="n_iter", type=int)
    p.add_argument("--mu1", type=float)
    p.add_argument("--mu2", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--window-length", dest="window_length", type=int)
    p.add_argument("--hop", type=int)
    p.add_argument("--fft-length", dest="fft_length", type=int)
    p.add_argument("--n-sources", dest="n_sources", type=int)
    p.add_argument("--format", choices=["csv", "json"], help="trace report format")
    p.add_argument("--encoding", choices=["float32", "pcm16"], default="float32")

    p = sub.add_parser("mix", help="render a synthetic mixture from a spec file")
    p.add_argument("spec", type=Path, help="YAML/JSON mixture spec")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--seed", type=int, help="override the spec seed")
    p.add_argument("--encoding", choices=["float32", "pcm16"], default="float32")

    p = sub.add_parser("eval", help="score estimates against references")
    p.add_argument("estimates", type=Path, help="directory of .wav files or one multichannel file")
    p.add_argument("references", type=Path)
    p.add_argument("--mixture", type=Path, help="mixture file; its first channel is the baseline")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("-o", "--output", type=Path, help="report file (stdout when omitted)")

    p = sub.add_parser("bench", help="run a resumable benchmark grid")
    p.add_argument("grid", type=Path, help="YAML/JSON bench config")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--workers", type=int, help="process count (default: $HVABSS_WORKERS or 1)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "separate":
            paths = cmd_separate(_run_config(args), encoding=args.encoding)
            for path in paths:
                print(path)
        elif args.command == "mix":
            d = load_config(args.spec)
            if args.seed is not None:
                d["seed"] = args.seed
            spec = MixSpec.from_dict(d)
            mix_path, refs = cmd_mix(spec, args.output, encoding=args.encoding)
            atomic_write_text(Path(args.output) / "mix.json", dumps({"schema_version": SCHEMA_VERSION, **d}))
            print(mix_path)
        elif args.command == "eval":
            text = cmd_eval(args.estimates, args.references, args.mixture, args.format)
            if args.output is None:
                sys.stdout.write(text)
            else:
                atomic_write_text(args.output, text)
        elif args.command == "bench":
            summary = cmd_bench(BenchConfig.from_dict(load_config(args.grid)), args.output, args.workers)
            print(json.dumps({k: (len(v) if isinstance(v, (list, dict)) else v) for k, v in summary.items()}))
            if summary["failed"]:
                return 3
    except DivergenceError as exc:
        print(f"hvabss: error: {exc} (partial trace written)", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"hvabss: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

import csv
import json

import numpy as np
import pytest
import yaml

from hvabss.bench import RESULT_COLUMNS, median_improvement, run_bench, worker_count
from hvabss.cli import TRACE_COLUMNS, main
from hvabss.config import BenchConfig, RunConfig
from hvabss.io import read_wav, write_wav
from hvabss.signal import Audio

SCENARIO = {"name": "det2-harmonic", "convolutive": False, "duration": 1.0}
STFT = {"window_length": 512}


def _mix(tmp_path, seed=1):
    tmp_path.mkdir(exist_ok=True)
    spec = tmp_path / "spec.yaml"
    spec.write_text(yaml.safe_dump({
        "sources": [{"type": "harmonic", "f0": 220.0}, {"type": "harmonic", "f0": 311.0}],
        "mixing": {"type": "instantaneous", "matrix": [[1.0, 0.6], [0.6, 1.0]]},
        "duration": 1.0,
        "seed": 0,
    }))
    out = tmp_path / "mix"
    assert main(["mix", str(spec), "-o", str(out), "--seed", str(seed)]) == 0
    return out


def _read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_mix_writes_mixture_and_references(tmp_path):
    out = _mix(tmp_path)
    mix = read_wav(out / "mixture.wav")
    assert mix.n_channels == 2 and mix.sample_rate == 16000 and len(mix) == 16000
    assert sorted(p.name for p in (out / "references").iterdir()) == ["source_1.wav", "source_2.wav"]
    assert json.loads((out / "mix.json").read_text())["seed"] == 1
    # determinism by seed
    again = _mix(tmp_path / "again")
    np.testing.assert_array_equal(read_wav(again / "mixture.wav").samples, mix.samples)


def test_mix_warns_on_non_determined_spec(tmp_path):
    spec = tmp_path / "spec.yaml"
    spec.write_text(yaml.safe_dump({
        "sources": [{"f0": 220.0}, {"f0": 311.0}],
        "mixing": {"type": "instantaneous", "matrix": [[1, 0.5], [0.5, 1], [0.3, 0.3]]},
        "duration": 0.5,
    }))
    with pytest.warns(RuntimeWarning, match="not a determined"):
        assert main(["mix", str(spec), "-o", str(tmp_path / "m")]) == 0
    assert read_wav(tmp_path / "m" / "mixture.wav").n_channels == 3


def test_separate_then_eval(tmp_path, capsys):
    mix = _mix(tmp_path)
    out = tmp_path / "sep"
    code = main(["separate", str(mix / "mixture.wav"), "-o", str(out), "--method", "iva", "--n-iter", "15",
                 "--window-length", "512"])
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == ["run.json", "source_1.wav", "source_2.wav", "trace.csv"]
    rows = _read_csv(out / "trace.csv")
    assert list(rows[0]) == list(TRACE_COLUMNS)
    assert len(rows) == 15
    assert all(np.isfinite(float(r["objective"])) for r in rows)
    run = json.loads((out / "run.json").read_text())
    assert run["params"]["lam"] == "auto" and run["solver"]["n_iter"] == 15 and run["stft"]["hop"] == 256
    assert run["schema_version"] == 1

    report = tmp_path / "eval.csv"
    assert main(["eval", str(out), str(mix / "references"), "--mixture", str(mix / "mixture.wav"),
                 "-o", str(report)]) == 0
    rows = _read_csv(report)
    assert [r["source"] for r in rows] == ["1", "2"]
    assert all(r["sdr_improvement"] != "" for r in rows)


def test_separate_hva_json_trace_and_config_file(tmp_path):
    mix = _mix(tmp_path)
    cfg = tmp_path / "run.yaml"
    cfg.write_text(yaml.safe_dump({"method": "hva", "params": {"lam": 0.12, "kappa": 2},
                                   "solver": {"n_iter": 4}, "stft": STFT}))
    out = tmp_path / "sep"
    assert main(["separate", str(mix / "mixture.wav"), "-o", str(out), "--config", str(cfg),
                 "--kappa", "1", "--format", "json"]) == 0
    trace = json.loads((out / "trace.json").read_text())
    assert len(trace["records"]) == 4 and "mask_mean" in trace["records"][0]
    run = json.loads((out / "run.json").read_text())
    # flags override the file, every default is spelled out
    assert run["params"]["kappa"] == 1 and run["params"]["lam"] == 0.12 and run["params"]["eps"] == 1e-3


def test_separate_rejects_mono(tmp_path, capsys):
    write_wav(Audio(np.random.default_rng(0).standard_normal(4000) * 0.1, 16000), tmp_path / "mono.wav")
    assert main(["separate", str(tmp_path / "mono.wav"), "-o", str(tmp_path / "o")]) == 1
    assert "determined BSS requires N >= 2" in capsys.readouterr().err


def test_separate_rejects_bad_parameters(tmp_path, capsys):
    mix = _mix(tmp_path)
    assert main(["separate", str(mix / "mixture.wav"), "-o", str(tmp_path / "o"), "--method", "iva",
                 "--kappa", "2"]) == 1
    assert "not valid" in capsys.readouterr().err
    assert main(["separate", str(mix / "mixture.wav"), "-o", str(tmp_path / "o"), "--n-sources", "3"]) == 1


def test_divergence_dumps_partial_trace(tmp_path, monkeypatch, capsys):
    from hvabss import solver

    mix = _mix(tmp_path)
    real_step = solver.pds_step
    calls = []

    def flaky(state, X, cfg, return_mask=False):
        nxt, mask = real_step(state, X, cfg, return_mask=True)
        calls.append(1)
        if len(calls) == 3:
            nxt = solver.SolverState(nxt.w * np.nan, nxt.y, nxt.iteration, nxt.xw)
        return (nxt, mask) if return_mask else nxt

    monkeypatch.setattr(solver, "pds_step", flaky)
    out = tmp_path / "sep"
    code = main(["separate", str(mix / "mixture.wav"), "-o", str(out), "--n-iter", "10", "--window-length", "512"])
    assert code == 2
    assert "iteration 3" in capsys.readouterr().err
    assert len(_read_csv(out / "trace.csv")) == 2


def test_eval_perfect_shuffled_and_mismatched(tmp_path, capsys):
    mix = _mix(tmp_path)
    refs = mix / "references"
    capsys.readouterr()
    assert main(["eval", str(refs), str(refs), "--format", "json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["sdr"] == [300.0, 300.0] and report["schema_version"] == 1

    shuffled = tmp_path / "shuffled"
    shuffled.mkdir()
    (shuffled / "a.wav").write_bytes((refs / "source_2.wav").read_bytes())
    (shuffled / "b.wav").write_bytes((refs / "source_1.wav").read_bytes())
    assert main(["eval", str(shuffled), str(refs), "--format", "json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["sdr"] == [300.0, 300.0] and report["permutation"] == [1, 0]

    short = tmp_path / "short"
    short.mkdir()
    for n in (1, 2):
        write_wav(Audio(np.zeros(100) + 0.1, 16000), short / f"s{n}.wav")
    assert main(["eval", str(short), str(refs)]) == 1
    assert "samples" in capsys.readouterr().err


def _bench_cfg(**kw):
    d = {"methods": [{"method": "iva"}, {"method": "hva", "grid": {"lam": [0.0, 0.08]}}],
         "seeds": [0, 1], "scenario": SCENARIO, "stft": STFT, "solver": {"n_iter": 12}, "checkpoints": [6]}
    d.update(kw)
    return BenchConfig.from_dict(d)


def test_bench_single_cell_equals_separate_plus_eval(tmp_path):
    cfg = _bench_cfg(methods=[{"method": "hva", "params": {"lam": 0.08}}], seeds=[3], checkpoints=[])
    summary = run_bench(cfg, tmp_path / "bench", workers=1)
    assert summary["complete"] and len(summary["done"]) == 1
    rows = _read_csv(tmp_path / "bench" / "results.csv")
    assert list(rows[0]) == list(RESULT_COLUMNS)
    bench = {(r["source"], r["metric"]): float(r["value"]) for r in rows}

    spec = tmp_path / "spec.yaml"
    spec.write_text(yaml.safe_dump({
        "sources": [{"f0": 220.0}, {"f0": 311.0}],
        "mixing": {"type": "instantaneous", "matrix": [[1.0, 0.6], [0.6, 1.0]]},
        "snr_db": 30.0, "duration": 1.0, "seed": 3,
    }))
    assert main(["mix", str(spec), "-o", str(tmp_path / "m")]) == 0
    assert main(["separate", str(tmp_path / "m" / "mixture.wav"), "-o", str(tmp_path / "s"), "--method", "hva",
                 "--lam", "0.08", "--n-iter", "12", "--window-length", "512"]) == 0
    assert main(["eval", str(tmp_path / "s"), str(tmp_path / "m" / "references"), "--mixture",
                 str(tmp_path / "m" / "mixture.wav"), "-o", str(tmp_path / "e.csv")]) == 0
    for r in _read_csv(tmp_path / "e.csv"):
        for metric in ("sdr", "sir", "sar", "sdr_improvement"):
            # the CLI path stores mixture and estimates as float32 WAV
            assert float(r[metric]) == pytest.approx(bench[(r["source"], metric)], abs=1e-3)


def test_bench_resume_is_identical(tmp_path):
    cfg = _bench_cfg()
    full = run_bench(cfg, tmp_path / "full", workers=1)
    assert full["complete"] and len(full["done"]) == 6
    first = run_bench(cfg, tmp_path / "resumed", workers=1, max_cells=2)
    assert not first["complete"] and len(first["done"]) == 2
    second = run_bench(cfg, tmp_path / "resumed", workers=1)
    assert second["complete"] and len(second["skipped"]) == 2 and len(second["done"]) == 4
    assert (tmp_path / "full" / "results.csv").read_bytes() == (tmp_path / "resumed" / "results.csv").read_bytes()
    rows = _read_csv(tmp_path / "full" / "results.csv")
    assert {r["iteration"] for r in rows} == {"6", "12"}
    assert len(rows) == 6 * 2 * 2 * 4  # cells x checkpoints x sources x metrics
    median_improvement(tmp_path / "full" / "results.csv", "hva", iteration=12, lam=0.08)


def test_bench_workers_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("HVABSS_WORKERS", "2")
    assert worker_count() == 2
    cfg = _bench_cfg(methods=[{"method": "iva"}])
    run_bench(cfg, tmp_path / "two")
    monkeypatch.setenv("HVABSS_WORKERS", "1")
    run_bench(cfg, tmp_path / "one")
    assert (tmp_path / "one" / "results.csv").read_bytes() == (tmp_path / "two" / "results.csv").read_bytes()
    monkeypatch.setenv("HVABSS_WORKERS", "zero")
    with pytest.raises(ValueError, match="HVABSS_WORKERS"):
        worker_count()


def test_bench_records_failed_cells(tmp_path, capsys):
    grid = tmp_path / "grid.yaml"
    cfg = _bench_cfg(methods=[{"method": "hva", "grid": {"quefrency_length": [4, None]}}], seeds=[0])
    grid.write_text(yaml.safe_dump({**cfg.to_dict(), "stft": STFT}))
    assert main(["bench", str(grid), "-o", str(tmp_path / "b"), "--workers", "1"]) == 3
    index = json.loads((tmp_path / "b" / "index.json").read_text())
    statuses = sorted(v["status"] for v in index.values())
    assert statuses == ["done", "failed"]
    failed = [v for v in index.values() if v["status"] == "failed"][0]
    assert "quefrency_length" in failed["error"]


def test_config_validation():
    with pytest.raises(ValueError, match="unknown run config"):
        RunConfig.from_dict({"method": "hva", "colour": "blue"})
    with pytest.raises(ValueError, match="solver keys"):
        RunConfig(solver={"tolerance": 1e-6})
    with pytest.raises(ValueError, match="report_format"):
        RunConfig(report_format="xml")
    with pytest.raises(ValueError, match="duplicate"):
        BenchConfig(methods=[{"method": "iva"}, {"method": "iva"}])
    with pytest.raises(ValueError, match="unknown scenario"):
        from hvabss.config import scenario_spec

        scenario_spec({"name": "det5"}, 0)


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "hvabss" in capsys.readouterr().out

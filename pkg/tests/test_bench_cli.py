import json
from pathlib import Path

import numpy as np
import pytest

from xaibench import bench, io
from xaibench.bench import (IDENTITY_GT, BenchConfig, ConfigError,
                            config_from_dict, run_benchmark, worker_count)
from xaibench.cli import main
from xaibench.methods import MethodConfig

TINY_METHOD_CFG = MethodConfig(ig_steps=4, sg_samples=3, rise_masks=16)

TINY = BenchConfig(seeds=(0,), methods=("saliency", IDENTITY_GT),
                   metrics=("cor_ns", "cor_s", "mae"), per_class=1,
                   method_config=TINY_METHOD_CFG)


def test_config_validation():
    with pytest.raises(ConfigError, match="unknown method"):
        BenchConfig(methods=("shapley",)).validate()
    with pytest.raises(ConfigError, match="unknown metric"):
        BenchConfig(metrics=("auc",)).validate()
    with pytest.raises(ConfigError, match="seed"):
        BenchConfig(seeds=()).validate()
    with pytest.raises(ConfigError, match="per_class"):
        BenchConfig(per_class=0).validate()


def test_config_from_dict_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown config keys"):
        config_from_dict({"per_class": 1, "bootstrap": True})
    cfg = config_from_dict({"seeds": [3], "per_class": 2,
                            "method_config": {"ig_steps": 8}})
    assert cfg.seeds == (3,)
    assert cfg.method_config.ig_steps == 8


def test_worker_count_env(monkeypatch):
    monkeypatch.delenv(bench.WORKERS_ENV, raising=False)
    assert worker_count() == 1
    monkeypatch.setenv(bench.WORKERS_ENV, "4")
    assert worker_count() == 4
    monkeypatch.setenv(bench.WORKERS_ENV, "zero")
    with pytest.raises(ConfigError):
        worker_count()
    monkeypatch.setenv(bench.WORKERS_ENV, "0")
    with pytest.raises(ConfigError):
        worker_count()


def test_identity_gt_scores_perfectly():
    rep, timing, models, corpus = run_benchmark(TINY)
    for metric in ("cor_ns", "cor_s"):
        cell = rep["metrics"][metric][IDENTITY_GT]
        assert cell["mean"] == 1.0
        assert cell["std"] == 0.0
    assert rep["metrics"]["mae"][IDENTITY_GT]["mean"] == 0.0
    assert rep["config"]["per_class"] == 1
    assert "saliency" in timing["mean_ms_per_explanation"]
    assert len(models) == 5
    assert sum(len(v) for v in corpus.values()) == 19


def test_benchmark_report_is_byte_identical():
    from xaibench.report import dumps_json
    a, _, _, _ = run_benchmark(TINY)
    b, _, _, _ = run_benchmark(TINY)
    assert dumps_json(a) == dumps_json(b)


def test_parallel_run_matches_serial(monkeypatch):
    from xaibench.report import dumps_json
    serial, _, _, _ = run_benchmark(TINY)
    monkeypatch.setenv(bench.WORKERS_ENV, "4")
    parallel, _, _, _ = run_benchmark(TINY)
    assert dumps_json(serial) == dumps_json(parallel)


# ------------------------------------------------------------------- CLI

def test_cli_pipeline_stages(tmp_path):
    corpus_dir = tmp_path / "corpus"
    expl_dir = tmp_path / "expl"
    assert main(["gen-dataset", "--seed", "0", "--per-class", "1",
                 "--out", str(corpus_dir)]) == 0
    assert (corpus_dir / "manifest.json").exists()
    assert main(["explain", "--corpus", str(corpus_dir),
                 "--methods", "saliency,identity_gt",
                 "--out", str(expl_dir)]) == 0
    loaded = io.load_explanations(expl_dir)
    assert len(loaded) == 38  # 19 examples x 2 methods
    out = tmp_path / "report.json"
    assert main(["evaluate", "--corpus", str(corpus_dir),
                 "--explanations", str(expl_dir),
                 "--metrics", "cor_ns,mae", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["metrics"]["cor_ns"]["identity_gt"]["mean"] == 1.0
    assert out.with_suffix(".csv").exists()
    assert out.with_suffix(".txt").exists()
    assert main(["report", "--report", str(out), "--format", "table"]) == 0


def test_cli_build_model(tmp_path):
    out = tmp_path / "model0"
    assert main(["build-model", "--concept-id", "0", "--out", str(out)]) == 0
    assert (out / "model.json").exists()


def test_cli_bench_writes_all_artifacts(tmp_path):
    out = tmp_path / "bench"
    code = main(["bench", "--seeds", "0", "--per-class", "1",
                 "--methods", "saliency,identity_gt",
                 "--metrics", "cor_ns,mae", "--no-gallery",
                 "--out", str(out)])
    assert code == 0
    for name in ("report.json", "report.csv", "report.txt", "timing.json"):
        assert (out / name).exists()
    assert not (out / "gallery.png").exists()


def test_cli_bench_config_file(tmp_path):
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps({"seeds": [0], "per_class": 1,
                               "methods": ["saliency"],
                               "metrics": ["cor_ns"]}))
    out = tmp_path / "bench"
    assert main(["bench", "--config", str(cfg), "--no-gallery",
                 "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["config"]["seeds"] == [0]


def test_cli_exit_code_1_on_config_errors(tmp_path):
    assert main(["explain", "--corpus", str(tmp_path),
                 "--methods", "nope", "--out", str(tmp_path / "e")]) == 1
    assert main(["bench", "--methods", "nope", "--no-gallery",
                 "--out", str(tmp_path / "b")]) == 1
    assert main(["evaluate", "--corpus", str(tmp_path),
                 "--explanations", str(tmp_path),
                 "--metrics", "nope", "--out", str(tmp_path / "r")]) == 1


def test_cli_exit_code_2_on_stage_failure(tmp_path):
    # a corpus directory without a manifest breaks the explain stage
    assert main(["explain", "--corpus", str(tmp_path),
                 "--out", str(tmp_path / "e")]) == 2


def test_cli_unknown_option_is_config_error():
    assert main(["gen-dataset", "--frobnicate"]) == 1

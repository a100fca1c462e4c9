"""End-to-end benchmark orchestration: build the five models, generate
their corpora, run the attribution methods, score the metrics and
aggregate a report.

Every stage is a pure function of the run seed, so two benchmarks with
the same config produce byte-identical score reports. Wall-clock
timings are the one exception and live in a separate timing file.
"""

from __future__ import annotations

import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from xaibench import compiler, dataset, io, metrics, report
from xaibench.gt import GroundTruth
from xaibench.methods import METHODS, Explanation, MethodConfig, attribute

WORKERS_ENV = "XAIBENCH_WORKERS"

# debug pseudo-method: echoes the ground truth back as the explanation,
# so every correctness cell must come out 1.0
IDENTITY_GT = "identity_gt"

DEFAULT_METRICS = tuple(metrics.PAIR_METRICS) + tuple(metrics.MODEL_METRICS)


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, seed, cause: Exception):
        super().__init__(f"stage {stage!r} failed for seed {seed}: {cause}")
        self.stage = stage
        self.seed = seed


@dataclass(frozen=True)
class BenchConfig:
    seeds: tuple[int, ...] = (0, 1, 2)
    methods: tuple[str, ...] = tuple(METHODS)
    metrics: tuple[str, ...] = DEFAULT_METRICS
    per_class: int = dataset.PER_CLASS
    method_config: MethodConfig = field(default_factory=MethodConfig)

    def validate(self):
        if len(self.seeds) < 1:
            raise ConfigError("at least one run seed is required")
        for m in self.methods:
            if m not in METHODS and m != IDENTITY_GT:
                raise ConfigError(f"unknown method {m!r}")
        for m in self.metrics:
            if m not in metrics.ALL_METRICS:
                raise ConfigError(f"unknown metric {m!r}")
        if self.per_class < 1:
            raise ConfigError("per_class must be >= 1")


def config_from_dict(raw: dict) -> BenchConfig:
    known = {"seeds", "methods", "metrics", "per_class", "method_config"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict = {}
    for key in ("seeds", "methods", "metrics"):
        if key in raw:
            kwargs[key] = tuple(raw[key])
    if "per_class" in raw:
        kwargs["per_class"] = int(raw["per_class"])
    if "method_config" in raw:
        kwargs["method_config"] = MethodConfig(**raw["method_config"])
    cfg = BenchConfig(**kwargs)
    cfg.validate()
    return cfg


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return n


def explain_example(method: str, net, example, cfg: MethodConfig) -> Explanation:
    if method == IDENTITY_GT:
        return Explanation(values=example.gt.gt3d, raw=example.gt.gt3d,
                           method=method, dims="3D", elapsed_ms=0.0)
    return attribute(method, net, example.image, example.class_label, cfg)


def score_example(expl: Explanation, example, net,
                  metric_names) -> dict[str, float]:
    gt = example.gt.gt2d if expl.dims == "2D" else example.gt.gt3d
    return metrics.evaluate_explanation(
        expl.values, gt, metric_names, net=net, x=example.image,
        class_index=example.class_label)


def _run_one_seed(config: BenchConfig, seed: int, run_index: int,
                  workers: int, progress=None):
    try:
        models = {mid: compiler.compile_model(mid) for mid in range(5)}
    except Exception as exc:
        raise StageError("build-models", seed, exc) from exc
    try:
        corpus = dataset.build_corpus(root_seed=seed, per_class=config.per_class)
    except Exception as exc:
        raise StageError("gen-dataset", seed, exc) from exc

    jobs = [(mid, ex, method)
            for mid in sorted(corpus)
            for ex in corpus[mid]
            for method in config.methods]

    def one(job):
        mid, ex, method = job
        expl = explain_example(method, models[mid], ex, config.method_config)
        scores = score_example(expl, ex, models[mid], config.metrics)
        eid = io.example_id(ex.model_id, ex.class_label, ex.index)
        recs = [{"run": run_index, "method": method, "example_id": eid,
                 "metric": name, "value": value}
                for name, value in scores.items()]
        return recs, (method, expl.elapsed_ms)

    records: list[dict] = []
    timings: dict[str, list[float]] = {m: [] for m in config.methods}
    try:
        # one warm-up per method, excluded from the timing averages
        first = corpus[min(corpus)][0]
        for method in config.methods:
            explain_example(method, models[first.model_id], first,
                            config.method_config)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(one, jobs))
        else:
            results = [one(job) for job in jobs]
    except StageError:
        raise
    except Exception as exc:
        raise StageError("explain-and-score", seed, exc) from exc

    for recs, (method, ms) in results:
        records.extend(recs)
        timings[method].append(ms)
        if progress is not None:
            progress()
    return records, timings, models, corpus


def run_benchmark(config: BenchConfig, progress=None):
    """Returns (report_dict, timing_dict, last_models, last_corpus)."""
    config.validate()
    workers = worker_count()
    all_records: list[dict] = []
    timing_samples: dict[str, list[float]] = {m: [] for m in config.methods}
    models = corpus = None
    for run_index, seed in enumerate(config.seeds):
        records, timings, models, corpus = _run_one_seed(
            config, seed, run_index, workers, progress)
        all_records.extend(records)
        for method, samples in timings.items():
            timing_samples[method].extend(samples)

    rep = report.aggregate(all_records)
    rep["config"] = {
        "seeds": list(config.seeds),
        "methods": list(config.methods),
        "metrics": sorted(config.metrics),
        "per_class": config.per_class,
    }
    timing = {
        "mean_ms_per_explanation": {
            m: metrics.time_metric(v) for m, v in timing_samples.items() if v},
        "machine": {"platform": platform.platform(),
                    "python": platform.python_version(),
                    "workers": workers},
    }
    return rep, timing, models, corpus

"""Command-line interface.

Subcommands cover the pipeline stages individually (build-model,
gen-dataset, explain, evaluate, report) and as a whole (bench). Exit
codes: 0 success, 1 configuration error, 2 stage failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from xaibench import bench, compiler, dataset, io, metrics, report
from xaibench.methods import METHODS, MethodConfig, attribute


def _parse_list(raw: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in raw.split(",") if s.strip())


@click.group()
def cli():
    """Attribution-method benchmark over exactly-known models."""


@cli.command("build-model")
@click.option("--concept-id", type=click.IntRange(0, 4), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--verify/--no-verify", default=True,
              help="Check the compiled network against the formula oracle.")
def build_model(concept_id, out_dir, verify):
    """Compile one concept's model and save it."""
    net = compiler.compile_model(concept_id)
    if verify:
        result = compiler.verify_against_oracle(net, concept_id)
        if result["mismatches"]:
            raise bench.StageError("verify", concept_id,
                                   RuntimeError(f"{len(result['mismatches'])} oracle mismatches"))
        click.echo(f"oracle agreement: {result['agreements']}/{result['cases']}")
    io.save_model(net, out_dir)
    click.echo(f"model {concept_id} -> {out_dir}")


@cli.command("gen-dataset")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--per-class", type=click.IntRange(min=1),
              default=dataset.PER_CLASS, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def gen_dataset(seed, per_class, out_dir):
    """Generate the five models' test sets with ground truths."""
    corpus = dataset.build_corpus(root_seed=seed, per_class=per_class)
    io.save_corpus(corpus, seed, out_dir)
    total = sum(len(v) for v in corpus.values())
    click.echo(f"{total} examples -> {out_dir}")


@cli.command("explain")
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), required=True)
@click.option("--methods", "method_list", default=",".join(METHODS),
              show_default=True, help="Comma-separated method names.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="RNG seed for the sampled methods.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
def explain(corpus_dir, method_list, seed, out_dir):
    """Run attribution methods over a saved corpus."""
    names = _parse_list(method_list)
    for name in names:
        if name not in METHODS and name != bench.IDENTITY_GT:
            raise click.UsageError(f"unknown method {name!r}")
    cfg = MethodConfig(rng_seed=seed)
    entries = io.load_corpus(corpus_dir)
    models = {mid: compiler.compile_model(mid)
              for mid in sorted({e["model_id"] for e in entries})}
    records = []
    for entry in entries:
        for name in names:
            if name == bench.IDENTITY_GT:
                values, dims, ms = entry["gt3d"], "3D", 0.0
            else:
                expl = attribute(name, models[entry["model_id"]],
                                 entry["image"], entry["class_label"], cfg)
                values, dims, ms = expl.values, expl.dims, expl.elapsed_ms
            records.append({"example_id": entry["example_id"],
                            "model_id": entry["model_id"],
                            "class_label": entry["class_label"],
                            "method": name, "dims": dims,
                            "values": values, "elapsed_ms": ms})
    io.save_explanations(records, out_dir)
    click.echo(f"{len(records)} explanations -> {out_dir}")


@cli.command("evaluate")
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), required=True)
@click.option("--explanations", "expl_dir", type=click.Path(exists=True), required=True)
@click.option("--metrics", "metric_list", default=",".join(metrics.PAIR_METRICS),
              show_default=False, help="Comma-separated metric names.")
@click.option("--out", "out_path", type=click.Path(), required=True)
def evaluate(corpus_dir, expl_dir, metric_list, out_path):
    """Score saved explanations against their ground truths."""
    names = _parse_list(metric_list)
    for name in names:
        if name not in metrics.ALL_METRICS:
            raise click.UsageError(f"unknown metric {name!r}")
    need_model = any(n in metrics.MODEL_METRICS for n in names)
    corpus = {e["example_id"]: e for e in io.load_corpus(corpus_dir)}
    models = {}
    records = []
    for entry in io.load_explanations(expl_dir):
        ex = corpus.get(entry["example_id"])
        if ex is None:
            raise click.UsageError(
                f"explanation for unknown example {entry['example_id']!r}")
        gt = ex["gt2d"] if entry["dims"] == "2D" else ex["gt3d"]
        net = x = cls = None
        if need_model:
            mid = entry["model_id"]
            if mid not in models:
                models[mid] = compiler.compile_model(mid)
            net, x, cls = models[mid], ex["image"], entry["class_label"]
        scores = metrics.evaluate_explanation(entry["values"], gt, names,
                                              net=net, x=x, class_index=cls)
        for name, value in scores.items():
            records.append({"run": 0, "method": entry["method"],
                            "example_id": entry["example_id"],
                            "metric": name, "value": value})
    rep = report.aggregate(records)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    report.write_json(rep, out)
    report.write_csv(rep, out.with_suffix(".csv"))
    report.write_table(rep, out.with_suffix(".txt"))
    click.echo(f"report -> {out}")


@cli.command("report")
@click.option("--report", "report_path", type=click.Path(exists=True), required=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "table"]),
              default="table", show_default=True)
def report_cmd(report_path, fmt):
    """Re-render a saved JSON report."""
    rep = json.loads(Path(report_path).read_text())
    if fmt == "json":
        click.echo(report.dumps_json(rep), nl=False)
    elif fmt == "csv":
        click.echo(report.dumps_csv(rep), nl=False)
    else:
        click.echo(report.format_table(rep), nl=False)


@cli.command("bench")
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="JSON config file; flags below override its values.")
@click.option("--seeds", default=None, help="Comma-separated run seeds.")
@click.option("--methods", "method_list", default=None)
@click.option("--metrics", "metric_list", default=None)
@click.option("--per-class", type=int, default=None)
@click.option("--gallery/--no-gallery", default=True, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def bench_cmd(config_path, seeds, method_list, metric_list, per_class,
              gallery, out_dir):
    """Full pipeline: models, corpora, explanations, scores, report."""
    raw: dict = {}
    if config_path:
        raw = json.loads(Path(config_path).read_text())
    if seeds is not None:
        raw["seeds"] = [int(s) for s in _parse_list(seeds)]
    if method_list is not None:
        raw["methods"] = list(_parse_list(method_list))
    if metric_list is not None:
        raw["metrics"] = list(_parse_list(metric_list))
    if per_class is not None:
        raw["per_class"] = per_class
    config = bench.config_from_dict(raw)

    rep, timing, models, corpus = bench.run_benchmark(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.write_json(rep, out / "report.json")
    report.write_csv(rep, out / "report.csv")
    report.write_table(rep, out / "report.txt")
    report.write_timing(timing, out / "timing.json")
    if gallery:
        rows = []
        real_methods = [m for m in config.methods if m in METHODS]
        for mid in sorted(corpus):
            ex = corpus[mid][0]
            expls = {m: bench.explain_example(m, models[mid], ex,
                                              config.method_config).values
                     for m in real_methods}
            rows.append({"example_id": io.example_id(mid, ex.class_label, ex.index),
                         "image": ex.image, "gt2d": ex.gt.gt2d,
                         "explanations": expls})
        report.write_gallery(rows, real_methods, out / "gallery.png")
    click.echo(f"benchmark report -> {out}")
    click.echo(report.format_table(rep), nl=False)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except (click.UsageError, bench.ConfigError) as exc:
        click.echo(f"config error: {exc.format_message() if hasattr(exc, 'format_message') else exc}",
                   err=True)
        return 1
    except bench.StageError as exc:
        click.echo(f"stage failure: {exc}", err=True)
        return 2
    except Exception as exc:  # any stage blowing up is a stage failure
        click.echo(f"stage failure: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

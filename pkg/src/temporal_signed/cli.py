"""``tsg`` command line: generate, ingest, compare, benchmark.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric divergence.
"""

from __future__ import annotations

import functools
import json
import sys
import warnings
from dataclasses import fields
from pathlib import Path

import click

from . import experiment, io, synth
from ._alloc import tune_allocator
from .datasets import SnapshotConfig, load_ratings_dataset
from .errors import ConfigError, DataError, DivergenceError, NumericError
from .graph import degree_statistics

EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGENCE = 2, 3, 4


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except DataError as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except (DivergenceError, NumericError) as exc:
            click.echo(f"numeric divergence: {exc}", err=True)
            sys.exit(EXIT_DIVERGENCE)
    return wrapper


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Temporal signed link-sign prediction experiments."""
    tune_allocator()


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
              help="JSON generator config with a 'generator' key (ws | ba).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_handle_errors
def generate(config_path, out_dir):
    """Generate a synthetic temporal signed dataset."""
    kind, cfg = synth.from_config(io.load_json_config(config_path))
    tg = synth.generate(kind, cfg)
    out = Path(out_dir)
    io.save_graph(tg, out / "dataset.json")
    stats = [degree_statistics(g).as_dict() for g in tg]
    manifest = {**synth.generation_manifest(kind, cfg), "n": tg.node_count, "T": tg.T,
                "edges_per_snapshot": [g.num_edges for g in tg], "degree_stats": stats}
    io.write_json(out / "manifest.json", manifest)
    for t, s in enumerate(stats):
        click.echo(f"snapshot {t}: edges={tg[t].num_edges} median_deg={s['median_degree']:g} "
                   f"mean_deg={s['mean_degree']:.3f} max_deg={s['max_degree']:g} "
                   f"top1%_share={s['top_fraction_edge_share']:.3f}")


_SNAPSHOT_FIELDS = [f.name for f in fields(SnapshotConfig)]


@main.command()
@click.argument("csv_path", type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(dir_okay=False),
              help="JSON snapshot config (num_snapshots, binning, accumulation, min_edges_per_snapshot).")
@click.option("--snapshots", "num_snapshots", type=int, default=None)
@click.option("--binning", type=click.Choice(["equal-frequency", "equal-width"]), default=None)
@click.option("--accumulation", type=click.Choice(["cumulative", "interval"]), default=None)
@click.option("--persistence-min", type=int, default=None,
              help="Keep only nodes active in at least this many snapshots.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_handle_errors
def ingest(csv_path, config_path, num_snapshots, binning, accumulation, persistence_min, out_dir):
    """Parse a SOURCE,TARGET,RATING,TIME file into snapshots."""
    doc = io.load_json_config(config_path) if config_path else {}
    persistence_min = doc.pop("persistence_min", None) if persistence_min is None else persistence_min
    overrides = {"num_snapshots": num_snapshots, "binning": binning, "accumulation": accumulation}
    doc.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(doc) - set(_SNAPSHOT_FIELDS)
    if unknown:
        raise ConfigError(f"unknown snapshot config fields {sorted(unknown)}")
    cfg = SnapshotConfig(**doc)
    if not Path(csv_path).exists():
        raise DataError(f"{csv_path}: no such file")
    ds = load_ratings_dataset(csv_path, cfg, persistence_min)
    out = Path(out_dir)
    io.save_graph(ds.graph, out / "dataset.json")
    io.write_json(out / "manifest.json", ds.manifest)
    m = ds.manifest
    click.echo(f"nodes={m['node_count']} edges={m['edge_count']} "
               f"positive_fraction={m['positive_fraction']:.4f} rejected_rows={m['rejected_rows']}")


def _load_spec(config_path, seeds, fusion):
    spec = experiment.load_spec(config_path)
    return experiment.with_overrides(spec, seeds=seeds, fusion=fusion)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--seeds", default=None, help="Seed count (n -> 0..n-1) or comma-separated list.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--model", type=click.Choice(["baseline", "enhanced", "both"]), default="both")
@click.option("--fusion", type=click.Choice(["global", "adaptive"]), default=None)
@click.option("--no-plots", is_flag=True)
@click.option("--jobs", type=click.IntRange(min=1), default=1)
@_handle_errors
def compare(config_path, seeds, out_dir, model, fusion, no_plots, jobs):
    """Paired multi-seed baseline vs enhanced comparison."""
    spec = _load_spec(config_path, seeds, fusion)
    models = ("baseline", "enhanced") if model == "both" else (model,)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = experiment.compare(spec, models, jobs)
    for w in caught:
        click.echo(f"warning: {w.message}", err=True)
    experiment.write_compare_outputs(spec, res, out_dir, plots=not no_plots)
    if res.report is None:
        for k, s in res.single["summaries"].items():
            click.echo(f"{model} {k}: {s['mean']:.4f} ± {s['se']:.4f}")
        return
    for k, s in res.report.summaries.items():
        click.echo(f"{k}: baseline {s.baseline_mean:.4f} ± {s.baseline_se:.4f}  "
                   f"enhanced {s.enhanced_mean:.4f} ± {s.enhanced_se:.4f}{s.stars}  "
                   f"rel {s.relative_improvement_pct:+.2f}%  t={s.t:.3f} p={s.p:.4g}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--seeds", default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--fusion", type=click.Choice(["global", "adaptive"]), default=None)
@click.option("--no-plots", is_flag=True)
@_handle_errors
def benchmark(config_path, seeds, out_dir, fusion, no_plots):
    """Per-epoch overhead and HCIM scaling timings."""
    spec = _load_spec(config_path, seeds, fusion)
    result = experiment.benchmark(spec)
    experiment.write_benchmark_outputs(spec, result, out_dir, plots=not no_plots)
    click.echo(json.dumps({k: result[k] for k in ("per_epoch_seconds", "overhead_pct",
                                                   "n_doubling_ratios", "T_ratio", "checks")},
                          indent=1))


if __name__ == "__main__":
    main()

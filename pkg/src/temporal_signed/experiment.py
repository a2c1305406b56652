"""Paired multi-seed experiments and runtime benchmarks.

An experiment spec is a JSON object::

    {
      "name": "ws-toy",
      "dataset": {"generator": "ws", "n": 300, ...}      # or {"path": "data.json"}
                                                          # or {"csv": "ratings.csv", "snapshots": {...}}
      "train": {...},                  # TrainConfig fields shared by both arms
      "baseline": {...}, "enhanced": {...},   # per-arm overrides
      "seeds": 30,                     # or an explicit list
      "k": 100,
      "benchmark": {...}
    }

Generator datasets are redrawn per run seed (generator seed = dataset seed +
run seed) unless ``"per_seed": false``. Baseline and enhanced always share
the dataset, the edge split and the backbone initialisation of a seed.
"""

from __future__ import annotations

import copy
import datetime as _dt
import logging
import platform
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__, _kernels, io, metrics, synth
from ._alloc import tune_allocator
from .backbone import EmbeddingCache
from .datasets import SnapshotConfig, load_ratings_dataset
from .errors import ConfigError, DivergenceError, NumericError
from .graph import TemporalSignedGraph
from .hcim import HcimConfig, hcim_forward, init_hcim
from .stats import EvalReport, standard_error, summarize
from .training import LinkModel, TrainConfig, loss_tensor, split_target_edges, train_run

log = logging.getLogger(__name__)

DEFAULT_SEEDS = 30
MAX_DIVERGED_FRACTION = 0.10
METRICS = ("auc", "f1", "p_at_k")
_TRAIN_FIELDS = {f.name for f in fields(TrainConfig)}


@dataclass
class ExperimentSpec:
    name: str
    dataset: dict
    baseline: TrainConfig
    enhanced: TrainConfig
    seeds: list
    k: int = 100
    per_seed_dataset: bool = True
    base_dir: str = "."
    benchmark: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def arms(self) -> dict[str, TrainConfig]:
        return {"baseline": self.baseline, "enhanced": self.enhanced}


def parse_seeds(value) -> list[int]:
    """``10`` -> seeds 0..9; ``"3,5,8"`` or a list -> those seeds."""
    if isinstance(value, bool):
        raise ConfigError("seeds must be a count or a list")
    if isinstance(value, int):
        seeds = list(range(value))
    elif isinstance(value, str):
        parts = [p for p in value.replace(" ", "").split(",") if p]
        try:
            seeds = list(range(int(parts[0]))) if len(parts) == 1 else [int(p) for p in parts]
        except (ValueError, IndexError):
            raise ConfigError(f"cannot parse seeds {value!r}") from None
    else:
        try:
            seeds = [int(s) for s in value]
        except (TypeError, ValueError):
            raise ConfigError(f"cannot parse seeds {value!r}") from None
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")
    if len(seeds) < 2:
        raise ConfigError("at least two seeds are needed for paired statistics")
    return seeds


def _train_config(doc: dict, where: str) -> TrainConfig:
    unknown = set(doc) - _TRAIN_FIELDS
    if unknown:
        raise ConfigError(f"{where}: unknown training fields {sorted(unknown)}")
    return TrainConfig(**doc)


def spec_from_dict(doc: dict, base_dir=".") -> ExperimentSpec:
    doc = copy.deepcopy(doc)
    if "dataset" not in doc or not isinstance(doc["dataset"], dict):
        raise ConfigError("experiment spec needs a 'dataset' object")
    common = doc.get("train", {})
    arms = {}
    for arm in ("baseline", "enhanced"):
        merged = {"model": arm, **common, **doc.get(arm, {})}
        arms[arm] = _train_config(merged, arm)
    for f in ("target_index", "train_fraction"):
        if getattr(arms["baseline"], f) != getattr(arms["enhanced"], f):
            raise ConfigError(f"baseline and enhanced must share {f} so that splits are paired")
    dataset = dict(doc["dataset"])
    per_seed = bool(dataset.pop("per_seed", True))
    return ExperimentSpec(
        name=str(doc.get("name", "experiment")), dataset=dataset,
        baseline=arms["baseline"], enhanced=arms["enhanced"],
        seeds=parse_seeds(doc.get("seeds", DEFAULT_SEEDS)), k=int(doc.get("k", 100)),
        per_seed_dataset=per_seed, base_dir=str(base_dir),
        benchmark=dict(doc.get("benchmark", {})), raw=doc)


def load_spec(path) -> ExperimentSpec:
    return spec_from_dict(io.load_json_config(path), Path(path).resolve().parent)


def with_overrides(spec: ExperimentSpec, seeds=None, fusion=None) -> ExperimentSpec:
    out = copy.copy(spec)
    if seeds is not None:
        out.seeds = parse_seeds(seeds)
    if fusion is not None:
        out.enhanced = replace(out.enhanced, fusion=fusion)
    return out


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _load_file_dataset(kind: str, path: str, snap_items: tuple, persistence_min) -> TemporalSignedGraph:
    if kind == "path":
        return io.load_graph(path)
    cfg = SnapshotConfig(**dict(snap_items))
    return load_ratings_dataset(path, cfg, persistence_min).graph


def build_dataset(dataset: dict, base_dir=".", run_seed: int | None = None) -> TemporalSignedGraph:
    ds = dict(dataset)
    if "generator" in ds:
        kind, cfg = synth.from_config(ds)
        if run_seed is not None:
            cfg = replace(cfg, seed=cfg.seed + run_seed)
        return synth.generate(kind, cfg)
    for kind in ("path", "csv"):
        if kind in ds:
            path = Path(ds[kind])
            if not path.is_absolute():
                path = Path(base_dir) / path
            snaps = tuple(sorted(ds.get("snapshots", {}).items()))
            return _load_file_dataset(kind, str(path), snaps, ds.get("persistence_min"))
    raise ConfigError("dataset needs one of 'generator', 'path' or 'csv'")


# ---------------------------------------------------------------------------
# paired runs
# ---------------------------------------------------------------------------

def run_seed(spec: ExperimentSpec, seed: int, models=("baseline", "enhanced")) -> dict:
    """Train the requested arms for one seed on a shared split."""
    tg = build_dataset(spec.dataset, spec.base_dir, seed if spec.per_seed_dataset else None)
    out = {"seed": seed, "metrics": {}, "wall_clock": {}, "loss_trace": {},
           "interpretability": {}, "error": None}
    arms = {m: replace(spec.arms[m], seed=seed) for m in models}
    split = split_target_edges(tg, next(iter(arms.values())))
    cache = EmbeddingCache()
    for name, cfg in arms.items():
        try:
            run = train_run(tg, cfg, split=split, cache=cache)
        except (DivergenceError, NumericError) as exc:
            out["error"] = f"{name}: {exc}"
            return out
        scored = metrics.ScoredEdges(run.test_scores, run.test_signs)
        out["metrics"][name] = {"auc": metrics.auc(scored), "f1": metrics.f1(scored),
                                "p_at_k": metrics.precision_at_k(scored, k=spec.k)}
        out["k_clamped"] = len(scored) < spec.k
        out["wall_clock"][name] = run.wall_clock
        out["loss_trace"][name] = run.loss_trace
        out["interpretability"][name] = run.interpretability
    return out


def _run_seed_task(args):
    return run_seed(*args)


def run_seeds(spec: ExperimentSpec, models=("baseline", "enhanced"), jobs: int = 1) -> list[dict]:
    tasks = [(spec, s, tuple(models)) for s in spec.seeds]
    if jobs <= 1:
        return [run_seed(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_seed_task, tasks))


def _screen_divergence(results: list[dict]) -> tuple[list[dict], list[str]]:
    failed = [r for r in results if r["error"]]
    if not failed:
        return results, []
    frac = len(failed) / len(results)
    if frac >= MAX_DIVERGED_FRACTION:
        raise DivergenceError(f"{len(failed)} of {len(results)} seeds diverged "
                              f"(first: seed {failed[0]['seed']}: {failed[0]['error']})")
    msgs = [f"seed {r['seed']} excluded: {r['error']}" for r in failed]
    for m in msgs:
        warnings.warn(m, RuntimeWarning, stacklevel=2)
    kept = [r for r in results if not r["error"]]
    if len(kept) < 2:
        raise DivergenceError("fewer than two seeds survived")
    return kept, msgs


@dataclass
class CompareResult:
    report: EvalReport | None
    results: list
    flags: list
    single: dict | None = None


def compare(spec: ExperimentSpec, models=("baseline", "enhanced"), jobs: int = 1) -> CompareResult:
    results, flags = _screen_divergence(run_seeds(spec, models, jobs))
    seeds = [r["seed"] for r in results]
    if any(r.get("k_clamped") for r in results):
        flags.append(f"p_at_k denominator clamped below k={spec.k}")
    if len(models) == 2:
        per = {m: {k: [r["metrics"][m][k] for r in results] for k in METRICS} for m in models}
        report = summarize(per["baseline"], per["enhanced"], seeds, flags)
        return CompareResult(report, results, flags)
    (m,) = models
    single = {}
    for k in METRICS:
        v = [r["metrics"][m][k] for r in results]
        single[k] = {"mean": float(np.mean(v)), "se": standard_error(v), "values": v}
    return CompareResult(None, results, flags, {"model": m, "summaries": single})


def _environment() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__,
            "platform": platform.platform(), "kernel_backend": _kernels.BACKEND,
            "allocator_tuned": bool(tune_allocator()), "package_version": __version__}


def write_compare_outputs(spec: ExperimentSpec, res: CompareResult, out_dir, plots=True) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    if res.report is not None:
        io.write_per_seed_csv(res.report, out / "per_seed.csv")
        io.write_summary_csv(res.report, out / "summary.csv", spec.name)
        io.write_report_json(res.report, out / "report.json", {"dataset": spec.name})
        files.update(per_seed="per_seed.csv", summary="summary.csv", report="report.json")
    else:
        io.write_json(out / "report.json", {"dataset": spec.name, **res.single, "flags": res.flags,
                                            "per_seed": [{"seed": r["seed"], **r["metrics"][res.single["model"]]}
                                                         for r in res.results]})
        files["report"] = "report.json"
    interp = {str(r["seed"]): r["interpretability"].get("enhanced", {}) for r in res.results}
    io.write_json(out / "interpretability.json", io._json_safe(interp))
    io.write_json(out / "runtime.json", {str(r["seed"]): r["wall_clock"] for r in res.results})
    files.update(interpretability="interpretability.json", runtime="runtime.json")
    if plots:
        from . import plots as _plots
        files.update(_plots.compare_plots(res, out))
    manifest = {"command": "compare", "spec": spec.raw, "seeds": spec.seeds,
                "fusion": spec.enhanced.fusion, "files": files, "flags": res.flags,
                "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
                "environment": _environment()}
    io.write_json(out / "manifest.json", manifest)
    return files


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------

def _time_call(fn, repeats: int) -> float:
    fn()  # warm-up (numba compilation, caches)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    # the minimum is the least noise-contaminated estimate on a shared machine
    return float(min(times))


def epoch_time(tg: TemporalSignedGraph, cfg: TrainConfig, repeats: int = 3) -> float:
    """Best-of-``repeats`` wall-clock of one forward+backward training step."""
    split = split_target_edges(tg, cfg)
    model = LinkModel(tg, split, cfg, EmbeddingCache())
    params = model.flat_params()

    def step():
        for t in params.values():
            t.grad = None
        loss_tensor(model.logits(split.train_src, split.train_dst), split.train_sign).backward()
    return _time_call(step, repeats)


def hcim_forward_time(n: int, T: int, d: int = 64, heads: int = 8, repeats: int = 3,
                      seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    cfg = HcimConfig(embed_dim=d, num_heads=heads)
    params = init_hcim(cfg, rng)
    history = [rng.standard_normal((n, d)) for _ in range(T)]
    z = rng.standard_normal((n, d))
    return _time_call(lambda: hcim_forward(history, z, params, cfg), repeats)


def _loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def benchmark(spec: ExperimentSpec) -> dict:
    tune_allocator()
    b = {"repeats": 5, "n_values": [250, 500, 1000], "T_values": [2, 4, 8],
         "n_fixed": 500, "T_fixed": 4, "embed_dim": 64, "heads": 8, **spec.benchmark}
    seed = spec.seeds[0]
    tg = build_dataset(spec.dataset, spec.base_dir, seed if spec.per_seed_dataset else None)
    per_epoch = {m: epoch_time(tg, replace(cfg, seed=seed), b["repeats"]) for m, cfg in spec.arms.items()}
    overhead = 100.0 * (per_epoch["enhanced"] - per_epoch["baseline"]) / per_epoch["baseline"]
    d, heads, reps = b["embed_dim"], b["heads"], b["repeats"]
    by_n = {n: hcim_forward_time(n, b["T_fixed"], d, heads, reps) for n in b["n_values"]}
    by_T = {T: hcim_forward_time(b["n_fixed"], T, d, heads, reps) for T in b["T_values"]}
    ns, Ts = sorted(by_n), sorted(by_T)
    n_ratios = [by_n[ns[i + 1]] / by_n[ns[i]] for i in range(len(ns) - 1)]
    T_ratio = by_T[Ts[-1]] / by_T[Ts[0]]
    per_snapshot = [by_T[T] / T for T in Ts]
    return {
        "per_epoch_seconds": per_epoch,
        "overhead_pct": overhead,
        "hcim_forward_seconds_by_n": {str(k): v for k, v in by_n.items()},
        "hcim_forward_seconds_by_T": {str(k): v for k, v in by_T.items()},
        "n_doubling_ratios": n_ratios,
        "n_exponent": _loglog_slope(ns, [by_n[n] for n in ns]),
        "T_ratio": T_ratio,
        "T_span": Ts[-1] / Ts[0],
        "T_exponent": _loglog_slope(Ts, [by_T[T] for T in Ts]),
        "per_snapshot_seconds": per_snapshot,
        "checks": {
            "n_doubling_below_2.5": all(r < 2.5 for r in n_ratios),
            "T_superlinear": T_ratio > Ts[-1] / Ts[0],
        },
        "settings": b,
        "kernel_backend": _kernels.BACKEND,
    }


def write_benchmark_outputs(spec: ExperimentSpec, result: dict, out_dir, plots=True) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "benchmark.json", result)
    files = {"benchmark": "benchmark.json"}
    if plots:
        from . import plots as _plots
        files.update(_plots.benchmark_plots(result, out))
    io.write_json(out / "manifest.json", {
        "command": "benchmark", "spec": spec.raw, "files": files,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(), "environment": _environment()})
    return files

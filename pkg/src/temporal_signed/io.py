"""File formats: snapshot JSON datasets, JSON configs and report CSV/JSON.

Dataset files hold ``{"format", "n", "T", "directed", "snapshots"}`` where each
snapshot is a list of ``[src, dst, sign]`` triples in canonical order. Output
is written with sorted keys and (for ``.gz``) a zero gzip mtime, so equal
inputs give equal bytes.
"""

from __future__ import annotations

import csv
import gzip
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .graph import TemporalSignedGraph, build_snapshot
from .stats import EvalReport, MetricSummary

SNAPSHOT_FORMAT = "temporal-signed-snapshots/1"
FLOAT_FMT = ".17g"


def _dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=True) + "\n"


def write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = text.encode("utf-8")
    if path.suffix == ".gz":
        buf = io.BytesIO()
        with gzip.GzipFile(fileobj=buf, mode="wb", mtime=0, filename="") as fh:
            fh.write(data)
        data = buf.getvalue()
    path.write_bytes(data)


def read_text(path) -> str:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw.decode("utf-8")


def write_json(path, doc):
    write_text(path, _dumps(doc))


def load_json_config(path) -> dict:
    """Read a JSON config, reporting parse failures with their location."""
    try:
        text = read_text(path)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def graph_to_doc(tg: TemporalSignedGraph) -> dict:
    snaps = []
    for g in tg:
        snaps.append(np.stack([g.src, g.dst, g.sign.astype(np.int64)], axis=1).tolist())
    return {"format": SNAPSHOT_FORMAT, "n": tg.node_count, "T": tg.T,
            "directed": tg[0].directed, "snapshots": snaps}


def graph_from_doc(doc: dict) -> TemporalSignedGraph:
    try:
        if doc.get("format", SNAPSHOT_FORMAT) != SNAPSHOT_FORMAT:
            raise DataError(f"unsupported snapshot format {doc['format']!r}")
        n, T, directed = int(doc["n"]), int(doc["T"]), bool(doc["directed"])
        snaps = doc["snapshots"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed snapshot document: {exc}") from None
    if len(snaps) != T:
        raise DataError(f"header says T={T} but {len(snaps)} snapshots are present")
    out = []
    for t, edges in enumerate(snaps):
        try:
            arr = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
            # file contents are untrusted: take the validating constructor
            out.append(build_snapshot(n, arr.tolist(), directed))
        except (ValueError, IndexError, DataError, ConfigError) as exc:
            raise DataError(f"snapshot {t}: {exc}") from None
    return TemporalSignedGraph(out)


def save_graph(tg: TemporalSignedGraph, path):
    write_json(path, graph_to_doc(tg))


def load_graph(path) -> TemporalSignedGraph:
    try:
        doc = json.loads(read_text(path))
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return graph_from_doc(doc)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def fmt_float(x) -> str:
    return format(float(x), FLOAT_FMT)


SUMMARY_FIELDS = ["dataset", "model", "metric", "n", "mean", "se", "t", "p", "stars",
                  "relative_improvement_pct", "error_reduction_pct",
                  "relative_improvement", "error_reduction", "flags"]


def summary_rows(report: EvalReport, dataset: str) -> list[dict]:
    rows = []
    for metric, s in report.summaries.items():
        for model in ("baseline", "enhanced"):
            rows.append({
                "dataset": dataset, "model": model, "metric": metric, "n": s.n,
                "mean": fmt_float(getattr(s, f"{model}_mean")),
                "se": fmt_float(getattr(s, f"{model}_se")),
                "t": fmt_float(s.t), "p": fmt_float(s.p), "stars": s.stars,
                "relative_improvement_pct": fmt_float(s.relative_improvement_pct),
                "error_reduction_pct": fmt_float(s.error_reduction_pct),
                "relative_improvement": fmt_float(s.relative_improvement),
                "error_reduction": fmt_float(s.error_reduction),
                "flags": ";".join(s.flags),
            })
    return rows


def _write_csv(path, fields, rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    write_text(path, buf.getvalue())


def write_summary_csv(report: EvalReport, path, dataset: str = "dataset"):
    _write_csv(path, SUMMARY_FIELDS, summary_rows(report, dataset))


def write_per_seed_csv(report: EvalReport, path):
    metrics = sorted(report.summaries)
    rows = [{**r, **{m: fmt_float(r[m]) for m in metrics}} for r in report.per_seed]
    _write_csv(path, ["seed", "model", *metrics], rows)


def read_report_csv(summary_path, per_seed_path) -> EvalReport:
    """Rebuild an EvalReport from the two CSV files written above."""
    with open(per_seed_path, newline="") as fh:
        per_seed = []
        for r in csv.DictReader(fh):
            row = {"seed": int(r.pop("seed")), "model": r.pop("model")}
            row.update({k: float(v) for k, v in r.items()})
            per_seed.append(row)
    by_metric: dict[str, dict] = {}
    with open(summary_path, newline="") as fh:
        for r in csv.DictReader(fh):
            by_metric.setdefault(r["metric"], {})[r["model"]] = r
    summaries = {}
    for metric, pair in by_metric.items():
        b, e = pair["baseline"], pair["enhanced"]
        summaries[metric] = MetricSummary(
            metric, int(b["n"]), float(b["mean"]), float(b["se"]), float(e["mean"]), float(e["se"]),
            float(b["t"]), float(b["p"]), b["stars"], float(b["relative_improvement"]),
            float(b["error_reduction"]), [f for f in b["flags"].split(";") if f])
    return EvalReport(per_seed, summaries)


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.generic):
        return _json_safe(x.item())
    return x


def write_report_json(report: EvalReport, path, extra: dict | None = None):
    doc = report.to_dict()
    if extra:
        doc.update(extra)
    write_json(path, _json_safe(doc))

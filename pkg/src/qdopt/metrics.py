"""Collection quality metrics and the CSV artifacts of a run."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

NA = "NA"
METRIC_COLUMNS = ("batch", "evals", "size", "max_quality", "total_quality", "total_novelty")
SUMMARY_METRICS = ("size", "max_quality", "total_quality", "total_novelty")


def fmt(x) -> str:
    """Fixed round-trip rendering: 17 significant digits, ``NA`` for missing."""
    if x is None:
        return NA
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def parse(s: str):
    if s == NA:
        return None
    return float(s)


@dataclass(frozen=True)
class MetricsRow:
    batch: int
    evals: int
    size: int
    max_quality: float | None
    total_quality: float
    total_novelty: float | None

    def as_strings(self) -> list[str]:
        return [fmt(self.batch), fmt(self.evals), fmt(self.size), fmt(self.max_quality),
                fmt(self.total_quality), fmt(self.total_novelty)]


def compute_metrics(container, batch: int = 0, evals: int = 0) -> MetricsRow:
    """Collection size, best raw fitness, total offset quality and (archive only) total novelty.

    The container's cached novelty must be current (call ``update`` first).
    Sums are exactly rounded, so they do not depend on member order.
    """
    members = container.members()
    if not members:
        return MetricsRow(batch, evals, 0, None, 0.0, None)
    fits = [m.fitness for m in members]
    offset = container.quality_offset
    total_quality = math.fsum(f + offset for f in fits)
    total_novelty = None
    if container.kind == "archive":
        total_novelty = math.fsum(m.novelty for m in members)
    return MetricsRow(batch, evals, len(members), max(fits), total_quality, total_novelty)


def write_metrics_csv(rows: Sequence[MetricsRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for row in rows:
            w.writerow(row.as_strings())


def read_metrics_csv(path) -> list[MetricsRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != METRIC_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [MetricsRow(int(r["batch"]), int(r["evals"]), int(r["size"]),
                           parse(r["max_quality"]), float(r["total_quality"]),
                           parse(r["total_novelty"]))
                for r in reader]


# ---------------------------------------------------------------------------
# collection dump

def collection_header(descriptor_size: int, genotype_size: int) -> list[str]:
    return (["id", "cell"] + [f"desc_{i}" for i in range(descriptor_size)]
            + ["fitness", "novelty", "local_quality", "curiosity"]
            + [f"gene_{i}" for i in range(genotype_size)])


def write_collection_csv(container, path, descriptor_size: int, genotype_size: int) -> None:
    """One row per member, sorted by id; ``cell`` is ``i:j:...`` for grids, ``-`` otherwise."""
    members = sorted(container.members(), key=lambda m: m.id)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(collection_header(descriptor_size, genotype_size))
        for m in members:
            cell = ":".join(str(c) for c in container.cell_of(m)) if container.kind == "grid" else "-"
            w.writerow([str(m.id), cell] + [fmt(x) for x in m.descriptor]
                       + [fmt(m.fitness), fmt(m.novelty), str(int(m.local_quality)), fmt(m.curiosity)]
                       + [fmt(g) for g in m.genotype])


def read_collection_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for key, val in r.items():
            if key == "cell":
                continue
            r[key] = int(val) if key in ("id", "local_quality") else parse(val)
    return rows


def metrics_from_collection(rows: list[dict], quality_offset: float, kind: str,
                            batch: int = 0, evals: int = 0) -> MetricsRow:
    """Recompute a :class:`MetricsRow` from a parsed ``collection.csv``."""
    if not rows:
        return MetricsRow(batch, evals, 0, None, 0.0, None)
    fits = [r["fitness"] for r in rows]
    total_novelty = math.fsum(r["novelty"] for r in rows) if kind == "archive" else None
    return MetricsRow(batch, evals, len(rows), max(fits),
                      math.fsum(f + quality_offset for f in fits), total_novelty)


# ---------------------------------------------------------------------------
# replication summary

def summary_columns() -> list[str]:
    cols = ["batch", "evals", "runs"]
    for m in SUMMARY_METRICS:
        cols += [f"{m}_median", f"{m}_q1", f"{m}_q3"]
    return cols


def summarize_traces(traces: Sequence[Sequence[MetricsRow]]) -> list[list[str]]:
    """Per logged batch: median, first and third quartile of every metric.

    Quartiles interpolate linearly between order statistics. A metric that
    is missing in any run is reported as ``NA`` for that batch.
    """
    if not traces:
        return []
    n_rows = min(len(t) for t in traces)
    out = []
    for i in range(n_rows):
        rows = [t[i] for t in traces]
        line = [fmt(rows[0].batch), fmt(rows[0].evals), fmt(len(rows))]
        for m in SUMMARY_METRICS:
            vals = [getattr(r, m) for r in rows]
            if any(v is None for v in vals):
                line += [NA] * 3
                continue
            q1, med, q3 = np.percentile(np.asarray(vals, dtype=float), [25, 50, 75], method="linear")
            line += [fmt(med), fmt(q1), fmt(q3)]
        out.append(line)
    return out


def write_summary_csv(metric_paths: Sequence[Path], out_path) -> None:
    """``summary.csv`` computed from nothing but the listed ``metrics.csv`` files."""
    traces = [read_metrics_csv(p) for p in metric_paths]
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(summary_columns())
        w.writerows(summarize_traces(traces))

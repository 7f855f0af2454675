import statistics
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from helpers import make_ind
from qdopt.config import variant_config
from qdopt.containers import ArchiveContainer, GridContainer
from qdopt.loop import run_qd
from qdopt.metrics import (METRIC_COLUMNS, NA, MetricsRow, compute_metrics, fmt,
                           metrics_from_collection, read_collection_csv, read_metrics_csv,
                           summarize_traces, write_collection_csv, write_metrics_csv,
                           write_summary_csv)
from qdopt.render import render_collection_svg
from qdopt.tasks import ArmTask


def test_empty_container_metrics():
    row = compute_metrics(GridContainer((10, 10), 1, 1.0))
    assert (row.size, row.max_quality, row.total_quality, row.total_novelty) == (0, None, 0.0, None)
    assert row.as_strings()[2:] == ["0", NA, "0", NA]


def test_two_member_metrics():
    grid = GridContainer((10, 10), 1, quality_offset=1.0)
    grid.add(make_ind(0, [0.05, 0.05], -0.1))
    grid.add(make_ind(1, [0.95, 0.95], -0.2))
    row = compute_metrics(grid)
    assert row.size == 2 and row.max_quality == -0.1
    assert row.total_quality == pytest.approx(1.7, abs=1e-15)
    assert row.total_novelty is None


def test_archive_metrics_include_novelty():
    arch = ArchiveContainer(0.01, 0.1, k_nn=1, quality_offset=1.0)
    arch.add(make_ind(0, [0.0, 0.0], -0.1))
    arch.add(make_ind(1, [0.3, 0.4], -0.1))
    arch.update()
    assert compute_metrics(arch).total_novelty == pytest.approx(1.0)


def test_fmt_round_trips():
    for x in [0.1, 1 / 3, -2.5e-300, 1e20, 0.0]:
        assert float(fmt(x)) == x
    assert fmt(None) == NA and fmt(7) == "7"


@pytest.mark.parametrize("name", ["grid_random", "arch_curiosity"])
def test_metrics_recomputed_from_collection(name, tmp_path):
    cfg = variant_config(name, "arm", batch_size=20, iterations=20, log_interval=20)
    result = run_qd(cfg, ArmTask())
    write_collection_csv(result.container, tmp_path / "c.csv", 2, 8)
    rows = read_collection_csv(tmp_path / "c.csv")
    assert [r["id"] for r in rows] == sorted(r["id"] for r in rows)
    re = metrics_from_collection(rows, 1.0, result.container.kind, 20, result.stats.evaluated)
    assert re == result.trace[-1]
    if name.startswith("grid"):
        assert all(r["cell"].count(":") == 1 for r in rows)
    else:
        assert all(r["cell"] == "-" for r in rows)


def test_metrics_csv_round_trip(tmp_path):
    rows = [MetricsRow(10, 2000, 5, -0.25, 4.5, None), MetricsRow(20, 4000, 0, None, 0.0, 1.25)]
    write_metrics_csv(rows, tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == ",".join(METRIC_COLUMNS)
    assert read_metrics_csv(tmp_path / "m.csv") == rows


def _quartiles(vals):
    # order-statistic interpolation at positions p * (n - 1)
    s = sorted(vals)
    def q(p):
        pos = p * (len(s) - 1)
        lo = int(pos)
        hi = min(lo + 1, len(s) - 1)
        return s[lo] + (s[hi] - s[lo]) * (pos - lo)
    return q(0.25), q(0.5), q(0.75)


def test_summary_quartiles_match_oracle(rng, tmp_path):
    paths = []
    all_vals = []
    for r in range(7):
        vals = rng.random(3)
        all_vals.append(vals)
        rows = [MetricsRow(10 * (i + 1), 100 * (i + 1), i, -v, v * 10, None) for i, v in enumerate(vals)]
        p = tmp_path / f"m{r}.csv"
        write_metrics_csv(rows, p)
        paths.append(p)
    write_summary_csv(paths, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert header[:3] == ["batch", "evals", "runs"]
    for i, line in enumerate(lines[1:]):
        rec = dict(zip(header, line.split(",")))
        q1, med, q3 = _quartiles([v[i] * 10 for v in all_vals])
        assert float(rec["total_quality_median"]) == pytest.approx(med, abs=1e-12)
        assert float(rec["total_quality_median"]) == pytest.approx(
            statistics.median([v[i] * 10 for v in all_vals]), abs=1e-12)
        assert float(rec["total_quality_q1"]) == pytest.approx(q1, abs=1e-12)
        assert float(rec["total_quality_q3"]) == pytest.approx(q3, abs=1e-12)
        assert rec["total_novelty_median"] == NA and rec["runs"] == "7"


def test_summary_truncates_to_shortest_trace():
    a = [MetricsRow(1, 1, 1, 0.0, 1.0, None)] * 3
    b = [MetricsRow(1, 1, 1, 0.0, 1.0, None)] * 2
    assert len(summarize_traces([a, b])) == 2


def test_svg_grid_and_archive():
    grid = GridContainer((10, 10), 1, 1.0)
    for i, (x, y, f) in enumerate([(0.05, 0.05, -0.3), (0.55, 0.95, -0.01)]):
        grid.add(make_ind(i, [x, y], f))
    root = ET.fromstring(render_collection_svg(grid, "t"))
    ns = "{http://www.w3.org/2000/svg}"
    members = [e for e in root.iter() if e.get("class") == "member"]
    assert len(members) == 2
    texts = {e.get("class"): e.text for e in root.iter(ns + "text")}
    assert "legend-min" in texts and "legend-max" in texts
    arch = ArchiveContainer(0.01, 0.1, quality_offset=1.0)
    arch.add(make_ind(0, [0.5, 0.5], -0.1))
    root = ET.fromstring(render_collection_svg(arch))
    assert [e.tag for e in root.iter() if e.get("class") == "member"] == [ns + "circle"]


def test_svg_refuses_high_dimensional_collection():
    grid = GridContainer((5,) * 6, 1)
    with pytest.raises(ValueError):
        render_collection_svg(grid)

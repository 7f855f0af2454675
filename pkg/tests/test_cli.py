import json
import subprocess
import sys

import pytest

from qdopt.cli import main
from qdopt.metrics import read_metrics_csv

SMALL = ["--batch-size", "10", "--iterations", "20", "--log-interval", "5"]


def test_run_writes_artifacts(tmp_path):
    out = tmp_path / "r"
    assert main(["run", "--variant", "grid_random", *SMALL, "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"config.json", "metrics.csv", "collection.csv",
                                               "collection.svg"}
    assert len(read_metrics_csv(out / "metrics.csv")) == 4


def test_variant_resolves_to_container_and_selector(tmp_path):
    out = tmp_path / "r"
    main(["run", "--variant", "grid_random", *SMALL, "--out", str(out)])
    cfg = json.loads((out / "config.json").read_text())
    assert (cfg["container"], cfg["selector"], cfg["score"]) == ("grid", "uniform", None)


def test_flags_name_their_variant(tmp_path):
    out = tmp_path / "r"
    main(["run", "--container", "archive", "--selector", "score", "--score", "curiosity",
          *SMALL, "--out", str(out)])
    assert json.loads((out / "config.json").read_text())["variant"] == "arch_curiosity"


def test_synthetic6_has_no_svg(tmp_path):
    out = tmp_path / "r"
    main(["run", "--variant", "nslc", "--task", "synthetic6", *SMALL, "--out", str(out)])
    names = {p.name for p in out.iterdir()}
    assert "collection.svg" not in names and "collection.csv" in names


@pytest.mark.parametrize("argv", [
    ["--selector", "roulette"],
    ["--selector", "uniform", "--score", "fitness"],
    ["--selector", "score"],
    ["--variant", "grid_random", "--container", "archive"],
    ["--grid-res", "10,10,10"],
    ["--mutation-rate", "0"],
    ["--reps", "3"],
])
def test_bad_usage_exits_nonzero_without_output(argv, tmp_path, capsys):
    out = tmp_path / "never"
    with pytest.raises(SystemExit) as info:
        main(["run", *argv, *SMALL, "--out", str(out)])
    assert info.value.code != 0
    assert not out.exists()
    assert capsys.readouterr().err


def test_config_file_round_trip(tmp_path):
    first = tmp_path / "a"
    main(["run", "--variant", "arch_pareto", *SMALL, "--seed", "3", "--out", str(first)])
    second = tmp_path / "b"
    main(["run", "--config", str(first / "config.json"), "--out", str(second)])
    for name in ("metrics.csv", "collection.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_config_file_unknown_key(tmp_path):
    bad = tmp_path / "c.json"
    bad.write_text(json.dumps({"variant": "grid_random", "colour": "red"}))
    with pytest.raises(SystemExit):
        main(["run", "--config", str(bad), "--out", str(tmp_path / "x")])
    assert not (tmp_path / "x").exists()


def test_replicate_single(tmp_path):
    out = tmp_path / "rep"
    assert main(["replicate", "--variant", "grid_curiosity", *SMALL, "--reps", "1", "--out", str(out)]) == 0
    lines = (out / "summary.csv").read_text().splitlines()
    assert len(lines) == 5 and lines[1].split(",")[2] == "1"


def test_replicate_five_seeds(tmp_path):
    out = tmp_path / "rep"
    assert main(["replicate", "--variant", "arch_random", *SMALL, "--reps", "5", "--seed", "10",
                 "--out", str(out)]) == 0
    reps = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert reps == [f"rep_{i:03d}" for i in range(5)]
    seeds = [json.loads((out / r / "config.json").read_text())["seed"] for r in reps]
    assert seeds == [10, 11, 12, 13, 14]
    header, *rows = (out / "summary.csv").read_text().splitlines()
    assert header.startswith("batch,evals,runs,size_median")
    assert all(r.split(",")[2] == "5" for r in rows)


def test_module_entry_point(tmp_path):
    out = tmp_path / "m"
    proc = subprocess.run([sys.executable, "-m", "qdopt.cli", "run", "--variant", "grid_random",
                           *SMALL, "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "metrics.csv").exists()


def test_replicate_records_failed_seed(tmp_path, monkeypatch):
    import qdopt.cli as cli
    real = cli.execute

    def flaky(resolved, config, out_dir, threads=None):
        if config.seed == 1:
            raise RuntimeError("simulated crash")
        return real(resolved, config, out_dir, threads)

    monkeypatch.setattr(cli, "execute", flaky)
    out = tmp_path / "rep"
    with pytest.warns(UserWarning):
        assert main(["replicate", "--variant", "grid_random", *SMALL, "--reps", "3",
                     "--out", str(out)]) == 0
    assert "seed 1" in (out / "failures.txt").read_text()
    rows = (out / "summary.csv").read_text().splitlines()[1:]
    assert all(r.split(",")[2] == "2" for r in rows)

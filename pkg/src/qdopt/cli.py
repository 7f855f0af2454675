"""Command line entry point: ``qd run`` for one run, ``qd replicate`` for a seed sweep."""
from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from qdopt.config import (CONTAINERS, SCORES, VARIANTS, ArchiveConfig, GridConfig, NslcConfig,
                          SelectorConfig, default_config, variant_name)
from qdopt.loop import run_qd, threads_from_env
from qdopt.metrics import write_collection_csv, write_metrics_csv, write_summary_csv
from qdopt.nslc import run_nslc
from qdopt.render import render_collection_svg
from qdopt.tasks import TASKS, make_task
from qdopt.variation import MutationConfig

SELECTOR_FLAGS = ("none", "uniform", "score", "population", "pareto")
# keys written to config.json for information only; ignored when read back
INFO_KEYS = {"task_params", "run_config"}


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run options")
    g.add_argument("--config", help="JSON file of options (flags override it)")
    g.add_argument("--variant", choices=sorted(VARIANTS), help="named container/selector combination")
    g.add_argument("--task", choices=sorted(TASKS))
    g.add_argument("--container", choices=CONTAINERS)
    g.add_argument("--selector", choices=SELECTOR_FLAGS)
    g.add_argument("--score", choices=SCORES)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--iterations", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--reps", type=int)
    g.add_argument("--out", help="output directory (default: runs/<variant>-<task>-<timestamp>)")
    g.add_argument("--log-interval", type=int)
    g.add_argument("--mutation", choices=("poly", "resample"))
    g.add_argument("--mutation-rate", type=float)
    g.add_argument("--eta", type=float)
    g.add_argument("--grid-res", help="cells per dimension: one integer, or a comma separated list")
    g.add_argument("--subgrid-depth", type=int)
    g.add_argument("--l", type=float, dest="l")
    g.add_argument("--epsilon", type=float)
    g.add_argument("--knn", type=int)
    g.add_argument("--rho-init", type=float)
    g.add_argument("--reward", type=float)
    g.add_argument("--penalty", type=float)
    g.add_argument("--tournament-size", type=int)

    parser = argparse.ArgumentParser(prog="qd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="execute one run")
    rep = sub.add_parser("replicate", parents=[common], help="run several seeds and summarize")
    rep.add_argument("--jobs", type=int, default=1, help="replications run in parallel processes")
    return parser


OPTION_KEYS = ("variant", "task", "container", "selector", "score", "batch_size", "iterations",
               "seed", "reps", "out", "log_interval", "mutation", "mutation_rate", "eta",
               "grid_res", "subgrid_depth", "l", "epsilon", "knn", "rho_init", "reward",
               "penalty", "tournament_size")


def _grid_res(value, dims: int) -> tuple[int, ...]:
    if isinstance(value, (list, tuple)):
        res = tuple(int(v) for v in value)
    else:
        parts = [p for p in str(value).split(",") if p.strip()]
        try:
            res = tuple(int(p) for p in parts)
        except ValueError:
            raise UsageError(f"--grid-res expects integers, got {value!r}") from None
    if len(res) == 1:
        res = res * dims
    if len(res) != dims:
        raise UsageError(f"--grid-res has {len(res)} entries, task descriptor has {dims} dimensions")
    return res


def gather_options(args: argparse.Namespace) -> dict:
    """Merge the config file (if any) with explicitly given flags."""
    opts = {}
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(loaded) - set(OPTION_KEYS) - INFO_KEYS
        if unknown:
            raise UsageError(f"unknown keys in {args.config}: {sorted(unknown)}")
        opts.update({k: v for k, v in loaded.items() if k in OPTION_KEYS and v is not None})
    for key in OPTION_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    return opts


def resolve(opts: dict) -> tuple[dict, "object"]:
    """Validate options and produce (resolved option dict, RunConfig)."""
    task = opts.get("task", "arm")
    if task not in TASKS:
        raise UsageError(f"unknown task {task!r}")
    variant = opts.get("variant")
    container, selector, score = opts.get("container"), opts.get("selector"), opts.get("score")
    if variant is not None:
        if variant not in VARIANTS:
            raise UsageError(f"unknown variant {variant!r}")
        algorithm, v_container, v_selector, v_score = VARIANTS[variant]
        for flag, given, implied in (("container", container, v_container),
                                     ("selector", selector, v_selector), ("score", score, v_score)):
            if given is not None and given != implied:
                raise UsageError(f"--{flag} {given} contradicts --variant {variant}")
        container, selector, score = v_container, v_selector, v_score
    else:
        algorithm = "qd"
        container = container or "grid"
        selector = selector or "uniform"
        if score is not None and selector not in ("score", "population"):
            raise UsageError(f"--score needs --selector score or population (got --selector {selector})")
        if score is None and selector in ("score", "population"):
            raise UsageError(f"--selector {selector} needs --score {{{','.join(SCORES)}}}")
        variant = variant_name(algorithm, container, selector, score)

    t = make_task(task)
    base = default_config(task)
    try:
        mutation = MutationConfig(kind=opts.get("mutation", base.mutation.kind),
                                  rate=opts.get("mutation_rate", base.mutation.rate),
                                  eta=opts.get("eta", base.mutation.eta))
        grid = GridConfig(resolution=_grid_res(opts.get("grid_res", base.grid.resolution), t.descriptor_size),
                          subgrid_depth=opts.get("subgrid_depth", base.grid.subgrid_depth))
        archive = ArchiveConfig(l=opts.get("l", base.archive.l),
                                epsilon=opts.get("epsilon", base.archive.epsilon),
                                k_nn=opts.get("knn", base.archive.k_nn))
        nslc = NslcConfig(rho_init=opts.get("rho_init", base.nslc.rho_init),
                          k_nn=opts.get("knn", base.nslc.k_nn))
        sel = SelectorConfig(kind=selector, score=score,
                             tournament_size=opts.get("tournament_size", 2))
        config = replace(base, algorithm=algorithm, container=container, selector=sel,
                         mutation=mutation, grid=grid, archive=archive, nslc=nslc,
                         batch_size=opts.get("batch_size", base.batch_size),
                         iterations=opts.get("iterations", base.iterations),
                         seed=opts.get("seed", base.seed),
                         log_interval=opts.get("log_interval", base.log_interval),
                         reward=opts.get("reward", base.reward),
                         penalty=opts.get("penalty", base.penalty))
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    reps = opts.get("reps", 1)
    if reps < 1:
        raise UsageError("--reps must be >= 1")
    resolved = {
        "variant": variant, "task": task, "container": container, "selector": selector,
        "score": score, "batch_size": config.batch_size, "iterations": config.iterations,
        "seed": config.seed, "reps": reps, "out": opts.get("out"),
        "log_interval": config.log_interval, "mutation": mutation.kind,
        "mutation_rate": mutation.rate, "eta": mutation.eta, "grid_res": list(grid.resolution),
        "subgrid_depth": grid.subgrid_depth, "l": archive.l, "epsilon": archive.epsilon,
        "knn": archive.k_nn, "rho_init": nslc.rho_init, "reward": config.reward,
        "penalty": config.penalty, "tournament_size": sel.tournament_size,
    }
    return resolved, config


def execute(resolved: dict, config, out_dir: Path, threads: int | None = None) -> Path:
    """Run one configuration and write its artifacts into ``out_dir``."""
    task = make_task(config.task)
    out_dir.mkdir(parents=True, exist_ok=True)
    dump = dict(resolved, out=str(out_dir), task_params=task.params(), run_config=config.to_dict())
    (out_dir / "config.json").write_text(json.dumps(dump, indent=2, sort_keys=True) + "\n")
    runner = run_nslc if config.algorithm == "nslc" else run_qd
    result = runner(config, task, threads=threads)
    write_metrics_csv(result.trace, out_dir / "metrics.csv")
    write_collection_csv(result.container, out_dir / "collection.csv",
                         task.descriptor_size, task.encoding.size)
    if task.descriptor_size == 2:
        svg = render_collection_svg(result.container, title=f"{resolved['variant']} on {config.task}")
        (out_dir / "collection.svg").write_text(svg)
    return out_dir


def _default_out(resolved: dict) -> Path:
    stamp = time.strftime("%Y%m%d-%H%M%S")
    return Path("runs") / f"{resolved['variant']}-{resolved['task']}-{stamp}"


def _replicate_one(payload):
    resolved, config, out_dir, threads = payload
    execute(resolved, config, out_dir, threads)
    return out_dir


def cmd_run(args) -> int:
    resolved, config = resolve(gather_options(args))
    if resolved["reps"] != 1:
        raise UsageError("run executes a single replication; use 'qd replicate --reps N'")
    threads = threads_from_env()
    out = Path(resolved["out"]) if resolved["out"] else _default_out(resolved)
    execute(resolved, config, out, threads)
    print(f"wrote {out}", file=sys.stderr)
    return 0


def cmd_replicate(args) -> int:
    resolved, config = resolve(gather_options(args))
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    threads = threads_from_env()
    out = Path(resolved["out"]) if resolved["out"] else _default_out(resolved)
    payloads = []
    for rep in range(resolved["reps"]):
        seed = config.seed + rep
        rep_resolved = dict(resolved, seed=seed, reps=1)
        payloads.append((rep_resolved, replace(config, seed=seed), out / f"rep_{rep:03d}", threads))
    done, failures = [], []
    if args.jobs == 1:
        for p in payloads:
            try:
                done.append(_replicate_one(p))
            except Exception as exc:  # noqa: BLE001 - recorded, summary continues
                failures.append((p[1].seed, exc))
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [(p, pool.submit(_replicate_one, p)) for p in payloads]
            for p, fut in futures:
                try:
                    done.append(fut.result())
                except Exception as exc:  # noqa: BLE001
                    failures.append((p[1].seed, exc))
    out.mkdir(parents=True, exist_ok=True)
    if failures:
        lines = [f"seed {seed}: {exc!r}" for seed, exc in failures]
        (out / "failures.txt").write_text("\n".join(lines) + "\n")
        warnings.warn(f"{len(failures)} of {len(payloads)} replications failed; "
                      f"summary covers the {len(done)} completed runs")
    if not done:
        print("all replications failed", file=sys.stderr)
        return 1
    write_summary_csv([d / "metrics.csv" for d in sorted(done)], out / "summary.csv")
    print(f"wrote {out}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_replicate(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2


if __name__ == "__main__":
    sys.exit(main())

"""Run configuration, per-task parameter presets and the named variant table."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

from qdopt.variation import MutationConfig

SELECTOR_KINDS = ("none", "uniform", "score", "population", "pareto")
SCORES = ("fitness", "novelty", "curiosity")
CONTAINERS = ("grid", "archive")


@dataclass(frozen=True)
class GridConfig:
    resolution: tuple[int, ...] = (100, 100)
    subgrid_depth: int = 3


@dataclass(frozen=True)
class ArchiveConfig:
    l: float = 0.01
    epsilon: float = 0.1
    k_nn: int = 15


@dataclass(frozen=True)
class SelectorConfig:
    kind: str = "uniform"
    score: str | None = None
    tournament_size: int = 2

    def __post_init__(self):
        if self.kind not in SELECTOR_KINDS:
            raise ValueError(f"unknown selector {self.kind!r}; choose from {SELECTOR_KINDS}")
        needs = self.kind in ("score", "population")
        if needs and self.score not in SCORES:
            raise ValueError(f"selector {self.kind!r} needs a score from {SCORES}")
        if not needs and self.score is not None:
            raise ValueError(f"selector {self.kind!r} takes no score (got {self.score!r})")
        if self.tournament_size < 2:
            raise ValueError("tournament_size must be >= 2")


@dataclass(frozen=True)
class NslcConfig:
    rho_init: float = 0.01
    k_nn: int = 15
    raise_after: int = 10       # additions in one batch that raise rho
    raise_factor: float = 1.2
    lower_after: int = 25       # consecutive batches without additions that lower rho
    lower_factor: float = 0.95


@dataclass(frozen=True)
class RunConfig:
    task: str = "arm"
    algorithm: str = "qd"  # "qd" or "nslc"
    container: str = "grid"
    grid: GridConfig = field(default_factory=GridConfig)
    archive: ArchiveConfig = field(default_factory=ArchiveConfig)
    selector: SelectorConfig = field(default_factory=SelectorConfig)
    mutation: MutationConfig = field(default_factory=MutationConfig)
    nslc: NslcConfig = field(default_factory=NslcConfig)
    batch_size: int = 200
    iterations: int = 50_000
    reward: float = 1.0
    penalty: float = 0.5
    seed: int = 0
    log_interval: int = 10

    def __post_init__(self):
        errors = []
        if self.algorithm not in ("qd", "nslc"):
            errors.append(f"unknown algorithm {self.algorithm!r}")
        if self.container not in CONTAINERS:
            errors.append(f"unknown container {self.container!r}")
        if self.batch_size < 1:
            errors.append("batch_size must be >= 1")
        if self.iterations < 1:
            errors.append("iterations must be >= 1")
        if self.log_interval < 1:
            errors.append("log_interval must be >= 1")
        if self.reward < 0 or self.penalty < 0:
            errors.append("reward and penalty must be >= 0")
        if any(r < 1 for r in self.grid.resolution) or self.grid.subgrid_depth < 0:
            errors.append("grid resolution must be >= 1 and subgrid depth >= 0")
        if not self.archive.l > 0 or not 0 <= self.archive.epsilon < 1 or self.archive.k_nn < 1:
            errors.append("archive needs l > 0, epsilon in [0, 1) and k_nn >= 1")
        if not self.nslc.rho_init > 0 or self.nslc.k_nn < 1:
            errors.append("nslc needs rho_init > 0 and k_nn >= 1")
        if not 0 <= self.seed < 2 ** 64:
            errors.append("seed must be a 64-bit unsigned integer")
        if errors:
            raise ValueError("; ".join(errors))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        sub = {"grid": GridConfig, "archive": ArchiveConfig, "selector": SelectorConfig,
               "mutation": MutationConfig, "nslc": NslcConfig}
        for key, klass in sub.items():
            if key in d and isinstance(d[key], dict):
                d[key] = klass(**d[key])
        if "grid" in d:
            d["grid"] = replace(d["grid"], resolution=tuple(d["grid"].resolution))
        return cls(**d)


# Parameter blocks for the two shipped tasks: redundant arm (first experiment
# column) and the synthetic 6-D stand-in (third experiment column).
TASK_PRESETS = {
    "arm": dict(
        iterations=50_000,
        grid=GridConfig(resolution=(100, 100), subgrid_depth=3),
        archive=ArchiveConfig(l=0.01, epsilon=0.1, k_nn=15),
        mutation=MutationConfig(kind="poly", rate=0.125, eta=10.0),
        nslc=NslcConfig(rho_init=0.01, k_nn=15),
    ),
    "synthetic6": dict(
        iterations=20_000,
        grid=GridConfig(resolution=(5,) * 6, subgrid_depth=1),
        archive=ArchiveConfig(l=0.25, epsilon=0.1, k_nn=15),
        mutation=MutationConfig(kind="resample", rate=0.05, eta=10.0),
        nslc=NslcConfig(rho_init=1.0, k_nn=15),
    ),
}


def default_config(task: str = "arm", **overrides) -> RunConfig:
    if task not in TASK_PRESETS:
        raise ValueError(f"unknown task {task!r}; choose from {sorted(TASK_PRESETS)}")
    kw = dict(TASK_PRESETS[task])
    kw.update(overrides)
    return RunConfig(task=task, **kw)


# variant name -> (algorithm, container, selector kind, score)
VARIANTS: dict[str, tuple[str, str, str, str | None]] = {}
for _prefix, _container in (("arch", "archive"), ("grid", "grid")):
    VARIANTS[f"{_prefix}_no_selection"] = ("qd", _container, "none", None)
    VARIANTS[f"{_prefix}_random"] = ("qd", _container, "uniform", None)
    VARIANTS[f"{_prefix}_pareto"] = ("qd", _container, "pareto", None)
    for _score in SCORES:
        VARIANTS[f"{_prefix}_{_score}"] = ("qd", _container, "score", _score)
        VARIANTS[f"{_prefix}_pop_{_score}"] = ("qd", _container, "population", _score)
VARIANTS["nslc"] = ("nslc", "grid", "pareto", None)

# variants run on every scenario (the others only on the arm)
CORE_VARIANTS = ("arch_no_selection", "arch_random", "arch_pareto", "arch_curiosity",
                 "arch_pop_fitness", "grid_no_selection", "grid_random", "grid_pareto",
                 "grid_curiosity", "grid_pop_fitness", "nslc")


def variant_name(algorithm: str, container: str, selector: str, score: str | None) -> str:
    for name, spec in VARIANTS.items():
        if spec == (algorithm, container, selector, score):
            return name
    raise ValueError(f"no variant for {container}/{selector}/{score}")


def variant_config(name: str, task: str = "arm", **overrides) -> RunConfig:
    """Configuration of a named variant on ``task`` with the task's default parameters."""
    try:
        algorithm, container, kind, score = VARIANTS[name]
    except KeyError:
        raise ValueError(f"unknown variant {name!r}; choose from {sorted(VARIANTS)}") from None
    sel = overrides.pop("selector", None) or SelectorConfig(kind=kind, score=score)
    return default_config(task, algorithm=algorithm, container=container, selector=sel, **overrides)

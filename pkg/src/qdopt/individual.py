"""Genotype encodings and the Individual record shared by every container."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SAMPLE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Encoding:
    """Shape and value domain of a genotype.

    ``kind`` is ``"continuous"`` (any real in [0, 1]) or ``"sampled"``, in
    which case every gene lies on the lattice ``{0, step, 2*step, ..., 1}``.
    """

    size: int
    kind: str = "continuous"
    step: float | None = None

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"genotype size must be >= 1, got {self.size}")
        if self.kind not in ("continuous", "sampled"):
            raise ValueError(f"unknown encoding kind {self.kind!r}")
        if self.kind == "sampled":
            if self.step is None or not 0 < self.step <= 1:
                raise ValueError("sampled encoding needs a step in (0, 1]")
            n = 1.0 / self.step
            if abs(n - round(n)) > SAMPLE_TOLERANCE * max(1.0, n):
                raise ValueError(f"step {self.step} does not divide [0, 1]")

    @property
    def levels(self) -> int:
        """Number of distinct values a sampled gene can take."""
        if self.kind != "sampled":
            raise AttributeError("continuous encodings have no lattice")
        return int(round(1.0 / self.step)) + 1


def random_genotypes(encoding: Encoding, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` genotypes uniformly from the encoding's domain, shape (n, size)."""
    if encoding.kind == "continuous":
        return rng.random((n, encoding.size))
    k = rng.integers(0, encoding.levels, size=(n, encoding.size))
    return np.minimum(k * encoding.step, 1.0)


def random_genotype(encoding: Encoding, rng: np.random.Generator) -> np.ndarray:
    return random_genotypes(encoding, 1, rng)[0]


def check_genotype(values, encoding: Encoding) -> None:
    """Raise ``ValueError`` if ``values`` is not a valid genotype for ``encoding``."""
    values = np.asarray(values, dtype=float)
    if values.shape != (encoding.size,):
        raise ValueError(f"expected {encoding.size} genes, got shape {values.shape}")
    if np.any(values < 0) or np.any(values > 1):
        raise ValueError("genes must lie in [0, 1]")
    if encoding.kind == "sampled":
        k = values / encoding.step
        if np.any(np.abs(k - np.round(k)) > SAMPLE_TOLERANCE):
            raise ValueError(f"genes must be multiples of {encoding.step}")


@dataclass(eq=False)
class Individual:
    """One candidate solution.

    Descriptor and fitness are written once by :meth:`set_evaluation`.
    ``novelty`` and ``local_quality`` are caches owned by whichever container
    holds the individual; ``curiosity`` is the running reward/penalty tally.
    """

    id: int
    genotype: np.ndarray
    parent_id: int | None = None
    descriptor: np.ndarray | None = field(default=None, repr=False)
    fitness: float = math.nan
    novelty: float = math.nan
    local_quality: int = 0
    curiosity: float = 0.0

    @property
    def evaluated(self) -> bool:
        return self.descriptor is not None

    def set_evaluation(self, descriptor, fitness: float) -> None:
        if self.descriptor is not None:
            raise RuntimeError(f"individual {self.id} was already evaluated")
        self.descriptor = np.clip(np.asarray(descriptor, dtype=float), 0.0, 1.0)
        self.fitness = float(fitness)

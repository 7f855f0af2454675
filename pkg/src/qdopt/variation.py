"""Mutation operators that turn a batch of parent genotypes into offspring."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qdopt.individual import Encoding, random_genotypes


@dataclass(frozen=True)
class MutationConfig:
    kind: str = "poly"  # "poly" or "resample"
    rate: float = 0.125
    eta: float = 10.0

    def __post_init__(self):
        if self.kind not in ("poly", "resample"):
            raise ValueError(f"unknown mutation kind {self.kind!r}")
        if not 0 < self.rate <= 1:
            raise ValueError(f"per-gene mutation rate must lie in (0, 1], got {self.rate}")
        if not self.eta > 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")


def polynomial_delta(x: np.ndarray, u: np.ndarray, eta: float) -> np.ndarray:
    """Bounded polynomial perturbation of genes ``x`` in [0, 1] for uniforms ``u``."""
    mut_pow = 1.0 / (eta + 1.0)
    low = u < 0.5
    # x is the distance to the lower bound, 1 - x to the upper one
    xy = np.where(low, 1.0 - x, x)
    val = np.where(low,
                   2.0 * u + (1.0 - 2.0 * u) * xy ** (eta + 1.0),
                   2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy ** (eta + 1.0))
    return np.where(low, val ** mut_pow - 1.0, 1.0 - val ** mut_pow)


def mutate_batch(genotypes: np.ndarray, cfg: MutationConfig, encoding: Encoding,
                 rng: np.random.Generator) -> np.ndarray:
    """Mutate every row of ``genotypes`` (n, size); unmutated genes are copied bit-for-bit.

    Random draws happen in a fixed order (gene mask, then the operator's own
    draws) for every batch, so a run is reproducible from its seed.
    """
    genotypes = np.asarray(genotypes, dtype=float)
    mask = rng.random(genotypes.shape) < cfg.rate
    if cfg.kind == "poly":
        u = rng.random(genotypes.shape)
        mutated = np.clip(genotypes + polynomial_delta(genotypes, u, cfg.eta), 0.0, 1.0)
    else:
        mutated = random_genotypes(Encoding(genotypes.shape[1], encoding.kind, encoding.step),
                                   genotypes.shape[0], rng)
    return np.where(mask, mutated, genotypes)


def mutate(parent: np.ndarray, cfg: MutationConfig, encoding: Encoding,
           rng: np.random.Generator) -> np.ndarray:
    return mutate_batch(np.asarray(parent, dtype=float)[None, :], cfg, encoding, rng)[0]

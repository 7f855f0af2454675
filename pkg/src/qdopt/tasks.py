"""Evaluation tasks: pure maps from genotype to (descriptor, fitness)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qdopt.individual import Encoding


class Task:
    """Base class. Subclasses implement :meth:`evaluate_batch`.

    ``evaluate_batch`` must be deterministic, side-effect free and row-wise:
    the result for one genotype may not depend on the other rows, so any
    chunking of a batch gives identical bits.
    """

    name: str = "task"
    encoding: Encoding
    descriptor_size: int
    quality_offset: float = 0.0

    def evaluate_batch(self, genotypes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def evaluate(self, genotype) -> tuple[np.ndarray, float]:
        desc, fit = self.evaluate_batch(np.asarray(genotype, dtype=float)[None, :])
        return desc[0], float(fit[0])

    def params(self) -> dict:
        return {"name": self.name, "genotype_size": self.encoding.size,
                "encoding": self.encoding.kind, "step": self.encoding.step,
                "descriptor_size": self.descriptor_size, "quality_offset": self.quality_offset}


def _sum_columns(x: np.ndarray) -> np.ndarray:
    acc = x[:, 0].copy()
    for j in range(1, x.shape[1]):
        acc += x[:, j]
    return acc


def neg_gene_variance(genotypes: np.ndarray) -> np.ndarray:
    """Minus the population variance of each row.

    Deviations are taken from the first gene before averaging, so a constant
    row yields exactly 0.
    """
    shifted = genotypes - genotypes[:, :1]
    n = genotypes.shape[1]
    mean = _sum_columns(shifted) / n
    var = _sum_columns((shifted - mean[:, None]) ** 2) / n
    return 0.0 - var


@dataclass(frozen=True)
class ArmParams:
    joints: int = 8
    length: float = 1.0
    joint_range: float = math.pi  # angles span [-range/2, +range/2]
    box_margin: float = 1.1

    @property
    def link(self) -> float:
        return self.length / self.joints

    @property
    def box_side(self) -> float:
        return 2 * self.box_margin * self.length


class ArmTask(Task):
    """Planar redundant arm with equal links.

    Gene ``g`` maps to the relative joint angle ``(g - 0.5) * range``. The
    descriptor is the gripper position normalized by a square box of side
    ``2 * 1.1 * L`` centered on the base; fitness is minus the variance of
    the genes (0 when every joint bends by the same angle).
    """

    name = "arm"
    quality_offset = 1.0

    def __init__(self, params: ArmParams = ArmParams()):
        self.arm = params
        self.encoding = Encoding(params.joints, "continuous")
        self.descriptor_size = 2

    def angles(self, genotypes: np.ndarray) -> np.ndarray:
        return (genotypes - 0.5) * self.arm.joint_range

    def gripper(self, genotypes: np.ndarray) -> np.ndarray:
        """Cartesian gripper positions, shape (n, 2)."""
        theta = np.cumsum(self.angles(np.atleast_2d(genotypes)), axis=1)
        x = _sum_columns(self.arm.link * np.cos(theta))
        y = _sum_columns(self.arm.link * np.sin(theta))
        return np.stack([x, y], axis=1)

    def evaluate_batch(self, genotypes):
        genotypes = np.atleast_2d(np.asarray(genotypes, dtype=float))
        half = self.arm.box_margin * self.arm.length
        desc = (self.gripper(genotypes) + half) / self.arm.box_side
        return np.clip(desc, 0.0, 1.0), neg_gene_variance(genotypes)

    def params(self):
        out = super().params()
        out.update(joints=self.arm.joints, length=self.arm.length,
                   joint_range=self.arm.joint_range, box_side=self.arm.box_side)
        return out


class Synthetic6Task(Task):
    """36 sampled genes folded into a 6-D descriptor (mean of each block of six).

    Stands in for the six-dimensional locomotion repertoire: same genotype,
    descriptor and grid shapes, no simulator.
    """

    name = "synthetic6"
    quality_offset = 1.0

    def __init__(self, step: float = 0.05, blocks: int = 6, block_size: int = 6):
        self.blocks = blocks
        self.block_size = block_size
        self.encoding = Encoding(blocks * block_size, "sampled", step)
        self.descriptor_size = blocks

    def evaluate_batch(self, genotypes):
        genotypes = np.atleast_2d(np.asarray(genotypes, dtype=float))
        n = len(genotypes)
        blocks = genotypes.reshape(n, self.blocks, self.block_size)
        desc = np.stack([_sum_columns(blocks[:, b, :]) / self.block_size
                         for b in range(self.blocks)], axis=1)
        return np.clip(desc, 0.0, 1.0), neg_gene_variance(genotypes)


TASKS = {"arm": ArmTask, "synthetic6": Synthetic6Task}


def make_task(name: str, **kwargs) -> Task:
    try:
        return TASKS[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown task {name!r}; choose from {sorted(TASKS)}") from None

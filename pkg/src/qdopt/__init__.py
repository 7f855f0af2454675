"""Modular quality-diversity optimization.

One generic loop (:func:`run_qd`) combines an interchangeable container
(:class:`GridContainer` or :class:`ArchiveContainer`) with a selection
operator; :func:`run_nslc` provides the Novelty Search with Local
Competition baseline.
"""
from qdopt.config import (VARIANTS, ArchiveConfig, GridConfig, NslcConfig, RunConfig,
                          SelectorConfig, default_config, variant_config)
from qdopt.containers import (AddOutcome, ArchiveContainer, GridContainer, QualityContractError,
                              discretize, exclusive_eps_dominates)
from qdopt.individual import Encoding, Individual, random_genotype, random_genotypes
from qdopt.loop import EvaluationError, RunResult, curiosity_update, run_qd
from qdopt.metrics import MetricsRow, compute_metrics
from qdopt.nslc import run_nslc
from qdopt.tasks import ArmTask, Synthetic6Task, make_task
from qdopt.variation import MutationConfig, mutate, mutate_batch

__all__ = [
    "VARIANTS", "AddOutcome", "ArchiveConfig", "ArchiveContainer", "ArmTask", "Encoding",
    "EvaluationError", "GridConfig", "GridContainer", "Individual", "MetricsRow",
    "MutationConfig", "NslcConfig", "QualityContractError", "RunConfig", "RunResult",
    "SelectorConfig", "Synthetic6Task", "compute_metrics", "curiosity_update", "default_config",
    "discretize", "exclusive_eps_dominates", "make_task", "mutate", "mutate_batch",
    "random_genotype", "random_genotypes", "run_nslc", "run_qd", "variant_config",
]

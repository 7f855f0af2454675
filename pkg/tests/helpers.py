import numpy as np

from qdopt.individual import Individual


def make_ind(ind_id, descriptor, fitness=0.0, genotype=None):
    ind = Individual(ind_id, np.zeros(2) if genotype is None else np.asarray(genotype, dtype=float))
    ind.set_evaluation(descriptor, fitness)
    return ind

import numpy as np
import pytest

from qdopt.individual import Encoding, Individual, check_genotype, random_genotype, random_genotypes


def test_continuous_genotypes_in_unit_interval(rng):
    g = random_genotypes(Encoding(8), 10_000, rng)
    assert g.shape == (10_000, 8)
    assert g.min() >= 0.0 and g.max() <= 1.0


def test_continuous_gene_mean_near_half(rng):
    g = random_genotypes(Encoding(1), 100_000, rng)
    assert 0.49 <= g.mean() <= 0.51


def test_sampled_genotypes_on_lattice(rng):
    enc = Encoding(36, "sampled", 0.05)
    assert enc.levels == 21
    g = random_genotypes(enc, 2_000, rng)
    k = g / 0.05
    assert np.all(np.abs(k - np.round(k)) < 1e-9)
    assert g.min() == 0.0 and g.max() == 1.0
    for row in g[:50]:
        check_genotype(row, enc)


def test_sampled_levels_roughly_uniform(rng):
    g = random_genotypes(Encoding(1, "sampled", 0.25), 50_000, rng)
    counts = np.unique(g, return_counts=True)[1]
    assert len(counts) == 5
    assert np.all(np.abs(counts / 50_000 - 0.2) < 0.01)


def test_random_genotype_single(rng):
    g = random_genotype(Encoding(4), rng)
    assert g.shape == (4,)


@pytest.mark.parametrize("step", [0.0, 0.3, 1.5])
def test_bad_step_rejected(step):
    with pytest.raises(ValueError):
        Encoding(3, "sampled", step)


def test_check_genotype_rejects_bad_values():
    with pytest.raises(ValueError):
        check_genotype([0.5, 1.2], Encoding(2))
    with pytest.raises(ValueError):
        check_genotype([0.5], Encoding(2))
    with pytest.raises(ValueError):
        check_genotype([0.5, 0.33], Encoding(2, "sampled", 0.05))


def test_evaluation_written_once():
    ind = Individual(0, np.zeros(2))
    ind.set_evaluation([1.3, -0.1], -0.2)
    assert list(ind.descriptor) == [1.0, 0.0]
    assert ind.fitness == -0.2
    with pytest.raises(RuntimeError):
        ind.set_evaluation([0.5, 0.5], 0.0)

import math

import numpy as np
import pytest

from omdlab.costs import (CostSequence, certify_relative_smoothness, cost_gradient,
                          cost_hessian_quadratic, cost_value, doptimal_sequence, dump_bundle,
                          load_bundle, poisson_sequence, synthetic_sequence)
from omdlab.errors import CertificationError, DomainError, InputError, NumericalError
from omdlab.geometry import PositiveBox, TruncatedSimplex
from omdlab.regularizers import make


def test_values():
    assert cost_value(CostSequence.doptimal(np.eye(2)), 1, [0.5, 0.5]) == pytest.approx(2 * math.log(2))
    assert cost_value(CostSequence.poisson(np.eye(3), [0.2, 0.3, 0.5]), 1, [0.2, 0.3, 0.5]) == 0
    assert cost_value(CostSequence.doptimal([[1.0, 1.0]]), 1, [0.25, 0.75]) == pytest.approx(0.0, abs=1e-15)


def test_gradients():
    assert cost_gradient(CostSequence.doptimal(np.eye(2)), 1, [0.5, 0.5]) == pytest.approx([-2, -2])
    assert cost_gradient(CostSequence.poisson(np.eye(2), [0.4, 0.6]), 1, [0.4, 0.6]) == pytest.approx([0, 0])
    c = CostSequence.synthetic([1, 1], [[0.3, 0.7]])
    assert cost_gradient(c, 1, [0.5, 0.5]) == pytest.approx([0.2, -0.2])


def test_hessian_quadratic():
    assert cost_hessian_quadratic(CostSequence.doptimal(np.eye(2)), 1, [0.5, 0.5], [1, 0]) == pytest.approx(4)
    assert cost_hessian_quadratic(CostSequence.poisson(np.eye(2), [1, 1]), 1, [0.5, 0.5], [1, 0]) == pytest.approx(4)
    assert cost_hessian_quadratic(CostSequence.synthetic([2, 3], [[0, 0]]), 1, [0.1, 0.2], [1, 1]) == 5


@pytest.mark.parametrize("kind", ["doptimal", "poisson", "synthetic"])
def test_hessian_matrix_consistent_with_quadratic(kind):
    rng = np.random.default_rng(0)
    c = {"doptimal": doptimal_sequence(3, 2, 4, seed=0),
         "poisson": poisson_sequence(3, 6, 4, seed=0),
         "synthetic": synthetic_sequence(3, TruncatedSimplex(4, 0.0), seed=0)}[kind]
    X = TruncatedSimplex(4, 0.05).sample(20, rng)
    V = rng.standard_normal((20, 4))
    H = c.hessian_matrix(2, X)
    assert np.einsum("ki,kij,kj->k", V, H, V) == pytest.approx(c.hessian_quadratic(2, X, V), rel=1e-10)


def test_batched_oracles_match_single():
    c = doptimal_sequence(2, 3, 5, seed=1)
    X = TruncatedSimplex(5, 0.01).sample(7, np.random.default_rng(1))
    batch = c.gradient(1, X)
    assert np.allclose(batch, np.array([c.gradient(1, x) for x in X]))


def test_domain_and_numerical_errors():
    c = CostSequence.doptimal(np.eye(2))
    with pytest.raises(DomainError):
        c.value(1, [0.0, 1.0])
    with pytest.raises(NumericalError):
        c.value(1, [1e-14, 1.0])
    with pytest.raises(InputError):
        CostSequence.doptimal(np.ones((3, 2)))
    with pytest.raises(InputError):
        CostSequence.poisson(np.eye(2), [0.0, 1.0])


def test_certify_identity_doptimal_vs_burg():
    c = CostSequence.doptimal(np.eye(4))
    cert = certify_relative_smoothness(c, make("burg", 4), TruncatedSimplex(4, 1e-6), samples=300)
    assert cert.beta == pytest.approx(1.05)
    assert cert.lambda_ == pytest.approx(0.95)


def test_certify_synthetic_vs_euclidean():
    c = CostSequence.synthetic([1.0, 1.0, 1.0], [[0.2, 0.3, 0.5]])
    cert = certify_relative_smoothness(c, make("l2sq", 3), TruncatedSimplex(3, 0.0), samples=200)
    assert cert.beta == pytest.approx(1.05)
    assert cert.lambda_ == pytest.approx(0.95)
    assert cert.lambda_ <= cert.beta
    assert cert.min_quotient_observed <= cert.max_quotient_observed


def test_certify_poisson_envelope():
    c = poisson_sequence(5, 20, 5, seed=2)
    box = PositiveBox.uniform(5, 1e-3, 10.0)
    cert = certify_relative_smoothness(c, make("burg", 5), box, samples=1000, seed=2)
    assert cert.max_quotient_observed <= c.data["b"].sum(axis=1).max()


def test_certify_degenerate_direction():
    c = CostSequence.synthetic([1.0, 1.0], [[0.5, 0.5]])
    with pytest.raises(CertificationError) as info:
        certify_relative_smoothness(c, make("l1sq", 2), TruncatedSimplex(2, 0.0), samples=10)
    assert info.value.direction is not None


def test_generators_are_seeded():
    a, b = poisson_sequence(4, 5, 3, seed=9), poisson_sequence(4, 5, 3, seed=9)
    assert np.array_equal(a.data["A"], b.data["A"])
    s = synthetic_sequence(20, TruncatedSimplex(3, 0.01), seed=3)
    assert all(TruncatedSimplex(3, 0.01).contains(c) for c in s.data["centers"])


@pytest.mark.parametrize("kind", ["doptimal", "poisson", "synthetic"])
def test_bundle_roundtrip(tmp_path, kind):
    c = {"doptimal": doptimal_sequence(6, 2, 4, pool_size=3, seed=0),
         "poisson": poisson_sequence(3, 5, 4, seed=0),
         "synthetic": synthetic_sequence(3, TruncatedSimplex(4, 0.0), seed=0)}[kind]
    dump_bundle(c, tmp_path)
    back = load_bundle(tmp_path)
    x = np.full(4, 0.25)
    for t in range(1, c.T + 1):
        assert back.value(t, x) == c.value(t, x)

"""
Unit tests for causation entropy, transfer entropy and Granger causality.
"""

import sys
import os
import math

import numpy as np
import pytest

# Add the src directory to the Python path more reliably
current_dir = os.path.dirname(os.path.abspath(__file__))
src_dir = os.path.join(current_dir, '..', 'src')
sys.path.insert(0, src_dir)

from covariance import LaggedCovariance, estimate_covariances, exact_covariances
from entropy import (
    DiscreteEstimator,
    DiscreteJointDistribution,
    EstimatorContext,
    additive_pair_example,
    causation_entropy,
    common_driver_example,
    conditional_granger,
    discrete_causation_entropy,
    gaussian_entropy,
    transfer_entropy,
    xor_example,
)
from network_model import binary_tree, chain_network, generate_er_signed, tree_network
from ocse_errors import DegeneracyError, InvalidParameterError
from process import TimeSeries


def exact_context(net):
    return EstimatorContext(exact_covariances(net))


class TestGaussianEntropy:
    """Test cases for the closed-form Gaussian entropy."""

    def test_standard_normal(self):
        """Test the entropy of a unit-variance scalar."""
        assert gaussian_entropy(np.eye(1)) == pytest.approx(0.5 * math.log(2 * math.pi * math.e))

    def test_scales_with_log_det(self):
        """Test that doubling the covariance adds k/2 log 2."""
        sigma = np.array([[2.0, 0.5], [0.5, 1.0]])
        assert gaussian_entropy(2 * sigma) - gaussian_entropy(sigma) == pytest.approx(math.log(2))

    def test_rejects_asymmetric(self):
        """Test symmetry validation."""
        with pytest.raises(InvalidParameterError):
            gaussian_entropy(np.array([[1.0, 0.3], [0.0, 1.0]]))


class TestCausationEntropy:
    """Test cases for C_{J->I|K} on exact covariances."""

    def setup_method(self):
        """Set up the exact unit chain on three nodes."""
        self.chain = exact_context(chain_network(3))

    def test_chain_direct_link(self):
        """Test C_{0->1} = 1/2 log 2."""
        assert causation_entropy(self.chain, [0], [1]) == pytest.approx(0.5 * math.log(2), abs=1e-12)

    def test_chain_second_link(self):
        """Test C_{1->2} = 1/2 log 3."""
        assert causation_entropy(self.chain, [1], [2]) == pytest.approx(0.5 * math.log(3), abs=1e-12)

    def test_chain_blocked_by_parent(self):
        """Test that conditioning on the parent removes the upstream node."""
        assert abs(causation_entropy(self.chain, [0], [2], [1])) < 1e-10

    def test_source_inside_condition(self):
        """Test that C is zero when J is contained in K."""
        assert causation_entropy(self.chain, [1], [2], [0, 1]) == 0.0

    def test_method_matches_function(self):
        """Test the estimator protocol method."""
        assert self.chain.causation_entropy([1], [2]) == causation_entropy(self.chain, [1], [2])

    def test_empty_sets(self):
        """Test that empty source or target sets are rejected."""
        with pytest.raises(InvalidParameterError):
            causation_entropy(self.chain, [], [1])
        with pytest.raises(InvalidParameterError):
            causation_entropy(self.chain, [0], [])

    def test_out_of_range(self):
        """Test index validation."""
        with pytest.raises(InvalidParameterError):
            causation_entropy(self.chain, [3], [1])

    def test_singular_condition(self):
        """Test that a zero conditioning covariance raises after the jitter retry."""
        ctx = EstimatorContext(LaggedCovariance(np.zeros((2, 2)), np.zeros((2, 2))))
        with pytest.raises(DegeneracyError):
            causation_entropy(ctx, [1], [0], [0])

    def test_jitter_rescues_rank_one(self):
        """Test that a rank-one conditioning block is repaired with jitter."""
        phi0 = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        ctx = EstimatorContext(LaggedCovariance(phi0, np.zeros((3, 3))))
        assert math.isfinite(causation_entropy(ctx, [2], [2], [0, 1]))

    def test_rank_limit_of_empirical_covariance(self):
        """Test that conditioning on more than T - 1 nodes is refused."""
        rng = np.random.default_rng(1)
        ctx = EstimatorContext(estimate_covariances(TimeSeries(rng.standard_normal((4, 6)))))
        with pytest.raises(DegeneracyError):
            causation_entropy(ctx, [0], [1], [1, 2, 3, 4])


class TestEntropyInvariants:
    """Test structural properties of C on random exact networks."""

    @pytest.mark.parametrize("seed", range(8))
    def test_invariants(self, seed):
        """Test redundancy, no false positives, true positives and the chain rule."""
        net = generate_er_signed(7, 0.25, 0.8, seed=seed)
        ctx = exact_context(net)
        n = net.n
        for i in range(n):
            parents = list(net.parents(i))
            others = [j for j in range(n) if j not in parents]
            for j in others:
                assert abs(causation_entropy(ctx, [j], [i], parents)) < 1e-9
                assert abs(causation_entropy(ctx, [j], [i], parents + [k for k in others if k != j])) < 1e-9
            for j in parents:
                rest = [k for k in range(n) if k != j]
                assert causation_entropy(ctx, [j], [i], rest) > 1e-6
            if len(parents) >= 2:
                a, b = parents[0], parents[1]
                joint = causation_entropy(ctx, [a, b], [i])
                split = causation_entropy(ctx, [a], [i]) + causation_entropy(ctx, [b], [i], [a])
                assert joint == pytest.approx(split, abs=1e-9)


class TestPairwiseMeasures:
    """Test cases for transfer entropy and conditional Granger causality."""

    def setup_method(self):
        """Set up exact chain and tree contexts."""
        self.chain = exact_context(chain_network(3))
        self.tree = exact_context(tree_network(binary_tree(2)))

    def test_transfer_entropy_chain(self):
        """Test T_{0->1} = C_{0->1} on the chain."""
        assert transfer_entropy(self.chain, 0, 1) == pytest.approx(0.5 * math.log(2), abs=1e-12)

    def test_transfer_entropy_matches_conditioned_cse(self):
        """Test T_{j->i} = C_{j->i|{i}} on a random network."""
        ctx = exact_context(generate_er_signed(5, 0.4, 0.7, seed=12))
        for j in range(5):
            for i in range(5):
                if i != j:
                    assert transfer_entropy(ctx, j, i) == pytest.approx(
                        causation_entropy(ctx, [j], [i], [i]), abs=1e-9
                    )

    @pytest.mark.parametrize("seed", range(6))
    def test_transfer_entropy_zero_criterion(self, seed):
        """Test that T_{j->i} vanishes exactly when sum_k A_ik (P_ii P_kj - P_ij P_ki) does."""
        net = generate_er_signed(6, 0.25, 0.8, seed=seed)
        ctx = exact_context(net)
        A, phi0 = net.weights, ctx.cov.phi0
        for i in range(net.n):
            for j in range(net.n):
                criterion = sum(
                    A[i, k] * (phi0[i, i] * phi0[k, j] - phi0[i, j] * phi0[k, i]) for k in range(net.n)
                )
                value = transfer_entropy(ctx, j, i)
                if abs(criterion) < 1e-8:
                    assert value < 1e-10
                elif abs(criterion) > 1e-3:
                    assert value >= 1e-10

    def test_transfer_entropy_self(self):
        """Test that T_{i->i} is zero."""
        assert transfer_entropy(self.chain, 1, 1) == 0.0

    def test_transfer_entropy_tree_false_positive(self):
        """Test that TE is positive for an uncle of node 3."""
        assert transfer_entropy(self.tree, 2, 3) == pytest.approx(0.5 * math.log(6 / 5), abs=1e-12)

    def test_granger_direct_link(self):
        """Test that conditional Granger is positive on a true link."""
        assert conditional_granger(self.chain, 1, 2) > 0

    def test_granger_indirect_link(self):
        """Test that conditional Granger vanishes on an indirect link."""
        assert abs(conditional_granger(self.chain, 0, 2)) < 1e-10

    def test_granger_is_twice_cse(self):
        """Test the factor of two."""
        value = causation_entropy(self.chain, [1], [2], [0, 2])
        assert conditional_granger(self.chain, 1, 2) == pytest.approx(2 * value)


class TestDiscreteExamples:
    """Test cases for plug-in discrete causation entropy."""

    def test_sum_example(self):
        """Test that conditioning on x3 doubles the information from x2."""
        dist = additive_pair_example()
        assert discrete_causation_entropy(dist) == pytest.approx(0.5 * math.log(2), abs=1e-12)
        conditioned = dist.regroup(condition=("x3",))
        assert discrete_causation_entropy(conditioned) == pytest.approx(math.log(2), abs=1e-12)

    def test_common_driver_example(self):
        """Test that conditioning on the driver removes all information from x2."""
        dist = common_driver_example()
        assert discrete_causation_entropy(dist) == pytest.approx(math.log(2), abs=1e-12)
        conditioned = dist.regroup(condition=("x3",))
        assert discrete_causation_entropy(conditioned) == pytest.approx(0.0, abs=1e-12)

    def test_xor_example(self):
        """Test that neither input alone is informative but both together are."""
        estimator = DiscreteEstimator(xor_example(), ("x", "y", "z"), {0: "x_next"})
        assert estimator.causation_entropy([1], [0]) == pytest.approx(0.0, abs=1e-12)
        assert estimator.causation_entropy([2], [0]) == pytest.approx(0.0, abs=1e-12)
        assert estimator.causation_entropy([1, 2], [0]) == pytest.approx(math.log(2), abs=1e-12)

    def test_pmf_must_normalize(self):
        """Test pmf validation."""
        with pytest.raises(InvalidParameterError):
            DiscreteJointDistribution(("a",), np.array([0.5, 0.4]))

    def test_groups_must_be_disjoint(self):
        """Test that a variable cannot sit in two groups."""
        with pytest.raises(InvalidParameterError):
            DiscreteJointDistribution(("a", "b"), np.full((2, 2), 0.25), next_state=("a",), source=("a",))

    def test_from_outcomes_merges_duplicates(self):
        """Test the pmf built from an outcome table."""
        dist = DiscreteJointDistribution.from_outcomes(("a", "b"), {(0, 1): 0.5, (1, 1): 0.5})
        assert dist.pmf.shape == (2, 1)
        assert dist.entropy(["a"]) == pytest.approx(math.log(2))
        assert dist.entropy(["b"]) == pytest.approx(0.0)

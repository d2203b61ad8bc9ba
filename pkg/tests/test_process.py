"""
Unit tests for process simulation and delay embedding.
"""

import sys
import os

import numpy as np
import pytest

# Add the src directory to the Python path more reliably
current_dir = os.path.dirname(os.path.abspath(__file__))
src_dir = os.path.join(current_dir, '..', 'src')
sys.path.insert(0, src_dir)

from network_model import Network, chain_network, loop_network
from ocse_errors import InvalidParameterError, UnstableNetworkError
from process import (
    GaussianProcessSpec,
    TimeSeries,
    companion_matrix,
    embed_markov_order,
    read_time_series,
    simulate_gaussian,
    simulate_var,
    write_time_series,
)


class TestGaussianProcessSpec:
    """Test cases for process specifications."""

    def test_broadcasts_noise(self):
        """Test that a scalar noise level is broadcast to every node."""
        spec = GaussianProcessSpec(chain_network(3), 2.0)
        assert np.array_equal(spec.noise_std, [2.0, 2.0, 2.0])
        assert np.array_equal(spec.noise_covariance, np.diag([4.0, 4.0, 4.0]))

    def test_rejects_zero_noise(self):
        """Test that nonpositive noise is rejected."""
        with pytest.raises(InvalidParameterError):
            GaussianProcessSpec(chain_network(3), [1.0, 0.0, 1.0])


class TestSimulateGaussian:
    """Test cases for Gaussian process simulation."""

    def test_shape_and_labels(self):
        """Test the sample matrix layout."""
        ts = simulate_gaussian(GaussianProcessSpec(chain_network(3), 1.0, seed=1), 50)
        assert ts.samples.shape == (50, 3)
        assert ts.labels == ("x0", "x1", "x2")

    def test_seeded_runs_repeat(self):
        """Test determinism under a fixed seed."""
        spec = GaussianProcessSpec(loop_network(4, 0.5), 1.0, seed=9)
        assert np.array_equal(simulate_gaussian(spec, 100).samples, simulate_gaussian(spec, 100).samples)

    def test_unstable_network(self):
        """Test that rho >= 1 is refused."""
        spec = GaussianProcessSpec(Network(np.array([[1.5]])), 1.0)
        with pytest.raises(UnstableNetworkError):
            simulate_gaussian(spec, 10)

    def test_chain_variances(self):
        """Test that chain node k has variance k + 1 for unit noise."""
        ts = simulate_gaussian(GaussianProcessSpec(chain_network(3), 1.0, seed=3), 20000)
        variances = ts.samples.var(axis=0, ddof=1)
        assert variances == pytest.approx([1.0, 2.0, 3.0], rel=0.05)

    def test_loop_variances(self):
        """Test that loop variances match sigma^2 / (1 - w^2)."""
        ts = simulate_gaussian(GaussianProcessSpec(loop_network(4, 0.5), 1.0, seed=4), 20000)
        variances = ts.samples.var(axis=0, ddof=1)
        assert variances == pytest.approx([4 / 3] * 4, rel=0.05)

    def test_halves_are_stationary(self):
        """Test that both halves of a long run have the same covariance."""
        net = Network(np.array([[0.6, 0.0, 0.0], [0.9, 0.0, 0.0], [0.9, 0.0, 0.0]]))
        ts = simulate_gaussian(GaussianProcessSpec(net, 1.0, seed=6), 100000)
        first = np.cov(ts.samples[:50000], rowvar=False)
        second = np.cov(ts.samples[50000:], rowvar=False)
        assert np.allclose(first, second, rtol=0.1, atol=0.0)


class TestHigherOrder:
    """Test cases for finite-order processes and delay embedding."""

    def test_companion_layout(self):
        """Test the companion matrix of a scalar AR(2) process."""
        companion = companion_matrix([np.array([[0.5]]), np.array([[0.2]])])
        assert np.array_equal(companion, [[0.5, 0.2], [1.0, 0.0]])

    def test_companion_rejects_mismatched_lags(self):
        """Test that lag matrices must share a shape."""
        with pytest.raises(InvalidParameterError):
            companion_matrix([np.eye(2), np.eye(3)])

    def test_embedding_rows(self):
        """Test that block s holds the lag-s copy."""
        raw = TimeSeries(np.arange(5, dtype=float)[:, None])
        embedded = embed_markov_order(raw, 2)
        assert np.array_equal(embedded.samples, [[1, 0], [2, 1], [3, 2], [4, 3]])
        assert embedded.labels == ("x0", "x0_lag1")

    def test_order_one_is_identity(self):
        """Test that tau = 1 leaves the series alone."""
        raw = TimeSeries(np.ones((4, 2)))
        assert embed_markov_order(raw, 1) is raw

    def test_embedding_needs_samples(self):
        """Test that tau must be smaller than T."""
        with pytest.raises(InvalidParameterError):
            embed_markov_order(TimeSeries(np.zeros((3, 1))), 3)

    def test_simulate_var_unstable(self):
        """Test that an unstable companion form is refused."""
        with pytest.raises(UnstableNetworkError):
            simulate_var([np.array([[0.9]]), np.array([[0.5]])], 1.0, 10)

    def test_simulate_var_lag_two_dependence(self):
        """Test that a pure lag-2 process correlates at lag 2 only."""
        ts = simulate_var([np.array([[0.0]]), np.array([[0.8]])], 1.0, 20000, seed=2)
        x = ts.samples[:, 0] - ts.samples[:, 0].mean()
        lag1 = np.dot(x[1:], x[:-1]) / np.dot(x, x)
        lag2 = np.dot(x[2:], x[:-2]) / np.dot(x, x)
        assert abs(lag1) < 0.05
        assert lag2 == pytest.approx(0.8, abs=0.05)


class TestTimeSeriesFiles:
    """Test cases for time series CSV I/O."""

    def test_round_trip(self, tmp_path):
        """Test that written samples read back exactly."""
        ts = simulate_gaussian(GaussianProcessSpec(chain_network(3), 1.0, seed=5), 30)
        path = tmp_path / "ts.csv"
        write_time_series(ts, path)
        assert path.read_text().splitlines()[0] == "t,x0,x1,x2"
        assert np.array_equal(read_time_series(path).samples, ts.samples)

    def test_rejects_missing_time_column(self, tmp_path):
        """Test that the first column must be t."""
        path = tmp_path / "bad.csv"
        path.write_text("x0,x1\n1,2\n")
        with pytest.raises(InvalidParameterError):
            read_time_series(path)

    def test_rejects_non_finite(self):
        """Test that NaN samples are rejected."""
        with pytest.raises(InvalidParameterError):
            TimeSeries(np.array([[1.0], [np.nan]]))

    def test_rejects_non_numeric_cells(self, tmp_path):
        """Test that text in a sample column is reported with the file path."""
        path = tmp_path / "text.csv"
        path.write_text("t,x0,x1\n0,1.0,abc\n1,2.0,3.0\n")
        with pytest.raises(InvalidParameterError, match="text.csv"):
            read_time_series(path)

    def test_rejects_empty_file(self, tmp_path):
        """Test that an empty file is an input error."""
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(InvalidParameterError, match="empty.csv"):
            read_time_series(path)

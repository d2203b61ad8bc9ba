"""
Process module: simulation of the linear Gaussian network process
X_t = A X_{t-1} + xi_t and delay embedding of higher-order series.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from network_model import Network, spectral_radius
from ocse_errors import InvalidParameterError, UnstableNetworkError

logger = logging.getLogger(__name__)

# Simulate BURN_IN_FACTOR * T steps and keep the final T.
BURN_IN_FACTOR = 10


@dataclass(frozen=True, eq=False)
class GaussianProcessSpec:
    """Network, per-node noise standard deviations and seed of a Gaussian process."""

    network: Network
    noise_std: np.ndarray
    seed: int = 0

    def __post_init__(self):
        noise_std = np.broadcast_to(np.asarray(self.noise_std, dtype=float), (self.network.n,)).copy()
        if np.any(noise_std <= 0) or not np.all(np.isfinite(noise_std)):
            raise InvalidParameterError("Every noise standard deviation must be positive and finite")
        noise_std.setflags(write=False)
        object.__setattr__(self, "noise_std", noise_std)

    @property
    def noise_covariance(self) -> np.ndarray:
        return np.diag(self.noise_std ** 2)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """T x n sample matrix; row t is the network state X_t."""

    samples: np.ndarray
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if samples.ndim != 2:
            raise InvalidParameterError(f"Samples must be a T x n matrix, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise InvalidParameterError("Time series contains non-finite entries")
        labels = self.labels
        if labels is None:
            labels = tuple(f"x{i}" for i in range(samples.shape[1]))
        if len(labels) != samples.shape[1]:
            raise InvalidParameterError(f"{len(labels)} labels for {samples.shape[1]} nodes")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "labels", tuple(labels))

    @property
    def T(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[1]


def _run_recursion(step, noise_std: np.ndarray, order: int, T: int, seed: int) -> np.ndarray:
    """
    Iterate X_t = step(history) + xi_t for BURN_IN_FACTOR * T steps.

    Noise is drawn one T-row block at a time so memory stays O(T n).
    history[s] holds X_{t-1-s}; X_0 = xi_0 and earlier states are zero.
    """
    n = noise_std.shape[0]
    rng = np.random.default_rng(seed)
    history = np.zeros((order, n))
    kept = np.empty((T, n))
    total = BURN_IN_FACTOR * T
    for block_start in range(0, total, T):
        noise = rng.standard_normal((T, n)) * noise_std
        for offset in range(T):
            state = step(history) + noise[offset]
            history[1:] = history[:-1]
            history[0] = state
            t = block_start + offset
            if t >= total - T:
                kept[t - (total - T)] = state
    return kept


def simulate_gaussian(spec: GaussianProcessSpec, T: int) -> TimeSeries:
    """
    Sample the stationary part of X_t = A X_{t-1} + xi_t.

    Args:
        spec: Stable network, noise levels and seed
        T: Number of samples to keep

    Returns:
        The final T states of a 10T-step run started from X_0 = xi_0
    """
    if T < 1:
        raise InvalidParameterError(f"T must be positive, got {T}")
    rho = spec.network.spectral_radius_cache
    if rho is None:
        rho = spectral_radius(spec.network)
    if rho >= 1.0:
        raise UnstableNetworkError(f"Cannot simulate an unstable network (rho={rho:.6g})")

    A = spec.network.weights
    samples = _run_recursion(lambda history: A @ history[0], spec.noise_std, 1, T, spec.seed)
    logger.info(f"Simulated {T} samples on {spec.network.n} nodes (seed={spec.seed})")
    return TimeSeries(samples)


def companion_matrix(lags: Sequence[np.ndarray]) -> np.ndarray:
    """
    First-order form of X_t = sum_s L_s X_{t-s} + xi_t.

    Block s of the state holds the lag-s copy, matching embed_markov_order:
    the first block row carries the lag matrices and block s >= 1 copies
    block s-1 one step later.
    """
    if not lags:
        raise InvalidParameterError("At least one lag matrix is required")
    lags = [np.atleast_2d(np.asarray(L, dtype=float)) for L in lags]
    n = lags[0].shape[0]
    if any(L.shape != (n, n) for L in lags):
        raise InvalidParameterError("All lag matrices must be n x n")
    tau = len(lags)
    companion = np.zeros((n * tau, n * tau))
    companion[:n, :] = np.hstack(lags)
    if tau > 1:
        companion[n:, :-n] = np.eye(n * (tau - 1))
    return companion


def simulate_var(lags: Sequence[np.ndarray], noise_std, T: int, seed: int = 0) -> TimeSeries:
    """Sample an order-tau linear Gaussian process with the same 10T protocol."""
    if T < 1:
        raise InvalidParameterError(f"T must be positive, got {T}")
    companion = companion_matrix(lags)
    rho = spectral_radius(Network(companion))
    if rho >= 1.0:
        raise UnstableNetworkError(f"Companion matrix is unstable (rho={rho:.6g})")

    lags = [np.atleast_2d(np.asarray(L, dtype=float)) for L in lags]
    n = lags[0].shape[0]
    noise_std = np.broadcast_to(np.asarray(noise_std, dtype=float), (n,))
    if np.any(noise_std <= 0):
        raise InvalidParameterError("Every noise standard deviation must be positive")

    stacked = np.stack(lags)

    def step(history):
        return np.einsum("sij,sj->i", stacked, history)

    samples = _run_recursion(step, noise_std, len(lags), T, seed)
    logger.info(f"Simulated order-{len(lags)} process: {T} samples on {n} nodes (seed={seed})")
    return TimeSeries(samples)


def embed_markov_order(raw: TimeSeries, tau: int) -> TimeSeries:
    """
    Delay-embed an order-tau series as a first-order one on n * tau nodes.

    Output node s * n + i at row t is raw node i at time t - s (0-based s),
    so the embedded series has raw.T - tau + 1 rows.
    """
    if tau < 1:
        raise InvalidParameterError(f"tau must be at least 1, got {tau}")
    if tau >= raw.T:
        raise InvalidParameterError(f"tau={tau} needs more than {raw.T} samples")
    if tau == 1:
        return raw
    length = raw.T - tau + 1
    blocks = [raw.samples[tau - 1 - s: tau - 1 - s + length] for s in range(tau)]
    labels = tuple(
        label if s == 0 else f"{label}_lag{s}"
        for s in range(tau)
        for label in raw.labels
    )
    return TimeSeries(np.hstack(blocks), labels=labels)


def write_time_series(ts: TimeSeries, path) -> None:
    """Write a series as CSV with header t,x0,...,x{n-1} at full precision."""
    path = Path(path)
    frame = pd.DataFrame(ts.samples, columns=[f"x{i}" for i in range(ts.n)])
    frame.insert(0, "t", np.arange(ts.T))
    frame.to_csv(path, index=False, float_format="%.17g")
    logger.info(f"Wrote {ts.T} x {ts.n} series to {path}")


def read_time_series(path) -> TimeSeries:
    """Read a series written by write_time_series."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except ValueError as e:
        raise InvalidParameterError(f"{path}: unreadable time series: {e}") from e
    if frame.columns.empty or frame.columns[0] != "t":
        raise InvalidParameterError(f"{path}: first column must be 't'")
    values = frame.drop(columns="t")
    expected = [f"x{i}" for i in range(values.shape[1])]
    if list(values.columns) != expected:
        raise InvalidParameterError(f"{path}: expected columns {expected}")
    try:
        return TimeSeries(values.to_numpy(dtype=float))
    except ValueError as e:
        raise InvalidParameterError(f"{path}: {e}") from e

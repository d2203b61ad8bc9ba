"""
Covariance module: exact asymptotic lagged covariances from the discrete
Lyapunov equation A Phi(0) A^T - Phi(0) + S = 0, and their empirical
estimates from finite time series.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np

from network_model import Network, spectral_radius
from ocse_errors import (
    ConvergenceError,
    InvalidParameterError,
    UnstableNetworkError,
)
from process import TimeSeries

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-14
DEFAULT_MAX_ITER = 10_000
RESIDUAL_BOUND = 1e-10
SYMMETRY_TOL = 1e-10
MAX_DIRECT_DIM = 40
# Eigenvalues below this fraction of the largest count as zero.
DEGENERATE_RTOL = 1e-12

EXACT = "exact"
EMPIRICAL = "empirical"


@dataclass(frozen=True, eq=False)
class LaggedCovariance:
    """Pair Phi(0), Phi(1) of lag-0 and lag-1 covariance matrices."""

    phi0: np.ndarray
    phi1: np.ndarray
    source: str = EXACT
    n_samples: Optional[int] = None

    def __post_init__(self):
        phi0 = np.array(self.phi0, dtype=float)
        phi1 = np.array(self.phi1, dtype=float)
        if phi0.ndim != 2 or phi0.shape[0] != phi0.shape[1] or phi1.shape != phi0.shape:
            raise InvalidParameterError(
                f"Phi(0) and Phi(1) must be matching square matrices, got {phi0.shape} and {phi1.shape}"
            )
        if self.source not in (EXACT, EMPIRICAL):
            raise InvalidParameterError(f"Unknown covariance source {self.source!r}")
        scale = max(1.0, float(np.max(np.abs(phi0)))) if phi0.size else 1.0
        if phi0.size and np.max(np.abs(phi0 - phi0.T)) > SYMMETRY_TOL * scale:
            raise InvalidParameterError("Phi(0) must be symmetric")
        phi0.setflags(write=False)
        phi1.setflags(write=False)
        object.__setattr__(self, "phi0", phi0)
        object.__setattr__(self, "phi1", phi1)

    @property
    def n(self) -> int:
        return self.phi0.shape[0]

    @property
    def exact(self) -> bool:
        return self.source == EXACT

    @cached_property
    def is_degenerate(self) -> bool:
        """True when Phi(0) is not numerically positive definite."""
        if self.n == 0:
            return False
        if self.n_samples is not None and self.n > self.n_samples - 1:
            return True
        eigenvalues = np.linalg.eigvalsh(self.phi0)
        return bool(eigenvalues.min() <= DEGENERATE_RTOL * max(eigenvalues.max(), 0.0))

    def restricted(self, nodes: Sequence[int]) -> "LaggedCovariance":
        """Covariances of the sub-process on the given nodes, in that order."""
        return LaggedCovariance(
            submatrix(self.phi0, nodes, nodes),
            submatrix(self.phi1, nodes, nodes),
            source=self.source,
            n_samples=self.n_samples,
        )


def _as_matrix(A: Union[Network, np.ndarray]) -> np.ndarray:
    if isinstance(A, Network):
        return np.asarray(A.weights)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidParameterError(f"Expected a square matrix, got shape {A.shape}")
    return A


def _check_stable(A: np.ndarray) -> None:
    rho = spectral_radius(Network(A))
    if rho >= 1.0:
        raise UnstableNetworkError(f"Lyapunov equation needs a stable matrix (rho={rho:.6g})")


def _check_noise(S: np.ndarray, n: int) -> np.ndarray:
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape != (n, n):
        raise InvalidParameterError(f"Noise covariance must be {n}x{n}, got {S.shape}")
    if np.any(np.diag(S) < 0) or np.max(np.abs(S - S.T), initial=0.0) > SYMMETRY_TOL:
        raise InvalidParameterError("Noise covariance must be symmetric with nonnegative diagonal")
    return S


def lyapunov_residual(A: np.ndarray, phi0: np.ndarray, S: np.ndarray) -> float:
    """max-norm of A Phi A^T - Phi + S."""
    if phi0.size == 0:
        return 0.0
    return float(np.max(np.abs(A @ phi0 @ A.T - phi0 + S)))


def solve_lyapunov(
    A,
    S,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    accelerate: bool = True,
) -> np.ndarray:
    """
    Solve A Phi A^T - Phi + S = 0 by fixed-point iteration.

    Starting from Phi = S, the plain iteration is Phi <- A Phi A^T + S. The
    accelerated (squaring) form doubles the number of summed terms per step:
    Phi <- Phi + A_k Phi A_k^T with A_{k+1} = A_k^2.

    Args:
        A: Stable n x n matrix or Network
        S: Noise covariance, symmetric with nonnegative diagonal
        tol: Stop once the max-norm change between iterates is below tol
        max_iter: Iteration budget
        accelerate: Use the squaring iteration

    Returns:
        Symmetric Phi(0) with residual below 1e-10
    """
    A = _as_matrix(A)
    S = _check_noise(S, A.shape[0])
    _check_stable(A)

    phi = S.copy()
    power = A.copy()
    for iteration in range(1, max_iter + 1):
        if accelerate:
            updated = phi + power @ phi @ power.T
            power = power @ power
        else:
            updated = A @ phi @ A.T + S
        updated = 0.5 * (updated + updated.T)
        change = float(np.max(np.abs(updated - phi), initial=0.0))
        phi = updated
        if change < tol:
            break
    else:
        raise ConvergenceError(f"Lyapunov iteration did not converge within {max_iter} steps")

    residual = lyapunov_residual(A, phi, S)
    if residual >= RESIDUAL_BOUND:
        raise ConvergenceError(f"Lyapunov residual {residual:.3g} exceeds {RESIDUAL_BOUND:g}")
    logger.debug(f"Lyapunov solve n={A.shape[0]}: {iteration} iterations, residual {residual:.3g}")
    return phi


def solve_lyapunov_direct(A, S) -> np.ndarray:
    """
    Solve (I - A kron A) vec(Phi) = vec(S) as one dense linear system.

    Memory grows as n^4, so this is only meant as a small-n cross-check.
    """
    A = _as_matrix(A)
    n = A.shape[0]
    if n > MAX_DIRECT_DIM:
        raise InvalidParameterError(f"Direct Lyapunov solve is limited to n <= {MAX_DIRECT_DIM}, got {n}")
    S = _check_noise(S, n)
    _check_stable(A)
    system = np.eye(n * n) - np.kron(A, A)
    try:
        vec_phi = np.linalg.solve(system, S.reshape(-1, order="F"))
    except np.linalg.LinAlgError as e:
        raise UnstableNetworkError(f"Kronecker system is singular: {e}") from e
    phi = vec_phi.reshape((n, n), order="F")
    return 0.5 * (phi + phi.T)


def shifted_covariance(A, phi0: np.ndarray, tau: int) -> np.ndarray:
    """Phi(tau) = A^tau Phi(0)."""
    if tau < 0:
        raise InvalidParameterError(f"Lag must be nonnegative, got {tau}")
    A = _as_matrix(A)
    phi0 = np.asarray(phi0, dtype=float)
    if tau == 0:
        return phi0.copy()
    return np.linalg.matrix_power(A, tau) @ phi0


def exact_covariances(A, noise_std=1.0, **solver_options) -> LaggedCovariance:
    """
    Exact Phi(0) and Phi(1) for X_t = A X_{t-1} + xi_t with xi_t ~ N(0, diag(noise_std^2)).

    Zero noise entries are allowed for the deterministic delay coordinates
    of a companion matrix.
    """
    A = _as_matrix(A)
    noise_std = np.broadcast_to(np.asarray(noise_std, dtype=float), (A.shape[0],))
    if np.any(noise_std < 0):
        raise InvalidParameterError("Noise standard deviations cannot be negative")
    phi0 = solve_lyapunov(A, np.diag(noise_std ** 2), **solver_options)
    return LaggedCovariance(phi0, shifted_covariance(A, phi0, 1), source=EXACT)


def centered_samples(ts: TimeSeries) -> np.ndarray:
    """Samples with the full-series mean of each node removed."""
    return ts.samples - ts.samples.mean(axis=0)


def estimate_covariances(ts: TimeSeries) -> LaggedCovariance:
    """
    Empirical Phi(0), Phi(1) from a time series.

    The full-series mean is removed per node; Phi(0) uses divisor T-1 and is
    symmetrized exactly, Phi(1) = sum_t x_{t+1} x_t^T / (T-2).
    """
    if ts.T < 3:
        raise InvalidParameterError(f"Need at least 3 samples to estimate covariances, got {ts.T}")
    centered = centered_samples(ts)
    phi0 = centered.T @ centered / (ts.T - 1)
    phi0 = 0.5 * (phi0 + phi0.T)
    phi1 = centered[1:].T @ centered[:-1] / (ts.T - 2)
    cov = LaggedCovariance(phi0, phi1, source=EMPIRICAL, n_samples=ts.T)
    if cov.is_degenerate:
        logger.warning(f"Empirical covariance of {ts.n} nodes from {ts.T} samples is degenerate")
    return cov


def submatrix(M: np.ndarray, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
    """The |rows| x |cols| block of M in the given index order."""
    M = np.asarray(M)
    rows = [int(r) for r in rows]
    cols = [int(c) for c in cols]
    for index, bound in [(r, M.shape[0]) for r in rows] + [(c, M.shape[1]) for c in cols]:
        if not 0 <= index < bound:
            raise InvalidParameterError(f"Index {index} out of range for dimension {bound}")
    return M[np.ix_(rows, cols)]


"""
Entropy module: closed-form Gaussian entropy, causation entropy, transfer
entropy and conditional Granger causality from lagged covariances, plus
plug-in entropies of small discrete joint distributions.

All values are in nats.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import entr

from covariance import LaggedCovariance, submatrix
from ocse_errors import DegeneracyError, InvalidParameterError

logger = logging.getLogger(__name__)

DEFAULT_FLOOR = 1e-12
DEFAULT_JITTER = 1e-10
PMF_TOL = 1e-12

NodeSet = Sequence[int]


class CausationEntropyEstimator(Protocol):
    """Anything that can evaluate C_{J->I|K} over nodes 0..n-1."""

    @property
    def n(self) -> int: ...

    @property
    def exact(self) -> bool: ...

    def causation_entropy(self, J: NodeSet, I: NodeSet, K: NodeSet = ()) -> float: ...


@dataclass(frozen=True, eq=False)
class EstimatorContext:
    """Gaussian causation entropy estimator over a fixed LaggedCovariance."""

    cov: LaggedCovariance
    degenerate_floor: float = DEFAULT_FLOOR
    jitter_scale: float = DEFAULT_JITTER

    def __post_init__(self):
        if self.degenerate_floor <= 0:
            raise InvalidParameterError("degenerate_floor must be positive")
        if self.jitter_scale < 0:
            raise InvalidParameterError("jitter_scale cannot be negative")

    @property
    def n(self) -> int:
        return self.cov.n

    @property
    def exact(self) -> bool:
        return self.cov.exact

    def causation_entropy(self, J: NodeSet, I: NodeSet, K: NodeSet = ()) -> float:
        return causation_entropy(self, J, I, K)


def _normalize(nodes: Iterable[int], n: int, name: str) -> Tuple[int, ...]:
    """Deduplicated node tuple in first-seen order, range checked."""
    normalized = []
    for node in nodes:
        node = int(node)
        if not 0 <= node < n:
            raise InvalidParameterError(f"Node {node} in {name} out of range for n={n}")
        if node not in normalized:
            normalized.append(node)
    return tuple(normalized)


def _cholesky(matrix: np.ndarray, jitter_scale: float, what: str):
    """Cholesky factor, retrying once with jitter_scale * trace / k on the diagonal."""
    try:
        return cho_factor(matrix, lower=True)
    except LinAlgError:
        pass
    k = matrix.shape[0]
    jitter = jitter_scale * float(np.trace(matrix)) / k
    if jitter > 0:
        logger.warning(f"{what} is not positive definite; retrying with jitter {jitter:.3g}")
        try:
            return cho_factor(matrix + jitter * np.eye(k), lower=True)
        except LinAlgError:
            pass
    raise DegeneracyError(f"{what} is not positive definite even after jitter")


def _check_rank(ctx: EstimatorContext, size: int) -> None:
    """An empirical Phi(0) from T samples has rank at most T - 1."""
    samples = ctx.cov.n_samples
    if not ctx.cov.exact and samples is not None and size > samples - 1:
        raise DegeneracyError(
            f"Conditioning on {size} nodes needs more than {samples} samples"
        )


def _residual_covariance(ctx: EstimatorContext, I: Tuple[int, ...], K: Tuple[int, ...]) -> np.ndarray:
    """Phi(0)_II - Phi(1)_IK Phi(0)_KK^{-1} Phi(1)_IK^T; Phi(0)_II when K is empty."""
    phi0_ii = submatrix(ctx.cov.phi0, I, I)
    if not K:
        return phi0_ii
    _check_rank(ctx, len(K))
    factor = _cholesky(submatrix(ctx.cov.phi0, K, K), ctx.jitter_scale, f"Phi(0) over {len(K)} nodes")
    cross = submatrix(ctx.cov.phi1, I, K)
    return phi0_ii - cross @ cho_solve(factor, cross.T)


def _floored_logdet(matrix: np.ndarray, floor: float) -> float:
    """log det with every eigenvalue floored at `floor`."""
    if matrix.shape == (1, 1):
        return math.log(max(float(matrix[0, 0]), floor))
    eigenvalues = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
    return float(np.sum(np.log(np.maximum(eigenvalues, floor))))


def gaussian_entropy(sigma: np.ndarray, jitter_scale: float = DEFAULT_JITTER) -> float:
    """
    Differential entropy 1/2 log det(sigma) + k/2 log(2 pi e) of N(mu, sigma).

    The log-determinant comes from the Cholesky factor.
    """
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    k = sigma.shape[0]
    if sigma.shape != (k, k):
        raise InvalidParameterError(f"Covariance must be square, got {sigma.shape}")
    if np.max(np.abs(sigma - sigma.T), initial=0.0) > 1e-10 * max(1.0, float(np.max(np.abs(sigma)))):
        raise InvalidParameterError("Covariance must be symmetric")
    lower, _ = _cholesky(sigma, jitter_scale, "Covariance")
    log_det = 2.0 * float(np.sum(np.log(np.diag(lower))))
    return 0.5 * log_det + 0.5 * k * math.log(2.0 * math.pi * math.e)


def causation_entropy(ctx: EstimatorContext, J: NodeSet, I: NodeSet, K: NodeSet = ()) -> float:
    """
    Causation entropy C_{J->I|K} of the Gaussian process.

    1/2 log of det of the residual covariance of I given K over that given
    K u J. Both residual covariances are floored at ctx.degenerate_floor.
    With K empty this is the lagged mutual information between J and I.

    Args:
        ctx: Estimator context holding Phi(0) and Phi(1)
        J: Source nodes (nonempty)
        I: Target nodes (nonempty)
        K: Conditioning nodes (may be empty)

    Returns:
        C_{J->I|K} in nats
    """
    I = _normalize(I, ctx.n, "I")
    J = _normalize(J, ctx.n, "J")
    K = _normalize(K, ctx.n, "K")
    if not I or not J:
        raise InvalidParameterError("Source and target node sets must be nonempty")
    extended = K + tuple(j for j in J if j not in K)
    if len(extended) == len(K):
        return 0.0
    before = _residual_covariance(ctx, I, K)
    after = _residual_covariance(ctx, I, extended)
    floor = ctx.degenerate_floor
    return 0.5 * (_floored_logdet(before, floor) - _floored_logdet(after, floor))


def transfer_entropy(ctx: EstimatorContext, j: int, i: int) -> float:
    """T_{j->i} = 1/2 log(1 + alpha_ij / (beta_ij - alpha_ij)); zero for j == i."""
    j, i = _normalize([j], ctx.n, "j")[0], _normalize([i], ctx.n, "i")[0]
    if i == j:
        return 0.0
    phi0, phi1 = ctx.cov.phi0, ctx.cov.phi1
    alpha = (phi0[i, i] * phi1[i, j] - phi0[i, j] * phi1[i, i]) ** 2
    beta = (phi0[i, i] ** 2 - phi1[i, i] ** 2) * (phi0[i, i] * phi0[j, j] - phi0[i, j] ** 2)
    gap = beta - alpha
    if gap < ctx.degenerate_floor:
        raise DegeneracyError(f"beta - alpha = {gap:.3g} for transfer entropy {j}->{i}")
    return 0.5 * math.log1p(alpha / gap)


def conditional_granger(ctx: EstimatorContext, j: int, i: int) -> float:
    """Conditional Granger causality 2 C_{j->i|V-{j}}."""
    if ctx.n < 2:
        raise InvalidParameterError("Conditional Granger causality needs n >= 2")
    rest = tuple(k for k in range(ctx.n) if k != j)
    return 2.0 * causation_entropy(ctx, [j], [i], rest)


@dataclass(frozen=True, eq=False)
class DiscreteJointDistribution:
    """
    Joint pmf over named finite-alphabet variables, one pmf axis per variable,
    with the variables split into next-state, source and condition groups.
    """

    variables: Tuple[str, ...]
    pmf: np.ndarray
    next_state: Tuple[str, ...] = ()
    source: Tuple[str, ...] = ()
    condition: Tuple[str, ...] = ()
    alphabets: Optional[Tuple[Tuple, ...]] = field(default=None)

    def __post_init__(self):
        variables = tuple(self.variables)
        pmf = np.array(self.pmf, dtype=float)
        if len(set(variables)) != len(variables):
            raise InvalidParameterError("Variable names must be unique")
        if pmf.ndim != len(variables):
            raise InvalidParameterError(f"pmf has {pmf.ndim} axes for {len(variables)} variables")
        if np.any(pmf < 0):
            raise InvalidParameterError("Probabilities must be nonnegative")
        if abs(pmf.sum() - 1.0) > PMF_TOL:
            raise InvalidParameterError(f"Probabilities sum to {pmf.sum():.15g}, not 1")
        groups = [tuple(self.next_state), tuple(self.source), tuple(self.condition)]
        named = [name for group in groups for name in group]
        unknown = set(named) - set(variables)
        if unknown:
            raise InvalidParameterError(f"Unknown variables in groups: {sorted(unknown)}")
        if len(set(named)) != len(named):
            raise InvalidParameterError("Next-state, source and condition groups must be disjoint")
        pmf.setflags(write=False)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "pmf", pmf)
        object.__setattr__(self, "next_state", groups[0])
        object.__setattr__(self, "source", groups[1])
        object.__setattr__(self, "condition", groups[2])

    @classmethod
    def from_outcomes(
        cls,
        variables: Sequence[str],
        outcomes: Mapping[Tuple, float],
        next_state: Sequence[str] = (),
        source: Sequence[str] = (),
        condition: Sequence[str] = (),
    ) -> "DiscreteJointDistribution":
        """Build the pmf from a {outcome tuple: probability} table."""
        variables = tuple(variables)
        for outcome in outcomes:
            if len(outcome) != len(variables):
                raise InvalidParameterError(f"Outcome {outcome} does not match variables {variables}")
        alphabets = tuple(
            tuple(sorted({outcome[axis] for outcome in outcomes})) for axis in range(len(variables))
        )
        pmf = np.zeros(tuple(len(alphabet) for alphabet in alphabets))
        for outcome, probability in outcomes.items():
            index = tuple(alphabets[axis].index(value) for axis, value in enumerate(outcome))
            pmf[index] += probability
        return cls(variables, pmf, tuple(next_state), tuple(source), tuple(condition), alphabets)

    def regroup(self, next_state=None, source=None, condition=None) -> "DiscreteJointDistribution":
        """Same pmf with some of the groups replaced."""
        return DiscreteJointDistribution(
            self.variables,
            self.pmf,
            self.next_state if next_state is None else tuple(next_state),
            self.source if source is None else tuple(source),
            self.condition if condition is None else tuple(condition),
            self.alphabets,
        )

    def entropy(self, names: Iterable[str]) -> float:
        """Plug-in Shannon entropy of the marginal over the named variables."""
        keep = {self.variables.index(name) for name in names}
        if not keep:
            return 0.0
        summed = tuple(axis for axis in range(len(self.variables)) if axis not in keep)
        marginal = self.pmf.sum(axis=summed) if summed else self.pmf
        return float(entr(marginal).sum())


def discrete_causation_entropy(dist: DiscreteJointDistribution) -> float:
    """H(next | condition) - H(next | condition, source) in nats."""
    if not dist.next_state or not dist.source:
        raise InvalidParameterError("Next-state and source groups must be nonempty")
    nxt, src, cond = dist.next_state, dist.source, dist.condition
    return (
        dist.entropy(nxt + cond) - dist.entropy(cond)
        - dist.entropy(nxt + cond + src) + dist.entropy(cond + src)
    )


@dataclass(frozen=True, eq=False)
class DiscreteEstimator:
    """
    Causation entropy over a discrete one-step system.

    Node k's present state is the variable present[k]; future[k] names the
    next-state variable of each node that can be a target.
    """

    joint: DiscreteJointDistribution
    present: Tuple[str, ...]
    future: Dict[int, str]

    @property
    def n(self) -> int:
        return len(self.present)

    @property
    def exact(self) -> bool:
        return True

    def causation_entropy(self, J: NodeSet, I: NodeSet, K: NodeSet = ()) -> float:
        I = _normalize(I, self.n, "I")
        J = _normalize(J, self.n, "J")
        K = _normalize(K, self.n, "K")
        if not I or not J:
            raise InvalidParameterError("Source and target node sets must be nonempty")
        missing = [i for i in I if i not in self.future]
        if missing:
            raise InvalidParameterError(f"Nodes {missing} have no next-state variable")
        source = tuple(self.present[j] for j in J if j not in K)
        if not source:
            return 0.0
        dist = self.joint.regroup(
            next_state=[self.future[i] for i in I],
            source=source,
            condition=[self.present[k] for k in K],
        )
        return discrete_causation_entropy(dist)


def _uniform_bits(count: int):
    return itertools.product((0, 1), repeat=count)


def additive_pair_example() -> DiscreteJointDistribution:
    """x1_next = x2 + x3 with x2, x3 independent fair bits."""
    outcomes = {(a + b, a, b): 0.25 for a, b in _uniform_bits(2)}
    return DiscreteJointDistribution.from_outcomes(
        ("x1_next", "x2", "x3"), outcomes, next_state=("x1_next",), source=("x2",)
    )


def common_driver_example() -> DiscreteJointDistribution:
    """Node 3 drives node 1; node 2 carries a copy of node 3's state."""
    outcomes = {(d, d, d): 0.5 for (d,) in _uniform_bits(1)}
    return DiscreteJointDistribution.from_outcomes(
        ("x1_next", "x2", "x3"), outcomes, next_state=("x1_next",), source=("x2",)
    )


def xor_example() -> DiscreteJointDistribution:
    """x_next = y xor z with x, y, z independent fair bits."""
    outcomes = {(y ^ z, x, y, z): 0.125 for x, y, z in _uniform_bits(3)}
    return DiscreteJointDistribution.from_outcomes(
        ("x_next", "x", "y", "z"), outcomes, next_state=("x_next",), source=("y",)
    )

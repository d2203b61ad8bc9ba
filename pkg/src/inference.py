"""
Inference module: optimal causation entropy (oCSE) network inference.

Aggregative discovery adds the causation-entropy maximizing node while its
contribution is significant; progressive removal then drops every node whose
causation entropy given the rest of the set is not significant. Significance
comes from a permutation test on empirical data and from a fixed tolerance
on exact covariances. Transfer entropy and conditional Granger baselines
test each pair (j, i) on its own.
"""

import hashlib
import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, model_validator

from covariance import EMPIRICAL, LaggedCovariance, centered_samples, estimate_covariances
from entropy import (
    DEFAULT_FLOOR,
    DEFAULT_JITTER,
    CausationEntropyEstimator,
    EstimatorContext,
    causation_entropy,
)
from network_model import Network
from ocse_errors import DegeneracyError, InvalidParameterError, SearchLimitError
from process import TimeSeries

logger = logging.getLogger(__name__)

DISCOVERY = "discovery"
REMOVAL = "removal"


class InferenceMethod(str, Enum):
    """Network inference methods."""

    OCSE = "ocse"
    OCSE_DISCOVERY = "ocse-discovery"
    TE = "te"
    GRANGER = "granger"


class SignificanceConfig(BaseModel):
    """Permutation test parameters and the exact-mode tolerance."""

    model_config = ConfigDict(frozen=True)

    r: int = Field(100, ge=1, description="Number of permutations")
    theta: float = Field(0.99, gt=0.0, lt=1.0, description="Significance level")
    seed: int = 0
    exact_tolerance: float = Field(1e-10, gt=0.0)


class DiscoveryStep(BaseModel):
    """One significance decision of the discovery or removal phase."""

    model_config = ConfigDict(frozen=True)

    phase: str
    candidate: int
    statistic: float
    significant: bool
    cdf: Optional[float] = None


class DiscoveryTrace(BaseModel):
    """Record of the oCSE steps for one target set."""

    model_config = ConfigDict(frozen=True)

    target: Tuple[int, ...]
    steps: Tuple[DiscoveryStep, ...] = ()
    discovered: Tuple[int, ...] = ()
    pruned: Optional[Tuple[int, ...]] = None

    @model_validator(mode="after")
    def _pruned_within_discovered(self):
        if self.pruned is not None and not set(self.pruned) <= set(self.discovered):
            raise ValueError("pruned set must be a subset of the discovered set")
        return self

    @property
    def parents(self) -> Tuple[int, ...]:
        return self.discovered if self.pruned is None else self.pruned


class EdgeRecord(BaseModel):
    source: int
    target: int
    statistic: float


class InferredNetwork(BaseModel):
    """Inferred parent sets with the statistic that supported each link."""

    method: InferenceMethod
    n: int = Field(ge=1)
    edges: List[EdgeRecord] = Field(default_factory=list)
    per_node_traces: Optional[Dict[int, DiscoveryTrace]] = None
    degenerate_nodes: List[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _edges_in_range(self):
        for edge in self.edges:
            if not (0 <= edge.source < self.n and 0 <= edge.target < self.n):
                raise ValueError(f"Edge {edge.source}->{edge.target} out of range for n={self.n}")
        return self

    @property
    def parent_sets(self) -> Dict[int, Tuple[int, ...]]:
        parents: Dict[int, List[int]] = {i: [] for i in range(self.n)}
        for edge in self.edges:
            parents[edge.target].append(edge.source)
        return {i: tuple(sorted(found)) for i, found in parents.items()}

    def to_network(self) -> Network:
        return Network.from_parent_sets(self.n, self.parent_sets)


@dataclass(frozen=True)
class PermutationOutcome:
    significant: bool
    cdf: float


@dataclass(frozen=True, eq=False)
class EmpiricalData:
    """A time series together with its centered samples and estimated covariances."""

    series: TimeSeries
    context: EstimatorContext
    centered: np.ndarray

    @classmethod
    def from_series(
        cls,
        ts: TimeSeries,
        degenerate_floor: float = DEFAULT_FLOOR,
        jitter_scale: float = DEFAULT_JITTER,
    ) -> "EmpiricalData":
        context = EstimatorContext(estimate_covariances(ts), degenerate_floor, jitter_scale)
        return cls(ts, context, centered_samples(ts))

    @property
    def n(self) -> int:
        return self.series.n

    @property
    def exact(self) -> bool:
        return False

    def causation_entropy(self, J, I, K=()) -> float:
        return causation_entropy(self.context, J, I, K)


DataSource = Union[TimeSeries, EmpiricalData, CausationEntropyEstimator]


def _as_source(data: DataSource):
    if isinstance(data, TimeSeries):
        return EmpiricalData.from_series(data)
    return data


def _node_tuple(nodes, n: int, name: str) -> Tuple[int, ...]:
    result = tuple(dict.fromkeys(int(node) for node in nodes))
    for node in result:
        if not 0 <= node < n:
            raise InvalidParameterError(f"Node {node} in {name} out of range for n={n}")
    return result


def replica_seed(seed: int, j: int, I: Sequence[int], K: Sequence[int], replica: int) -> int:
    """Seed of one permutation replica, independent of execution order."""
    key = (int(seed), int(j), tuple(sorted(I)), tuple(sorted(K)), int(replica))
    digest = hashlib.blake2b(repr(key).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def permutation_test(
    data: Union[TimeSeries, EmpiricalData],
    j: int,
    I: Sequence[int],
    K: Sequence[int],
    observed: float,
    cfg: SignificanceConfig,
) -> PermutationOutcome:
    """
    Permutation test of C_{j->I|K} against temporal shuffles of node j.

    Each replica shuffles node j's series with its own derived seed and
    recomputes only the covariance entries that involve j. The observed
    value is significant when the fraction of replicas below it exceeds
    theta.

    Args:
        data: Time series (or its precomputed EmpiricalData)
        j: Source node whose series is shuffled
        I: Target nodes
        K: Conditioning nodes
        observed: C_{j->I|K} on the unshuffled data
        cfg: Permutation count, level and master seed

    Returns:
        PermutationOutcome with the significance flag and the empirical CDF value
    """
    source = _as_source(data)
    if not isinstance(source, EmpiricalData):
        raise InvalidParameterError("Permutation tests need an empirical data source")
    n = source.n
    j = _node_tuple([j], n, "j")[0]
    I = _node_tuple(I, n, "I")
    K = _node_tuple(K, n, "K")
    if np.ptp(source.series.samples[:, j]) == 0:
        raise DegeneracyError(f"Series of node {j} is constant")

    nodes = list(dict.fromkeys(I + K + (j,)))
    local = {node: position for position, node in enumerate(nodes)}
    local_j = local[j]
    local_I = [local[i] for i in I]
    local_K = [local[k] for k in K]

    column = source.centered[:, j]
    block = source.centered[:, nodes].copy()
    T = block.shape[0]
    base = source.context.cov.restricted(nodes)
    phi0 = np.array(base.phi0)
    phi1 = np.array(base.phi1)
    ctx = source.context

    below = 0
    for replica in range(cfg.r):
        rng = np.random.default_rng(replica_seed(cfg.seed, j, I, K, replica))
        shuffled = column[rng.permutation(T)]
        block[:, local_j] = shuffled
        row = shuffled @ block / (T - 1)
        phi0[local_j, :] = row
        phi0[:, local_j] = row
        phi1[local_j, :] = shuffled[1:] @ block[:-1] / (T - 2)
        phi1[:, local_j] = block[1:].T @ shuffled[:-1] / (T - 2)
        replica_ctx = EstimatorContext(
            LaggedCovariance(phi0, phi1, source=EMPIRICAL, n_samples=T),
            ctx.degenerate_floor,
            ctx.jitter_scale,
        )
        if causation_entropy(replica_ctx, [local_j], local_I, local_K) < observed:
            below += 1

    cdf = below / cfg.r
    significant = observed > 0 and cdf > cfg.theta
    logger.debug(f"Permutation test {j}->{I}|{K}: observed={observed:.4g}, cdf={cdf:.3f}, significant={significant}")
    return PermutationOutcome(significant=significant, cdf=cdf)


def _assess(source, j: int, I, K, statistic: float, cfg: SignificanceConfig) -> Tuple[bool, Optional[float]]:
    if source.exact:
        return statistic > cfg.exact_tolerance, None
    outcome = permutation_test(source, j, I, K, statistic, cfg)
    return outcome.significant, outcome.cdf


def aggregative_discovery(data: DataSource, I: Sequence[int], cfg: SignificanceConfig) -> DiscoveryTrace:
    """
    Aggregative discovery of causal nodes.

    Repeatedly adds the node j outside K maximizing C_{j->I|K} (lowest index
    on ties), as long as that maximum passes the significance test.
    """
    source = _as_source(data)
    n = source.n
    I = _node_tuple(I, n, "I")
    if not I:
        raise InvalidParameterError("Target set must be nonempty")

    K: List[int] = []
    steps: List[DiscoveryStep] = []
    while len(K) < n:
        best, best_value = None, -np.inf
        for j in range(n):
            if j in K:
                continue
            value = source.causation_entropy([j], I, K)
            if value > best_value:
                best, best_value = j, value
        significant, cdf = _assess(source, best, I, K, best_value, cfg)
        steps.append(DiscoveryStep(
            phase=DISCOVERY, candidate=best, statistic=best_value, significant=significant, cdf=cdf
        ))
        logger.debug(f"Discovery for {I}: candidate {best} C={best_value:.4g} significant={significant}")
        if not significant:
            break
        K.append(best)

    return DiscoveryTrace(target=I, steps=tuple(steps), discovered=tuple(K))


def progressive_removal(
    data: DataSource,
    I: Sequence[int],
    K: Sequence[int],
    cfg: SignificanceConfig,
    trace: Optional[DiscoveryTrace] = None,
) -> DiscoveryTrace:
    """
    Progressive removal of non-causal nodes.

    Visits K in discovery insertion order when a trace from
    aggregative_discovery is given, otherwise in ascending node order, and
    drops p when C_{p->I|K-{p}} is not significant for the current K.
    """
    source = _as_source(data)
    n = source.n
    I = _node_tuple(I, n, "I")
    order = _node_tuple(K, n, "K")
    if trace is None:
        order = tuple(sorted(order))

    current = list(order)
    steps: List[DiscoveryStep] = []
    for p in order:
        rest = [k for k in current if k != p]
        value = source.causation_entropy([p], I, rest)
        significant, cdf = _assess(source, p, I, rest, value, cfg)
        steps.append(DiscoveryStep(
            phase=REMOVAL, candidate=p, statistic=value, significant=significant, cdf=cdf
        ))
        if not significant:
            current.remove(p)
            logger.debug(f"Removal for {I}: dropped {p} (C={value:.4g})")

    if trace is None:
        trace = DiscoveryTrace(target=I, discovered=order)
    return trace.model_copy(update={"steps": trace.steps + tuple(steps), "pruned": tuple(current)})


def infer_parents_ocse(data: DataSource, i: int, cfg: SignificanceConfig, prune: bool = True) -> DiscoveryTrace:
    """Causal parents of node i: aggregative discovery, then progressive removal."""
    source = _as_source(data)
    trace = aggregative_discovery(source, [i], cfg)
    if prune:
        trace = progressive_removal(source, [i], trace.discovered, cfg, trace=trace)
    logger.debug(f"Node {i}: parents {trace.parents}")
    return trace


def brute_force_parents(
    estimator: CausationEntropyEstimator,
    I: Sequence[int],
    max_cardinality: Optional[int] = None,
    tolerance: float = 1e-10,
) -> Tuple[int, ...]:
    """
    Minimal node set with maximal causation entropy to I.

    Subsets K are enumerated by increasing size (lexicographically within a
    size); the first one with C_{K->I} >= C_{V->I} - tolerance is returned.
    """
    if not estimator.exact:
        raise InvalidParameterError("Brute force search needs exact causation entropies")
    n = estimator.n
    I = _node_tuple(I, n, "I")
    limit = n if max_cardinality is None else min(max_cardinality, n)
    best = estimator.causation_entropy(range(n), I, ())
    for size in range(limit + 1):
        for K in itertools.combinations(range(n), size):
            value = estimator.causation_entropy(K, I, ()) if K else 0.0
            if value >= best - tolerance:
                return K
    raise SearchLimitError(f"No parent set of size <= {limit} reaches C_(V->{I}) = {best:.6g}")


def _pairwise_parents(source, i: int, method: InferenceMethod, cfg: SignificanceConfig):
    """Parents of i from independent pairwise tests; None when degenerate."""
    n = source.n
    found: Dict[int, float] = {}
    for j in range(n):
        if method is InferenceMethod.TE:
            if j == i:
                continue
            K = (i,)
        else:
            K = tuple(k for k in range(n) if k != j)
        try:
            value = source.causation_entropy([j], [i], K)
            significant, _ = _assess(source, j, [i], K, value, cfg)
        except DegeneracyError as e:
            logger.warning(f"{method.value} inference for node {i} is degenerate: {e}")
            return None
        if significant:
            # Granger links report 2 C_{j->i|V-{j}}
            found[j] = 2.0 * value if method is InferenceMethod.GRANGER else value
    return found


def _ocse_parents(source, i: int, cfg: SignificanceConfig, prune: bool):
    trace = infer_parents_ocse(source, i, cfg, prune=prune)
    statistics = {}
    for step in trace.steps:
        if step.significant:
            statistics[step.candidate] = step.statistic
    return trace, {j: statistics[j] for j in trace.parents}


def infer_network(
    data: DataSource,
    method: Union[InferenceMethod, str] = InferenceMethod.OCSE,
    cfg: Optional[SignificanceConfig] = None,
    n_jobs: int = 1,
    keep_traces: bool = True,
) -> InferredNetwork:
    """
    Infer the whole network with oCSE, transfer entropy or conditional Granger.

    oCSE runs discovery and removal per node (ocse-discovery stops after
    discovery). TE infers j->i when C_{j->i|{i}} is significant, Granger
    when C_{j->i|V-{j}} is. Nodes run in parallel up to n_jobs; results are
    merged by node index.
    """
    method = InferenceMethod(method)
    cfg = cfg or SignificanceConfig()
    source = _as_source(data)
    n = source.n

    edges: List[EdgeRecord] = []
    traces: Dict[int, DiscoveryTrace] = {}
    degenerate: List[int] = []
    if method in (InferenceMethod.OCSE, InferenceMethod.OCSE_DISCOVERY):
        prune = method is InferenceMethod.OCSE
        results = Parallel(n_jobs=n_jobs)(
            delayed(_ocse_parents)(source, i, cfg, prune) for i in range(n)
        )
        for i, (trace, statistics) in enumerate(results):
            traces[i] = trace
            edges.extend(EdgeRecord(source=j, target=i, statistic=value) for j, value in sorted(statistics.items()))
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_pairwise_parents)(source, i, method, cfg) for i in range(n)
        )
        for i, statistics in enumerate(results):
            if statistics is None:
                degenerate.append(i)
                continue
            edges.extend(EdgeRecord(source=j, target=i, statistic=value) for j, value in sorted(statistics.items()))

    logger.info(f"{method.value} inferred {len(edges)} links on {n} nodes")
    return InferredNetwork(
        method=method,
        n=n,
        edges=edges,
        per_node_traces=traces if (keep_traces and traces) else None,
        degenerate_nodes=degenerate,
    )


def write_inferred_network(result: InferredNetwork, path) -> None:
    path = Path(path)
    path.write_text(result.model_dump_json(indent=2))
    logger.info(f"Wrote {len(result.edges)} inferred links to {path}")


def read_inferred_network(path) -> InferredNetwork:
    path = Path(path)
    try:
        return InferredNetwork.model_validate_json(path.read_text())
    except ValueError as e:
        raise InvalidParameterError(f"Bad inferred network file {path}: {e}") from e

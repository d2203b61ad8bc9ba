"""
Network model module: weighted directed networks, benchmark topologies and
ground-truth causal parents.

Adjacency orientation: weights[i, j] is the weight of the link j -> i, so the
causal parents of node i are the nonzero columns of row i.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ocse_errors import InvalidParameterError, NilpotentNetworkError

logger = logging.getLogger(__name__)

# Below this the matrix is treated as nilpotent and cannot be rescaled.
NILPOTENT_RADIUS = 1e-12
MAX_REDRAWS = 100


@dataclass(frozen=True, eq=False)
class Network:
    """Weighted directed network stored as a dense n x n matrix."""

    weights: np.ndarray
    spectral_radius_cache: Optional[float] = None

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float)
        if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
            raise InvalidParameterError(f"Adjacency must be square, got shape {weights.shape}")
        if not np.all(np.isfinite(weights)):
            raise InvalidParameterError("Adjacency contains non-finite weights")
        if self.spectral_radius_cache is not None and self.spectral_radius_cache < 0:
            raise InvalidParameterError("Spectral radius cannot be negative")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def link_count(self) -> int:
        return int(np.count_nonzero(self.weights))

    def parents(self, i: int) -> Tuple[int, ...]:
        """Causal parents N_i of node i, in ascending order."""
        if not 0 <= i < self.n:
            raise InvalidParameterError(f"Node {i} out of range for n={self.n}")
        return tuple(int(j) for j in np.flatnonzero(self.weights[i]))

    def parent_sets(self) -> Dict[int, Tuple[int, ...]]:
        return {i: self.parents(i) for i in range(self.n)}

    def links(self) -> List[Tuple[int, int, float]]:
        """All links as (source, target, weight) triples in row-major order."""
        targets, sources = np.nonzero(self.weights)
        return [
            (int(j), int(i), float(self.weights[i, j]))
            for i, j in zip(targets, sources)
        ]

    @classmethod
    def from_parent_sets(cls, n: int, parent_sets: Mapping[int, Iterable[int]]) -> "Network":
        """Indicator network with a unit link j -> i for each j in parent_sets[i]."""
        weights = np.zeros((n, n))
        for i, parents in parent_sets.items():
            for j in parents:
                if not (0 <= i < n and 0 <= j < n):
                    raise InvalidParameterError(f"Link {j}->{i} out of range for n={n}")
                weights[i, j] = 1.0
        return cls(weights)


@dataclass(frozen=True)
class TreeSpec:
    """
    Rooted directed tree given by each node's single ancestor.

    parent[i] is None for the root and the ancestor index p_i otherwise.
    """

    parent: Tuple[Optional[int], ...]
    depth: Tuple[int, ...] = field(init=False)

    def __post_init__(self):
        parent = tuple(None if p is None else int(p) for p in self.parent)
        n = len(parent)
        if n == 0:
            raise InvalidParameterError("A tree needs at least one node")
        roots = [i for i, p in enumerate(parent) if p is None]
        if len(roots) != 1:
            raise InvalidParameterError(f"A tree has exactly one root, found {len(roots)}")
        for i, p in enumerate(parent):
            if p is not None and not 0 <= p < n:
                raise InvalidParameterError(f"Parent {p} of node {i} out of range")
            if p == i:
                raise InvalidParameterError(f"Node {i} is its own parent")

        depth: List[Optional[int]] = [None] * n
        for start in range(n):
            path = []
            node = start
            while depth[node] is None and parent[node] is not None:
                if node in path:
                    raise InvalidParameterError(f"Cycle through node {node}")
                path.append(node)
                node = parent[node]
            base = 0 if depth[node] is None else depth[node]
            depth[node] = base
            for offset, member in enumerate(reversed(path), start=1):
                depth[member] = base + offset

        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "depth", tuple(int(d) for d in depth))

    @property
    def n(self) -> int:
        return len(self.parent)

    @property
    def root(self) -> int:
        return self.parent.index(None)


@dataclass(frozen=True)
class ErrorRatios:
    """False negative (eps-) and false positive (eps+) ratios; None when undefined."""

    false_negative: Optional[float]
    false_positive: Optional[float]

    @property
    def defined(self) -> bool:
        return self.false_negative is not None and self.false_positive is not None


def spectral_radius(net: Network) -> float:
    """Modulus of the dominant eigenvalue; 0 for the empty or zero matrix."""
    if net.n == 0 or not np.any(net.weights):
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(net.weights))))


def gelfand_radius(net: Network, k: int = 64) -> float:
    """Gelfand estimate ||A^k||_2^(1/k) of the spectral radius."""
    if k < 1:
        raise InvalidParameterError("k must be positive")
    power = np.linalg.matrix_power(net.weights, k)
    return float(np.linalg.norm(power, 2) ** (1.0 / k))


def _has_cycle(mask: np.ndarray) -> bool:
    """True when the link pattern contains a directed cycle (self-loops included)."""
    reach = mask.astype(float)
    steps = 1
    while steps < mask.shape[0]:
        reach = ((reach @ reach) > 0).astype(float)
        steps *= 2
    return bool(reach.any())


def generate_er_signed(n: int, p: float, target_rho: float, seed: int) -> Network:
    """
    Signed Erdos-Renyi network tuned to a target spectral radius.

    Every ordered pair (i, j), self-loops included, carries a link with
    probability p. Link signs are +/- with equal probability and the common
    magnitude w is chosen so that rho(A) = target_rho.

    Args:
        n: Number of nodes
        p: Link probability in (0, 1]
        target_rho: Spectral radius in (0, 1)
        seed: Seed for the random generator

    Returns:
        Network with the spectral radius cached
    """
    if n < 1:
        raise InvalidParameterError(f"n must be positive, got {n}")
    if not 0.0 < p <= 1.0:
        raise InvalidParameterError(f"p must lie in (0, 1], got {p}")
    if not 0.0 < target_rho < 1.0:
        raise InvalidParameterError(f"target_rho must lie in (0, 1), got {target_rho}")

    rng = np.random.default_rng(seed)
    for attempt in range(MAX_REDRAWS):
        mask = rng.random((n, n)) < p
        signs = np.where(rng.random((n, n)) < 0.5, -1.0, 1.0)
        unit = mask * signs
        rho = spectral_radius(Network(unit)) if _has_cycle(mask) else 0.0
        if rho <= NILPOTENT_RADIUS:
            logger.debug(f"Draw {attempt} is nilpotent, redrawing")
            continue
        net = Network(unit * (target_rho / rho))
        net = Network(net.weights, spectral_radius_cache=spectral_radius(net))
        logger.info(
            f"Generated signed ER network n={n} p={p}: {net.link_count} links, "
            f"w={target_rho / rho:.6g}, rho={net.spectral_radius_cache:.6g}"
        )
        return net
    raise NilpotentNetworkError(f"Network stayed nilpotent after {MAX_REDRAWS} draws (n={n}, p={p})")


def chain_network(n: int) -> Network:
    """Directed chain 0 -> 1 -> ... -> n-1 with unit weights."""
    if n < 2:
        raise InvalidParameterError(f"A chain needs n >= 2, got {n}")
    return Network(np.eye(n, k=-1), spectral_radius_cache=0.0)


def loop_network(n: int, w: float) -> Network:
    """Directed loop 0 -> 1 -> ... -> n-1 -> 0 with uniform weight w."""
    if n < 2:
        raise InvalidParameterError(f"A loop needs n >= 2, got {n}")
    if not 0.0 < w < 1.0:
        raise InvalidParameterError(f"Loop weight must lie in (0, 1) for stability, got {w}")
    weights = np.zeros((n, n))
    for i in range(n):
        weights[i, (i - 1) % n] = w
    return Network(weights, spectral_radius_cache=float(w))


def tree_network(spec: TreeSpec) -> Network:
    """Unit-weight tree network: A[i, parent(i)] = 1 for every non-root i."""
    weights = np.zeros((spec.n, spec.n))
    for i, p in enumerate(spec.parent):
        if p is not None:
            weights[i, p] = 1.0
    return Network(weights, spectral_radius_cache=0.0)


def binary_tree(depth: int) -> TreeSpec:
    """Complete binary tree of the given depth in breadth-first numbering."""
    if depth < 0:
        raise InvalidParameterError("depth must be nonnegative")
    n = 2 ** (depth + 1) - 1
    return TreeSpec(tuple([None] + [(i - 1) // 2 for i in range(1, n)]))


def random_tree(n: int, seed: int) -> TreeSpec:
    """Random recursive tree rooted at 0; each node's parent has a lower index."""
    if n < 1:
        raise InvalidParameterError("n must be positive")
    rng = np.random.default_rng(seed)
    return TreeSpec(tuple([None] + [int(rng.integers(0, i)) for i in range(1, n)]))


def error_ratios(truth: Network, inferred: Network) -> ErrorRatios:
    """
    False negative and false positive ratios over all ordered pairs.

    eps- is the fraction of true links that were not inferred, eps+ the
    fraction of absent pairs (diagonal included) that were inferred.
    """
    if truth.n != inferred.n:
        raise InvalidParameterError(f"Size mismatch: truth n={truth.n}, inferred n={inferred.n}")
    true_links = truth.weights != 0
    found = inferred.weights != 0
    n_true = int(true_links.sum())
    n_absent = true_links.size - n_true

    false_negative = None
    if n_true:
        false_negative = float((true_links & ~found).sum() / n_true)
    else:
        logger.warning("Truth network has no links; eps- is undefined")

    false_positive = None
    if n_absent:
        false_positive = float((~true_links & found).sum() / n_absent)
    else:
        logger.warning("Truth network is complete; eps+ is undefined")

    return ErrorRatios(false_negative=false_negative, false_positive=false_positive)


def write_edge_list(net: Network, path) -> None:
    """
    Write a network as a JSON header line followed by "i,j,weight" lines.

    i is the target row and j the source column, so each line stores the
    weight of the link j -> i.
    """
    path = Path(path)
    rho = net.spectral_radius_cache
    if rho is None:
        rho = spectral_radius(net)
    lines = [json.dumps({"n": net.n, "rho": rho})]
    for j, i, weight in net.links():
        lines.append(f"{i},{j},{weight!r}")
    path.write_text("\n".join(lines) + "\n")
    logger.info(f"Wrote {net.link_count} links to {path}")


def read_edge_list(path) -> Network:
    """Read a network written by write_edge_list."""
    path = Path(path)
    lines = [line for line in path.read_text().splitlines() if line.strip()]
    if not lines:
        raise InvalidParameterError(f"Empty edge list file: {path}")
    try:
        header = json.loads(lines[0])
        n = int(header["n"])
    except (ValueError, KeyError, TypeError) as e:
        raise InvalidParameterError(f"Bad edge list header in {path}: {e}") from e

    weights = np.zeros((n, n))
    for number, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise InvalidParameterError(f"{path}:{number}: expected 'i,j,weight', got {line!r}")
        try:
            i, j, weight = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as e:
            raise InvalidParameterError(f"{path}:{number}: {e}") from e
        if not (0 <= i < n and 0 <= j < n):
            raise InvalidParameterError(f"{path}:{number}: link {j}->{i} out of range for n={n}")
        weights[i, j] = weight

    rho = header.get("rho")
    return Network(weights, spectral_radius_cache=None if rho is None else float(rho))


def relabel(net: Network, order: Sequence[int]) -> Network:
    """Network with node order[k] renamed to k."""
    order = np.asarray(order)
    if sorted(order.tolist()) != list(range(net.n)):
        raise InvalidParameterError("order must be a permutation of the node indices")
    return Network(net.weights[np.ix_(order, order)], spectral_radius_cache=net.spectral_radius_cache)

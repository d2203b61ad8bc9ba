"""
Oracles module: closed-form causation entropies of directed chains, loops
and unit-weight trees, used as ground truth for the Lyapunov pipeline.

Nodes are 0-based; the tree root has depth 0.
"""

import logging
import math
from functools import cached_property
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from covariance import EXACT, LaggedCovariance, exact_covariances
from entropy import EstimatorContext, causation_entropy
from network_model import (
    TreeSpec,
    binary_tree,
    chain_network,
    loop_network,
    random_tree,
    tree_network,
)
from ocse_errors import InvalidParameterError

logger = logging.getLogger(__name__)

TOPOLOGIES = ("chain", "loop", "tree")


class TreeQuery:
    """Depth and lowest-common-ancestor lookups on a TreeSpec."""

    def __init__(self, spec: TreeSpec):
        self.spec = spec

    @property
    def n(self) -> int:
        return self.spec.n

    def depth(self, i: int) -> int:
        return self.spec.depth[i]

    def _lift(self, i: int, j: int) -> int:
        parent, depth = self.spec.parent, self.spec.depth
        while depth[i] > depth[j]:
            i = parent[i]
        while depth[j] > depth[i]:
            j = parent[j]
        while i != j:
            i, j = parent[i], parent[j]
        return i

    @cached_property
    def lca_table(self) -> Dict[Tuple[int, int], int]:
        table = {}
        for i in range(self.n):
            for j in range(i, self.n):
                ancestor = self._lift(i, j)
                table[(i, j)] = ancestor
                table[(j, i)] = ancestor
        return table

    def lca(self, i: int, j: int) -> int:
        self._check(i, j)
        return self.lca_table[(i, j)]

    def _check(self, *nodes: int) -> None:
        for node in nodes:
            if not 0 <= node < self.n:
                raise InvalidParameterError(f"Node {node} out of range for a tree of {self.n} nodes")


def chain_cse(j: int, i: int, sigmas: Sequence[float]) -> float:
    """C_{j->i} on the directed chain: nonzero only for i = j + 1."""
    sigmas = np.asarray(sigmas, dtype=float)
    n = sigmas.shape[0]
    if not (0 <= j < n and 0 <= i < n):
        raise InvalidParameterError(f"Pair ({j}, {i}) out of range for a chain of {n} nodes")
    if i != j + 1:
        return 0.0
    upstream = float(np.sum(sigmas[: j + 1] ** 2))
    return 0.5 * math.log1p(upstream / sigmas[i] ** 2)


def loop_cse(j: int, i: int, w: float, n: int) -> float:
    """C_{j->i} on the directed loop; the noise level drops out."""
    if not 0.0 < w < 1.0:
        raise InvalidParameterError(f"Loop weight must lie in (0, 1), got {w}")
    if not (0 <= j < n and 0 <= i < n):
        raise InvalidParameterError(f"Pair ({j}, {i}) out of range for a loop of {n} nodes")
    if j != (i - 1) % n:
        return 0.0
    return -0.5 * math.log1p(-w * w)


def tree_cse(tq: TreeQuery, j: int, i: int) -> float:
    """
    C_{j->i} on a unit-weight, unit-noise tree.

    Nonzero exactly when node i sits one level below node j; the value
    peaks at 1/2 log(1 + d_i) when j is i's ancestor.
    """
    tq._check(j, i)
    d_i, d_j = tq.depth(i), tq.depth(j)
    if d_i != d_j + 1:
        return 0.0
    joint = (d_i + 1) * (d_j + 1)
    shared = (tq.depth(tq.lca(i, j)) + 1) ** 2
    return 0.5 * math.log(joint / (joint - shared))


def tree_phi(tq: TreeQuery) -> LaggedCovariance:
    """Closed-form Phi(0), Phi(1) of a unit-weight, unit-noise tree."""
    n = tq.n
    root = tq.spec.root
    phi0 = np.zeros((n, n))
    phi1 = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            shared = tq.depth(tq.lca(i, j)) + 1
            if tq.depth(i) == tq.depth(j):
                phi0[i, j] = shared
            if i != root and tq.depth(i) == tq.depth(j) + 1:
                phi1[i, j] = shared
    return LaggedCovariance(phi0, phi1, source=EXACT)


def oracle_table(
    topology: str,
    n: Optional[int] = None,
    w: float = 0.5,
    sigmas: Optional[Sequence[float]] = None,
    depth: Optional[int] = None,
    seed: int = 0,
) -> pd.DataFrame:
    """
    Closed-form C_{j->i} next to the Lyapunov pipeline value for every ordered pair.

    Args:
        topology: "chain", "loop" or "tree"
        n: Number of nodes (for a tree: size of a seeded random tree)
        w: Loop weight
        sigmas: Chain noise standard deviations, unit by default
        depth: Use a complete binary tree of this depth instead of a random tree
        seed: Seed of the random tree

    Returns:
        DataFrame with columns j, i, closed_form, pipeline, abs_diff
    """
    if topology not in TOPOLOGIES:
        raise InvalidParameterError(f"Unknown topology {topology!r}, expected one of {TOPOLOGIES}")

    if topology == "tree":
        spec = binary_tree(depth) if depth is not None else random_tree(_require_n(n), seed)
        tq = TreeQuery(spec)
        net = tree_network(spec)
        noise = np.ones(spec.n)

        def closed_form(j, i):
            return tree_cse(tq, j, i)
    elif topology == "chain":
        n = _require_n(n)
        noise = np.ones(n) if sigmas is None else np.asarray(sigmas, dtype=float)
        if noise.shape != (n,):
            raise InvalidParameterError(f"Expected {n} noise levels, got {noise.shape[0]}")
        net = chain_network(n)

        def closed_form(j, i):
            return chain_cse(j, i, noise)
    else:
        n = _require_n(n)
        noise = np.ones(n)
        net = loop_network(n, w)

        def closed_form(j, i):
            return loop_cse(j, i, w, n)

    ctx = EstimatorContext(exact_covariances(net, noise))
    rows = []
    for j in range(net.n):
        for i in range(net.n):
            expected = closed_form(j, i)
            computed = causation_entropy(ctx, [j], [i])
            rows.append({
                "j": j,
                "i": i,
                "closed_form": expected,
                "pipeline": computed,
                "abs_diff": abs(expected - computed),
            })
    table = pd.DataFrame(rows, columns=["j", "i", "closed_form", "pipeline", "abs_diff"])
    logger.info(f"Oracle table for {topology} on {net.n} nodes: max abs_diff {table['abs_diff'].max():.3g}")
    return table


def _require_n(n: Optional[int]) -> int:
    if n is None or n < 2:
        raise InvalidParameterError(f"Need at least 2 nodes, got {n}")
    return int(n)

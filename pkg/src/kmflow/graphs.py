"""Finite weighted graphs materialized from graphons.

Two constructions:

* :func:`deterministic_graph` -- node i carries the cell averages of the
  kernel as edge weights (an edge exists wherever the weight is nonzero),
* :func:`sample_w_random` -- each unordered pair {i, j} is kept independently
  with probability equal to the cell average ("W-random" sampling).

Sampling is counter-based: the coin for pair (i, j), i <= j, comes from a
Philox stream keyed by (seed, i) at position j - i, so results are
reproducible, order-independent, and parallelizable over rows.  Diagonal
entries (self-loops) are kept in both constructions; for odd couplings the
self term drops out of the dynamics anyway.
"""

from __future__ import annotations

import numpy as np

from .graphon import Graphon

MAX_NODES = 8192

_BOUND_SLACK = 1e-9


class WeightedGraph:
    """Dense symmetric weight matrix with |w_ij| <= 1 plus sampling provenance."""

    def __init__(self, weights, seed: int | None = None, sampled: bool = False):
        weights = np.array(weights, dtype=float)
        if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
            raise ValueError("weights must form a square matrix")
        n = weights.shape[0]
        if n > MAX_NODES:
            raise ValueError(
                f"dense storage supports up to {MAX_NODES} nodes, got {n}"
            )
        if not np.array_equal(weights, weights.T):
            raise ValueError("weights must be symmetric")
        if np.max(np.abs(weights)) > 1.0 + _BOUND_SLACK:
            raise ValueError("weights must lie in [-1, 1]")
        if sampled and not np.isin(weights, (0.0, 1.0)).all():
            raise ValueError("sampled graphs must have 0/1 weights")
        self.weights = np.clip(weights, -1.0, 1.0)
        self.weights.setflags(write=False)
        self.seed = seed
        self.sampled = sampled

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def edges(self):
        """Yield (i, j, weight) for the nonzero upper triangle, diagonal included."""
        iu, ju = np.nonzero(np.triu(self.weights))
        for i, j in zip(iu, ju):
            yield int(i), int(j), float(self.weights[i, j])


def deterministic_graph(W: Graphon, n: int) -> WeightedGraph:
    """Weighted graph whose weight matrix is the n x n cell average of W."""
    if n < 1:
        raise ValueError("node count must be >= 1")
    if n > MAX_NODES:
        raise ValueError(f"dense storage supports up to {MAX_NODES} nodes, got {n}")
    return WeightedGraph(W.cell_average(n).values)


def sample_w_random(W: Graphon, n: int, seed: int) -> WeightedGraph:
    """Sample a 0/1 graph with independent edge probabilities W_{n,ij}.

    Requires all cell averages in [0, 1]; kernels with negative averages are
    rejected since they cannot serve as edge probabilities.
    """
    if n < 1:
        raise ValueError("node count must be >= 1")
    if n > MAX_NODES:
        raise ValueError(f"dense storage supports up to {MAX_NODES} nodes, got {n}")
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    probs = W.cell_average(n).values
    if probs.min() < 0.0:
        raise ValueError(
            "sampling requires probability range: cell averages must be >= 0"
        )
    weights = np.zeros((n, n))
    for i in range(n):
        stream = np.random.Generator(
            np.random.Philox(key=[np.uint64(seed), np.uint64(i)])
        )
        u = stream.random(n - i)
        row = (u < probs[i, i:]).astype(float)
        weights[i, i:] = row
        weights[i:, i] = row
    return WeightedGraph(weights, seed=seed, sampled=True)


def pixel_picture(graph: WeightedGraph) -> np.ndarray:
    """Grayscale image of the weight matrix: intensity 255 * (1 - |w|).

    Weight 1 maps to black (0), weight 0 to white (255).  Returns a uint8
    array; see :func:`kmflow.io.write_pgm` for the binary PGM writer.
    """
    intensity = np.rint(255.0 * (1.0 - np.abs(graph.weights)))
    return intensity.astype(np.uint8)

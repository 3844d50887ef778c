"""Minimax-concave and Huber penalties, scalar and graph variants.

The graph Huber function is the quadratic form of a signal against the
Laplacian of a "penalty graph" whose edge weights depend on a reference
signal: edges with a small reference difference get a quadratic weight
(a/2) w, edges across large differences get a weight that reproduces the
linear Huber tail w |x_i - x_j| - w/(2a) near the reference.
"""

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .graph import Graph, IncidenceMatrix, SparseSymmetric, as_signal, laplacian_from_weights

QUADRATIC = 0
L1 = 1


def scalar_mc(a: float, x: float) -> float:
    """Minimax-concave penalty; |x| for a = 0, saturating at 1/(2a)."""
    if a < 0:
        raise ValueError("MC parameter must be nonnegative")
    ax = abs(x)
    if a == 0.0:
        return ax
    if ax <= 1.0 / a:
        return ax - 0.5 * a * x * x
    return 1.0 / (2.0 * a)


def scalar_huber(a: float, x: float) -> float:
    """Huber function: quadratic core (a/2) x^2, linear tails |x| - 1/(2a)."""
    if a <= 0:
        raise ValueError("Huber parameter must be positive")
    ax = abs(x)
    if ax <= 1.0 / a:
        return 0.5 * a * x * x
    return ax - 1.0 / (2.0 * a)


@dataclass(frozen=True)
class PenaltyGraph:
    """Penalty graph for a reference signal: per-edge weight and branch tag."""

    base: Graph
    reference: np.ndarray
    a: float
    eps: float
    wp: np.ndarray
    branch: np.ndarray  # QUADRATIC (0) or L1 (1) per edge

    def laplacian(self) -> SparseSymmetric:
        return laplacian_from_weights(self.base, self.wp)


def build_penalty_graph(g: Graph, x_ref, a: float, eps: float) -> PenaltyGraph:
    """Signal-dependent penalty-graph weights.

    Edge (i, j) is QUADRATIC when |x'_i - x'_j| <= 1/a with wp = (a/2) w,
    else L1 with wp = w/max(|d|, eps) - w/(2a max(d^2, eps)).
    """
    if a <= 0:
        raise ValueError("MC parameter a must be positive")
    if eps <= 0:
        raise ValueError("eps must be positive")
    x_ref = as_signal(x_ref, g.num_nodes)
    diffs = x_ref[g.edge_i] - x_ref[g.edge_j]
    wp, branch = kernels.penalty_weights(g.weights, diffs, a, eps)
    return PenaltyGraph(g, x_ref, a, eps, wp, branch)


def graph_huber(g: Graph, x_ref, x, a: float, eps: float) -> float:
    """Graph Huber value x^T L^p x, evaluated edge-wise as sum wp (x_i-x_j)^2."""
    pg = build_penalty_graph(g, x_ref, a, eps)
    x = as_signal(x, g.num_nodes)
    d = x[g.edge_i] - x[g.edge_j]
    return float(np.dot(pg.wp, d * d))


def moreau_oracle(
    c: IncidenceMatrix, x, a: float, grid_step: float, grid_radius: float
) -> float:
    """Brute-force Moreau envelope of the l1 norm at C x.

    min_v ||v||_1 + (a/2) ||Cx - v||^2 separates per edge, so each component
    is minimized by a 1-d grid scan over [-grid_radius, grid_radius].  Slow
    by design; oracle for small edge counts only.
    """
    if a <= 0:
        raise ValueError("MC parameter a must be positive")
    if grid_step > 1e-3:
        raise ValueError("grid_step must be <= 1e-3 for oracle accuracy")
    u = c.matvec(x)
    if np.max(np.abs(u), initial=0.0) > grid_radius:
        raise ValueError("grid_radius does not cover C x")
    half = int(np.ceil(grid_radius / grid_step))
    v = np.arange(-half, half + 1) * grid_step  # symmetric grid through 0
    total = 0.0
    for um in u:
        total += float(np.min(np.abs(v) + 0.5 * a * (um - v) ** 2))
    return total

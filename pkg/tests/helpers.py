"""Shared fixtures: random graphs and brute-force oracles."""

import numpy as np

from ncgtv.graph import Graph


def path_graph(n, w=1.0):
    return Graph.from_edges(n, [(i, i + 1, w) for i in range(n - 1)])


def k2(w=1.0):
    return Graph.from_edges(2, [(0, 1, w)])


def random_graph(rng, n_max=50, avg_degree=4.0, w_lo=0.0, w_hi=1.0):
    """Random sparse graph with weights in [w_lo, w_hi]."""
    n = int(rng.integers(2, n_max + 1))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    want = min(len(pairs), max(1, int(round(avg_degree * n / 2))))
    take = rng.choice(len(pairs), size=want, replace=False)
    edges = [(pairs[t][0], pairs[t][1], rng.uniform(w_lo, w_hi)) for t in sorted(take)]
    return Graph.from_edges(n, edges)


def tv_objective_grid(y, w, mu, pts_axes):
    """TV objective on a path graph over a dense grid; vectorized."""
    grids = np.meshgrid(*pts_axes, indexing="ij")
    x = np.stack(grids, axis=-1)
    fid = np.sum((x - np.asarray(y)) ** 2, axis=-1)
    diffs = np.abs(np.diff(x, axis=-1))
    tv = mu * np.sum(np.asarray(w) * diffs, axis=-1)
    return x, fid + tv


def brute_force_tv(y, w, mu, step=1e-3, margin=0.1, pts=21):
    """Grid-search minimizer of the path-TV objective.

    Nested refinement: the objective is strictly convex, so shrinking the
    box around the current grid argmin (with a 3-cell margin) keeps the true
    minimizer inside until the grid reaches the requested step.
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    lo = np.full(n, y.min() - margin)
    hi = np.full(n, y.max() + margin)
    while True:
        axes = [np.linspace(lo[i], hi[i], pts) for i in range(n)]
        x, vals = tv_objective_grid(y, w, mu, axes)
        idx = np.unravel_index(np.argmin(vals), vals.shape)
        best = np.array([axes[i][idx[i]] for i in range(n)])
        h = (hi - lo) / (pts - 1)
        if h.max() <= step:
            return best
        lo = best - 3.0 * h
        hi = best + 3.0 * h

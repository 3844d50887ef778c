"""Gershgorin certificate for the largest convexity-preserving MC parameter.

The denoising objective stays convex while B = I - mu * L^p_a is PSD.  Every
penalty-graph edge weight grows with the MC parameter ``a``, so the Gershgorin
disc bound of B is nonincreasing in ``a`` and the largest certified value can
be found by a binary search over the branch-switch points 1/|x'_i - x'_j|
followed by a per-row quadratic solve inside the final bracket.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .graph import Graph, SparseSymmetric, as_signal
from .huber import build_penalty_graph


def gct_lower_bound(b: SparseSymmetric) -> float:
    """min_i (B_ii - sum_{j != i} |B_ij|), a lower bound on lambda_min(B)."""
    return float(np.min(b.diag - b.row_abs_offdiag_sums()))


def penalty_matrix(g: Graph, x_ref, a: float, mu: float, eps: float) -> SparseSymmetric:
    """B = I - mu * L^p_a(x') as a sparse symmetric matrix."""
    pg = build_penalty_graph(g, x_ref, a, eps)
    return pg.laplacian().scaled(-mu).add_identity(1.0)


def _disc_bounds(g: Graph, x_ref, a: float, mu: float, eps: float):
    """Per-row Gershgorin disc bounds of B = I - mu * L^p_a, without
    materializing B: centers are 1 - mu d_i and radii mu d_i for the
    nonnegative penalty degrees d."""
    pg = build_penalty_graph(g, x_ref, a, eps)
    wp_abs = np.abs(pg.wp)
    deg = np.bincount(g.edge_i, weights=pg.wp, minlength=g.num_nodes)
    deg += np.bincount(g.edge_j, weights=pg.wp, minlength=g.num_nodes)
    rad = np.bincount(g.edge_i, weights=wp_abs, minlength=g.num_nodes)
    rad += np.bincount(g.edge_j, weights=wp_abs, minlength=g.num_nodes)
    return 1.0 - mu * deg - mu * rad


def feasible(a: float, g: Graph, x_ref, mu: float, eps: float) -> bool:
    """True when the Gershgorin bound certifies B = I - mu L^p_a as PSD."""
    if a <= 0 or mu <= 0:
        raise ValueError("a and mu must be positive")
    return bool(np.min(_disc_bounds(g, x_ref, a, mu, eps), initial=1.0) >= 0.0)


def threshold_list(g: Graph, x_ref, eps: float) -> np.ndarray:
    """Distinct 1/|x'_i - x'_j| in increasing order, skipping |d| <= eps.

    These are the only values of ``a`` at which an edge switches branch.
    """
    x_ref = as_signal(x_ref, g.num_nodes)
    ad = np.abs(x_ref[g.edge_i] - x_ref[g.edge_j])
    ad = ad[ad > eps]
    return np.unique(1.0 / ad) if ad.size else np.zeros(0)


class BracketResult(NamedTuple):
    a_l: float
    a_u: float
    feasible_at_min: bool
    n_feasible_calls: int


def binary_search_bracket(
    s: np.ndarray, g: Graph, x_ref, mu: float, eps: float, a_floor: float, a_max: float
) -> BracketResult:
    """Largest feasible threshold a_l and the next larger one a_u.

    Monotonicity of the disc bound in ``a`` makes binary search valid.  With
    no thresholds the bracket is (a_floor, a_max); when even the smallest
    threshold is infeasible the bracket (a_floor, min(s)) is returned with
    ``feasible_at_min`` cleared.
    """
    if len(s) == 0:
        return BracketResult(a_floor, a_max, True, 0)
    if not feasible(float(s[0]), g, x_ref, mu, eps):
        return BracketResult(a_floor, float(s[0]), False, 1)
    if len(s) == 1 or feasible(float(s[-1]), g, x_ref, mu, eps):
        return BracketResult(float(s[-1]), a_max, True, 1 if len(s) == 1 else 2)
    calls = 2
    lo, hi = 0, len(s) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        calls += 1
        if feasible(float(s[mid]), g, x_ref, mu, eps):
            lo = mid
        else:
            hi = mid
    return BracketResult(float(s[lo]), float(s[hi]), True, calls)


class RowSums(NamedTuple):
    r1_tilde: float  # half-sum of weights over quadratic-branch edges
    r2: float        # sum of w / max(|d|, eps) over l1-branch edges
    r3_tilde: float  # -half-sum of w / max(d^2, eps) over l1-branch edges


def _row_sums_all(g: Graph, x_ref, a_l: float, a_u: float, eps: float):
    """Vectorized subset sums for every row at once.

    Branch membership is fixed on the open interval (a_l, a_u): an edge is
    L1 iff its switch point 1/|d| <= a_l; edges with |d| <= eps never switch
    and count as quadratic.
    """
    x_ref = as_signal(x_ref, g.num_nodes)
    n = g.num_nodes
    d = x_ref[g.edge_i] - x_ref[g.edge_j]
    ad = np.abs(d)
    l1 = (ad > eps) & (1.0 / np.maximum(ad, eps) <= a_l)
    w = g.weights
    q_w = np.where(l1, 0.0, w)
    l1_r2 = np.where(l1, w / np.maximum(ad, eps), 0.0)
    l1_r3 = np.where(l1, -0.5 * w / np.maximum(d * d, eps), 0.0)

    def both_ends(vals):
        out = np.bincount(g.edge_i, weights=vals, minlength=n)
        out += np.bincount(g.edge_j, weights=vals, minlength=n)
        return out

    return 0.5 * both_ends(q_w), both_ends(l1_r2), both_ends(l1_r3)


def subset_sums(
    g: Graph, x_ref, row: int, a_l: float, a_u: float, eps: float
) -> RowSums:
    """Three per-row subset sums over the bracket's fixed branch membership."""
    if not 0 <= row < g.num_nodes:
        raise ValueError("row out of range")
    if not a_l < a_u:
        raise ValueError("invalid bracket")
    r1, r2, r3 = _row_sums_all(g, x_ref, a_l, a_u, eps)
    return RowSums(float(r1[row]), float(r2[row]), float(r3[row]))


def row_root(rs: RowSums, mu: float, a_l: float, a_u: float) -> Optional[float]:
    """Largest a in [a_l, a_u) at which the row's disc bound reaches zero.

    Solves r1~ a^2 + (r2 - 1/(2 mu)) a + r3~ = 0; the quadratic degenerates
    to a linear equation when the row has no quadratic-branch edges.  Returns
    None when no root lies in the bracket (the row never constrains there).
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    r1, r2, r3 = rs
    b = r2 - 1.0 / (2.0 * mu)
    if r1 == 0.0:
        if abs(b) < 1e-12:
            return None
        a = -r3 / b
        return a if a_l <= a < a_u else None
    disc = b * b - 4.0 * r1 * r3  # r1 >= 0 and r3 <= 0, so disc >= b^2
    sq = math.sqrt(disc)
    for cand in ((-b + sq) / (2.0 * r1), (-b - sq) / (2.0 * r1)):
        if a_l <= cand < a_u:
            return cand
    return None


def _row_roots_all(r1, r2, r3, mu, a_l, a_u):
    """Vectorized row roots; NaN marks unconstraining rows."""
    b = r2 - 1.0 / (2.0 * mu)
    out = np.full(r1.size, np.nan)
    lin = r1 == 0.0
    lin_ok = lin & (np.abs(b) >= 1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        a_lin = -r3 / b
        disc = b * b - 4.0 * r1 * r3
        sq = np.sqrt(disc)
        hi = (-b + sq) / (2.0 * r1)
        lo = (-b - sq) / (2.0 * r1)
    out[lin_ok] = a_lin[lin_ok]
    quad = ~lin
    hi_ok = quad & (hi >= a_l) & (hi < a_u)
    lo_ok = quad & ~hi_ok & (lo >= a_l) & (lo < a_u)
    out[hi_ok] = hi[hi_ok]
    out[lo_ok] = lo[lo_ok]
    in_range = np.isnan(out) | ((out >= a_l) & (out < a_u))
    out[~in_range] = np.nan
    return out


@dataclass(frozen=True)
class CertResult:
    """Certified MC parameter with its bracket and Gershgorin bound.

    ``capped`` marks a_star pinned at the configured cap; ``infeasible``
    marks the fallback to a_floor when no threshold admitted a certificate
    (the MC term is then effectively disabled).
    """

    a_star: float
    a_l: float
    a_u: float
    bound_at_a_star: float
    capped: bool
    infeasible: bool = False


def certify(g: Graph, x_ref, mu: float, cfg) -> CertResult:
    """Largest MC parameter whose penalty matrix B is certified PSD.

    Per-row disc bounds cross zero at the roots of a quadratic in ``a``;
    the certificate is the minimum root over rows, falling back to the top
    of the bracket when no row constrains.  The returned value satisfies
    feasible(a_star * (1 - cfg.delta)) except in the flagged infeasible case.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    x_ref = as_signal(x_ref, g.num_nodes)
    s = threshold_list(g, x_ref, cfg.eps)
    br = binary_search_bracket(s, g, x_ref, mu, cfg.eps, cfg.a_floor, cfg.a_max)
    a_star = None
    capped = False
    if br.a_l < br.a_u:
        # The row analysis is valid on any switch-free bracket, including the
        # all-quadratic (a_floor, min(s)) one returned when no threshold is
        # feasible: branch membership is constant on the open interval either
        # way, so the per-row disc bound is an exact quadratic in a there.
        r1, r2, r3 = _row_sums_all(g, x_ref, br.a_l, br.a_u, cfg.eps)
        roots = _row_roots_all(r1, r2, r3, mu, br.a_l, br.a_u)
        finite = roots[np.isfinite(roots)]
        if finite.size:
            a_star = float(np.min(finite))
        elif br.feasible_at_min and br.a_u >= cfg.a_max:
            a_star = cfg.a_max
            capped = True
        elif br.feasible_at_min:
            # No row root despite an infeasible a_u: only reachable through
            # floating-point ties at the bracket edge.  Back off below a_u.
            a_star = br.a_u * (1.0 - cfg.delta)
    infeasible = a_star is None
    if infeasible:
        a_star = cfg.a_floor
    elif not feasible(a_star * (1.0 - cfg.delta), g, x_ref, mu, cfg.eps):
        a_star = cfg.a_floor
        capped = False
        infeasible = True
    bound = gct_lower_bound(penalty_matrix(g, x_ref, a_star, mu, cfg.eps))
    return CertResult(a_star, br.a_l, br.a_u, bound, capped, infeasible)

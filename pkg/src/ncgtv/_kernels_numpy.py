"""Pure-numpy reference kernels.

Every function here has a numba twin in ``_kernels_numba`` with an identical
signature; ``_backend`` picks one set at import time.  Reductions run in edge
order in both implementations so results are deterministic per backend.
"""

import numpy as np


def spmv_sym(diag, ui, uj, uv, x):
    """y = A x for A stored as diagonal + strict upper triangle (ui < uj)."""
    y = diag * x
    if ui.size:
        y += np.bincount(ui, weights=uv * x[uj], minlength=x.size)
        y += np.bincount(uj, weights=uv * x[ui], minlength=x.size)
    return y


def scatter_add_signed(n, si, ei, vals):
    """out[si] += vals and out[ei] -= vals, accumulated in input order."""
    out = np.zeros(n)
    if si.size:
        out += np.bincount(si, weights=vals, minlength=n)
        out -= np.bincount(ei, weights=vals, minlength=n)
    return out


def penalty_weights(w, diffs, a, eps):
    """Signal-dependent edge weights of the penalty graph.

    Quadratic branch (|diff| <= 1/a): wp = (a/2) w.
    L1 branch: wp = w / max(|diff|, eps) - w / (2 a max(diff^2, eps)).
    Returns (wp, branch) with branch 0 for quadratic, 1 for l1.
    """
    ad = np.abs(diffs)
    quad = ad <= 1.0 / a
    wp_quad = 0.5 * a * w
    wp_l1 = w / np.maximum(ad, eps) - w / (2.0 * a * np.maximum(diffs * diffs, eps))
    wp = np.where(quad, wp_quad, wp_l1)
    branch = np.where(quad, 0, 1).astype(np.uint8)
    return wp, branch


def cg_solve(diag, ui, uj, uv, b, x0, rel_tol, max_iter):
    """Jacobi-preconditioned conjugate gradients on an SPD matrix.

    Stops when the recurrence residual satisfies ||r|| <= rel_tol * ||b||.
    Returns (x, iterations).
    """
    n = diag.size
    x = x0.copy()
    b_norm = np.sqrt(b @ b)
    if b_norm == 0.0:
        return np.zeros(n), 0
    inv_diag = 1.0 / diag
    r = b - spmv_sym(diag, ui, uj, uv, x)
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    tol_abs = rel_tol * b_norm
    k = 0
    while k < max_iter:
        if np.sqrt(r @ r) <= tol_abs:
            break
        ap = spmv_sym(diag, ui, uj, uv, p)
        alpha = rz / (p @ ap)
        x += alpha * p
        r -= alpha * ap
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
        k += 1
    return x, k


def jacobi_min_eig(a, max_sweeps):
    """Smallest eigenvalue of a dense symmetric matrix by cyclic Jacobi.

    ``a`` is destroyed.  Sweeps until the off-diagonal Frobenius norm drops
    below 1e-13 of the matrix norm.
    """
    n = a.shape[0]
    if n == 1:
        return a[0, 0]
    fro = np.sqrt(np.sum(a * a))
    if fro == 0.0:
        return 0.0
    stop = 1e-13 * fro
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= stop:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:  # theta^2 would overflow; t -> 1/(2 theta)
                    t = 1.0 / (2.0 * theta)
                else:
                    sgn = 1.0 if theta >= 0.0 else -1.0
                    t = sgn / (abs(theta) + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
    return float(np.min(np.diag(a)))

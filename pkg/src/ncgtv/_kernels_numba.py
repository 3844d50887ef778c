"""Numba-jitted kernels, signature-compatible with ``_kernels_numpy``."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def spmv_sym(diag, ui, uj, uv, x):
    n = diag.size
    y = np.empty(n)
    for i in range(n):
        y[i] = diag[i] * x[i]
    for m in range(ui.size):
        i = ui[m]
        j = uj[m]
        v = uv[m]
        y[i] += v * x[j]
        y[j] += v * x[i]
    return y


@njit(cache=True, nogil=True)
def scatter_add_signed(n, si, ei, vals):
    out = np.zeros(n)
    for m in range(si.size):
        out[si[m]] += vals[m]
        out[ei[m]] -= vals[m]
    return out


@njit(cache=True, nogil=True)
def penalty_weights(w, diffs, a, eps):
    m = w.size
    wp = np.empty(m)
    branch = np.empty(m, dtype=np.uint8)
    inv_a = 1.0 / a
    for k in range(m):
        d = diffs[k]
        ad = abs(d)
        if ad <= inv_a:
            wp[k] = 0.5 * a * w[k]
            branch[k] = 0
        else:
            d1 = ad if ad > eps else eps
            d2 = d * d if d * d > eps else eps
            wp[k] = w[k] / d1 - w[k] / (2.0 * a * d2)
            branch[k] = 1
    return wp, branch


@njit(cache=True, nogil=True)
def cg_solve(diag, ui, uj, uv, b, x0, rel_tol, max_iter):
    n = diag.size
    b_norm = np.sqrt(b @ b)
    if b_norm == 0.0:
        return np.zeros(n), 0
    x = x0.copy()
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
        for i in range(n):
            x[i] += alpha * p[i]
            r[i] -= alpha * ap[i]
            z[i] = inv_diag[i] * r[i]
        rz_new = r @ z
        beta = rz_new / rz
        for i in range(n):
            p[i] = z[i] + beta * p[i]
        rz = rz_new
        k += 1
    return x, k


@njit(cache=True, nogil=True)
def jacobi_min_eig(a, max_sweeps):
    n = a.shape[0]
    if n == 1:
        return a[0, 0]
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += a[i, j] * a[i, j]
    fro = np.sqrt(fro)
    if fro == 0.0:
        return 0.0
    stop = 1e-13 * fro
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += a[i, j] * a[i, j]
        if np.sqrt(off) <= stop:
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
                for k in range(n):
                    if k != p and k != q:
                        akp = a[k, p]
                        akq = a[k, q]
                        a[k, p] = c * akp - s * akq
                        a[k, q] = s * akp + c * akq
                        a[p, k] = a[k, p]
                        a[q, k] = a[k, q]
                app = a[p, p]
                aqq = a[q, q]
                a[p, p] = c * c * app - 2.0 * s * c * apq + s * s * aqq
                a[q, q] = s * s * app + 2.0 * s * c * apq + c * c * aqq
                a[p, q] = 0.0
                a[q, p] = 0.0
    mn = a[0, 0]
    for i in range(1, n):
        if a[i, i] < mn:
            mn = a[i, i]
    return mn

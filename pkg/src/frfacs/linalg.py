"""Cyclic Jacobi eigensolver for real symmetric matrices."""

import numpy as np
from numba import njit

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


@njit(cache=True)
def _offdiag_norm(a):
    n = a.shape[0]
    s = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                s += a[i, j] * a[i, j]
    return np.sqrt(s)


@njit(cache=True)
def _jacobi_sweeps(a, v, tol, max_sweeps):
    n = a.shape[0]
    scale = np.sqrt(np.sum(a * a))
    if scale == 0.0:
        return 0
    for sweep in range(max_sweeps):
        if _offdiag_norm(a) <= tol * scale:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                a[p, p] -= t * apq
                a[q, q] += t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for r in range(n):
                    if r != p and r != q:
                        g = a[r, p]
                        h = a[r, q]
                        a[r, p] = g - s * (h + g * tau)
                        a[p, r] = a[r, p]
                        a[r, q] = h + s * (g - h * tau)
                        a[q, r] = a[r, q]
                for r in range(n):
                    g = v[r, p]
                    h = v[r, q]
                    v[r, p] = g - s * (h + g * tau)
                    v[r, q] = h + s * (g - h * tau)
    return max_sweeps


def jacobi_eigh(a, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Iterates row-cyclic sweeps until the off-diagonal Frobenius norm drops
    below ``tol`` times the Frobenius norm of ``a``.

    Returns
    -------
    eigenvalues : ndarray, sorted in non-increasing order
    eigenvectors : ndarray, columns are the matching unit eigenvectors
    """
    a = np.array(a, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    a = 0.5 * (a + a.T)
    v = np.eye(a.shape[0])
    _jacobi_sweeps(a, v, tol, max_sweeps)
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]

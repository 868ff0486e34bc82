"""Jacobi eigensolver for small dense symmetric matrices.

Two implementations share one contract: ``symmetric_eigh(C)`` returns all
eigenvalues in non-increasing order with orthonormal eigenvectors as columns.

* numba: classic cyclic Jacobi, one rotation at a time.
* numpy: parallel-ordering Jacobi. A round-robin schedule splits the n(n-1)/2
  pivot pairs into n-1 rounds of disjoint pairs; disjoint rotations commute,
  so a whole round is applied with a handful of vectorized column/row updates.

Both stop when the off-diagonal Frobenius mass drops below ``rel_tol``
times the Frobenius norm of the input.
"""

from __future__ import annotations

import numpy as np

from . import _accel
from ._accel import njit

OFFDIAG_TOL = 1e-12
MAX_SWEEPS = 100


@njit
def _jacobi_nb(A, rel_tol, max_sweeps):
    n = A.shape[0]
    A = A.copy()
    V = np.eye(n)
    norm = np.sqrt(np.sum(A * A))
    target = rel_tol * norm
    sweeps = 0
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += 2.0 * A[p, q] * A[p, q]
        if np.sqrt(off) <= target:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                sgn = 1.0 if theta >= 0.0 else -1.0
                t = sgn / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
    w = np.empty(n)
    for i in range(n):
        w[i] = A[i, i]
    return w, V, sweeps


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint pair schedule covering every (p, q) once per sweep."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        P, Q = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                P.append(min(a, b))
                Q.append(max(a, b))
        rounds.append((np.array(P, dtype=np.intp), np.array(Q, dtype=np.intp)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _jacobi_np(A, rel_tol, max_sweeps):
    n = A.shape[0]
    A = np.array(A, dtype=np.float64, copy=True)
    V = np.eye(n)
    target = rel_tol * np.linalg.norm(A)
    schedule = _round_robin(n)
    sweeps = 0
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= target:
            break
        sweeps += 1
        for P, Q in schedule:
            if P.size == 0:
                continue
            apq = A[P, Q]
            active = apq != 0.0
            if not active.any():
                continue
            safe = np.where(active, apq, 1.0)
            theta = (A[Q, Q] - A[P, P]) / (2.0 * safe)
            t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            c = np.where(active, 1.0 / np.sqrt(t * t + 1.0), 1.0)
            s = np.where(active, t * c, 0.0)
            Ap, Aq = A[:, P].copy(), A[:, Q]
            A[:, P] = c * Ap - s * Aq
            A[:, Q] = s * Ap + c * Aq
            Ap, Aq = A[P, :].copy(), A[Q, :]
            A[P, :] = c[:, None] * Ap - s[:, None] * Aq
            A[Q, :] = s[:, None] * Ap + c[:, None] * Aq
            A[P[active], Q[active]] = 0.0
            A[Q[active], P[active]] = 0.0
            Vp, Vq = V[:, P].copy(), V[:, Q]
            V[:, P] = c * Vp - s * Vq
            V[:, Q] = s * Vp + c * Vq
    return np.diag(A).copy(), V, sweeps


def symmetric_eigh(C, rel_tol: float = OFFDIAG_TOL, max_sweeps: int = MAX_SWEEPS):
    """Full eigendecomposition of a symmetric matrix, eigenvalues descending."""
    C = np.ascontiguousarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {C.shape}")
    if C.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))
    if _accel.use_numba():
        w, V, _ = _jacobi_nb(C, rel_tol, max_sweeps)
    else:
        w, V, _ = _jacobi_np(C, rel_tol, max_sweeps)
    order = np.argsort(-w, kind="stable")
    return w[order], np.ascontiguousarray(V[:, order])

"""Exact k-DPP sampling for low-rank linear kernels.

A k-DPP draw runs in two phases on the spectral decomposition of L:

1. choose k eigenvectors, subset T with probability prod(lambda_T) / e_k(lambda);
2. sample the projection DPP spanned by the chosen eigenvectors, one item
   at a time, contracting the basis after each pick.

Each phase has a numba kernel and a numpy fallback (see ``_accel``). They
draw their uniforms up front from a numpy ``Generator`` (r for phase 1, k for
phase 2), so both backends yield identical samples for a given seed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _accel
from ._accel import njit
from .errors import ConfigError, EnumerationLimitError, NumericalDegeneracyError, RankError
from .kernel import RANK_TOL, EigenDecomposition, KernelFactor, dual_eigensystem

PROJECTION_TOL = 1e-10
ENUMERATION_LIMIT = 20

_OK = 0
_DEGENERATE = 1


@dataclass(frozen=True)
class SampleConfig:
    k: int = 60
    seed: int | None = None
    tol: float = RANK_TOL

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")


# ---------------------------------------------------------------------------
# elementary symmetric polynomials


@dataclass(frozen=True, eq=False)
class ElemSymTable:
    """``e[n, j]`` of the first n eigenvalues, stored for ``lambda / scale``.

    The true value is ``table[n, j] * scale**j``; ratios used by the sampler
    are scale free, so the unscaled numbers are never needed there.
    """

    table: np.ndarray  # (r + 1, k + 1)
    scaled_lambdas: np.ndarray
    scale: float

    @property
    def r(self) -> int:
        return self.table.shape[0] - 1

    @property
    def k(self) -> int:
        return self.table.shape[1] - 1

    def value(self, n: int, j: int) -> float:
        return float(self.table[n, j] * self.scale**j)

    def log_value(self, n: int, j: int) -> float:
        v = self.table[n, j]
        if v <= 0.0:
            return -math.inf
        return math.log(v) + j * math.log(self.scale)


@njit
def _esym_nb(lam, k):
    r = lam.shape[0]
    E = np.zeros((r + 1, k + 1))
    for n in range(r + 1):
        E[n, 0] = 1.0
    for n in range(1, r + 1):
        ln = lam[n - 1]
        for j in range(1, k + 1):
            E[n, j] = E[n - 1, j] + ln * E[n - 1, j - 1]
    return E


def _esym_np(lam, k):
    r = lam.shape[0]
    E = np.zeros((r + 1, k + 1))
    E[:, 0] = 1.0
    for n in range(1, r + 1):
        E[n, 1:] = E[n - 1, 1:] + lam[n - 1] * E[n - 1, :-1]
    return E


def elementary_symmetric(lam, k: int) -> ElemSymTable:
    lam = np.asarray(lam, dtype=np.float64)
    if k < 0:
        raise ValueError("degree k must be >= 0")
    if lam.ndim != 1:
        raise ValueError("eigenvalues must be a 1-D sequence")
    if np.any(lam < 0.0):
        raise ValueError("elementary_symmetric needs non-negative eigenvalues")
    scale = float(lam.mean()) if lam.size and lam.mean() > 0.0 else 1.0
    scaled = np.ascontiguousarray(lam / scale)
    E = _esym_nb(scaled, k) if _accel.use_numba() else _esym_np(scaled, k)
    return ElemSymTable(table=E, scaled_lambdas=scaled, scale=scale)


# ---------------------------------------------------------------------------
# phase 1: eigenvector subset


@njit
def _phase1_nb(lam, E, k, u):
    r = lam.shape[0]
    out = np.empty(k, dtype=np.int64)
    j = k
    pos = 0
    for n in range(r, 0, -1):
        if j == 0:
            break
        if n == j:
            take = True
        else:
            denom = E[n, j]
            take = denom > 0.0 and u[r - n] * denom < lam[n - 1] * E[n - 1, j - 1]
        if take:
            out[pos] = n - 1
            pos += 1
            j -= 1
    return out[::-1].copy()


def _phase1_np(lam, E, k, u):
    r = lam.shape[0]
    out = []
    j = k
    for n in range(r, 0, -1):
        if j == 0:
            break
        if n == j:
            take = True
        else:
            denom = E[n, j]
            take = denom > 0.0 and u[r - n] * denom < lam[n - 1] * E[n - 1, j - 1]
        if take:
            out.append(n - 1)
            j -= 1
    return np.array(out[::-1], dtype=np.int64)


def _retained(lam, tol):
    lam = np.asarray(lam, dtype=np.float64)
    if lam.size == 0:
        return np.zeros(0, dtype=np.intp)
    return np.flatnonzero(lam > tol * lam.max())


def sample_eigen_subset(lam, k: int, rng: np.random.Generator, tol: float = RANK_TOL) -> np.ndarray:
    """Draw k eigen-indices with probability proportional to their product.

    Eigenvalues at or below ``tol * max(lambda)`` are ignored. Returned
    indices refer to positions in ``lam`` and are sorted ascending.
    """
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(lam < 0.0):
        raise ValueError("eigenvalues must be non-negative")
    keep = _retained(lam, tol)
    if k > keep.size:
        raise RankError(f"k={k} exceeds the kernel rank {keep.size}")
    table = elementary_symmetric(lam[keep], k)
    u = rng.random(keep.size)
    return keep[_phase1(table, k, u)]


def _phase1(table: ElemSymTable, k, u):
    if _accel.use_numba():
        return _phase1_nb(table.scaled_lambdas, table.table, k, u)
    return _phase1_np(table.scaled_lambdas, table.table, k, u)


# ---------------------------------------------------------------------------
# phase 2: projection DPP
#
# W holds the basis as rows (k x N) so that basis vectors are contiguous.


@njit
def _phase2_nb(W, u, tol):
    k, N = W.shape
    W = W.copy()
    out = np.empty(k, dtype=np.int64)
    norms = np.empty(N)
    ncols = k
    for t in range(k):
        total = 0.0
        for i in range(N):
            s = 0.0
            for c in range(ncols):
                s += W[c, i] * W[c, i]
            norms[i] = s
            total += s
        target = u[t] * total
        acc = 0.0
        pick = -1
        for i in range(N):
            if norms[i] > 0.0:
                acc += norms[i]
                pick = i
                if acc > target:
                    break
        if pick < 0:
            return out, _DEGENERATE
        out[t] = pick
        if ncols == 1:
            break
        p = 0
        best = abs(W[0, pick])
        for c in range(1, ncols):
            if abs(W[c, pick]) > best:
                best = abs(W[c, pick])
                p = c
        if best < tol:
            return out, _DEGENERATE
        last = ncols - 1
        if p != last:
            for i in range(N):
                tmp = W[p, i]
                W[p, i] = W[last, i]
                W[last, i] = tmp
        piv = W[last, pick]
        for c in range(last):
            f = W[c, pick] / piv
            if f != 0.0:
                for i in range(N):
                    W[c, i] -= f * W[last, i]
            W[c, pick] = 0.0
        ncols = last
        for c in range(ncols):
            for c2 in range(c):
                dot = 0.0
                for i in range(N):
                    dot += W[c, i] * W[c2, i]
                for i in range(N):
                    W[c, i] -= dot * W[c2, i]
            nrm = 0.0
            for i in range(N):
                nrm += W[c, i] * W[c, i]
            nrm = np.sqrt(nrm)
            if nrm < tol:
                return out, _DEGENERATE
            for i in range(N):
                W[c, i] /= nrm
    return out, _OK


def _phase2_np(W, u, tol):
    k, N = W.shape
    W = np.array(W, dtype=np.float64, copy=True)
    out = np.empty(k, dtype=np.int64)
    for t in range(k):
        ncols = k - t
        norms = np.einsum("ci,ci->i", W[:ncols], W[:ncols])
        cums = np.cumsum(norms)
        target = u[t] * cums[-1]
        pick = int(np.searchsorted(cums, target, side="right"))
        pick = min(pick, N - 1)
        while norms[pick] <= 0.0 and pick > 0:
            pick -= 1
        if norms[pick] <= 0.0:
            return out, _DEGENERATE
        out[t] = pick
        if ncols == 1:
            break
        col = np.abs(W[:ncols, pick])
        p = int(np.argmax(col))
        if col[p] < tol:
            return out, _DEGENERATE
        last = ncols - 1
        if p != last:
            W[[p, last]] = W[[last, p]]
        f = W[:last, pick] / W[last, pick]
        W[:last] -= f[:, None] * W[last]
        W[:last, pick] = 0.0
        for c in range(last):
            for c2 in range(c):
                W[c] -= (W[c] @ W[c2]) * W[c2]
            nrm = np.sqrt(W[c] @ W[c])
            if nrm < tol:
                return out, _DEGENERATE
            W[c] /= nrm
    return out, _OK


def _phase2(W, u, tol):
    if _accel.use_numba():
        idx, status = _phase2_nb(W, u, tol)
    else:
        idx, status = _phase2_np(W, u, tol)
    if status != _OK:
        raise NumericalDegeneracyError(
            "projection basis collapsed below tolerance during contraction"
        )
    return np.sort(idx)


def sample_projection_dpp(U, rng: np.random.Generator, tol: float = PROJECTION_TOL) -> np.ndarray:
    """Sample the projection DPP with kernel ``U U^T``; returns sorted indices."""
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2:
        raise ValueError("U must be 2-D")
    k = U.shape[1]
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    if k > U.shape[0]:
        raise RankError(f"{k} basis columns for {U.shape[0]} items")
    if np.abs(U.T @ U - np.eye(k)).max() > 1e-8:
        raise ValueError("U must have orthonormal columns")
    u = rng.random(k)
    return _phase2(np.ascontiguousarray(U.T), u, tol)


# ---------------------------------------------------------------------------
# full k-DPP


class KDPPSampler:
    """Reusable k-DPP sampler over a fixed kernel factor.

    The eigendecomposition and the elementary symmetric table are computed
    once; each ``sample`` call only runs the two random phases.
    """

    def __init__(self, factor: KernelFactor, k: int, tol: float = RANK_TOL):
        if k < 1:
            raise ConfigError(f"k must be >= 1, got {k}")
        self.factor = factor
        self.k = k
        self.tol = tol
        self.eig: EigenDecomposition
        self.eig, U = dual_eigensystem(factor, tol)
        if k > self.eig.rank:
            raise RankError(f"k={k} exceeds the kernel rank {self.eig.rank}")
        self.Wt = np.ascontiguousarray(U.T)  # (r, N)
        self.table = elementary_symmetric(self.eig.eigenvalues, k)

    @property
    def rank(self) -> int:
        return self.eig.rank

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        u1 = rng.random(self.rank)
        chosen = _phase1(self.table, self.k, u1)
        u2 = rng.random(self.k)
        return _phase2(np.ascontiguousarray(self.Wt[chosen]), u2, PROJECTION_TOL)

    def sample_many(self, draws: int, rng: np.random.Generator) -> np.ndarray:
        """``draws`` independent samples as a (draws, k) array of sorted rows."""
        u = rng.random((draws, self.rank + self.k))
        if _accel.use_numba():
            out, status = _sample_many_nb(self.table.scaled_lambdas, self.table.table, self.Wt,
                                          self.k, u, PROJECTION_TOL)
            if status != _OK:
                raise NumericalDegeneracyError("projection basis collapsed below tolerance")
            return out
        out = np.empty((draws, self.k), dtype=np.int64)
        for t in range(draws):
            chosen = _phase1_np(self.table.scaled_lambdas, self.table.table, self.k, u[t, : self.rank])
            out[t] = _phase2(np.ascontiguousarray(self.Wt[chosen]), u[t, self.rank:], PROJECTION_TOL)
        return out


@njit
def _sample_many_nb(lam, E, Wt, k, u, tol):
    draws = u.shape[0]
    r = lam.shape[0]
    out = np.empty((draws, k), dtype=np.int64)
    for t in range(draws):
        chosen = _phase1_nb(lam, E, k, u[t, :r])
        W = np.empty((k, Wt.shape[1]))
        for c in range(k):
            W[c] = Wt[chosen[c]]
        idx, status = _phase2_nb(W, u[t, r:], tol)
        if status != _OK:
            return out, status
        out[t] = np.sort(idx)
    return out, _OK


def sample_k_dpp(factor: KernelFactor, config: SampleConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """One exact k-DPP sample of row indices into ``factor.B`` (sorted).

    ``rng`` defaults to a generator seeded with ``config.seed``.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    return KDPPSampler(factor, config.k, config.tol).sample(rng)


# ---------------------------------------------------------------------------
# greedy MAP baseline


@njit
def _greedy_nb(B, k, tol):
    N, d = B.shape
    d2 = np.empty(N)
    top = 0.0
    for i in range(N):
        s = 0.0
        for c in range(d):
            s += B[i, c] * B[i, c]
        d2[i] = s
        if s > top:
            top = s
    thresh = tol * top
    Q = np.zeros((k, d))
    out = np.empty(k, dtype=np.int64)
    chosen = np.zeros(N, dtype=np.bool_)
    for t in range(k):
        j = -1
        best = -1.0
        for i in range(N):
            if not chosen[i] and d2[i] > best:
                best = d2[i]
                j = i
        if j < 0 or best <= thresh or top == 0.0:
            return out, t
        out[t] = j
        chosen[j] = True
        v = B[j].copy()
        for _ in range(2):
            for s in range(t):
                dot = 0.0
                for c in range(d):
                    dot += v[c] * Q[s, c]
                for c in range(d):
                    v[c] -= dot * Q[s, c]
        nrm = 0.0
        for c in range(d):
            nrm += v[c] * v[c]
        nrm = np.sqrt(nrm)
        for c in range(d):
            Q[t, c] = v[c] / nrm
        for i in range(N):
            if not chosen[i]:
                proj = 0.0
                for c in range(d):
                    proj += B[i, c] * Q[t, c]
                d2[i] -= proj * proj
    return out, k


def _greedy_np(B, k, tol):
    N, d = B.shape
    d2 = np.einsum("ij,ij->i", B, B)
    top = d2.max() if N else 0.0
    thresh = tol * top
    Q = np.zeros((k, d))
    out = np.empty(k, dtype=np.int64)
    for t in range(k):
        j = int(np.argmax(d2))
        if top == 0.0 or d2[j] <= thresh:
            return out, t
        out[t] = j
        v = B[j].copy()
        for _ in range(2):
            v -= Q[:t].T @ (Q[:t] @ v)
        Q[t] = v / np.linalg.norm(v)
        d2 -= (B @ Q[t]) ** 2
        d2[out[: t + 1]] = -np.inf
    return out, k


def greedy_map_select(factor: KernelFactor, k: int, tol: float = RANK_TOL) -> np.ndarray:
    """Deterministic greedy max-determinant selection, in selection order.

    Step t adds the row with the largest squared residual against the span of
    the rows already chosen (the marginal gain in log det L(S, S)). Ties go to
    the smallest index.
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    B = np.ascontiguousarray(factor.B, dtype=np.float64)
    if k > B.shape[0]:
        raise RankError(f"k={k} exceeds the number of items {B.shape[0]}")
    out, got = _greedy_nb(B, k, tol) if _accel.use_numba() else _greedy_np(B, k, tol)
    if got < k:
        raise RankError(f"kernel rank exhausted after {got} of k={k} greedy picks")
    return out


# ---------------------------------------------------------------------------
# brute-force oracle


def brute_force_k_dpp(L, k: int) -> dict[tuple[int, ...], float]:
    """Exact k-DPP law by enumerating every size-k subset (N <= 20)."""
    L = np.asarray(L, dtype=np.float64)
    N = L.shape[0]
    if N > ENUMERATION_LIMIT:
        raise EnumerationLimitError(f"N={N} exceeds the enumeration limit {ENUMERATION_LIMIT}")
    if not 0 <= k <= N:
        raise ValueError(f"k={k} must lie in [0, {N}]")
    dets = {}
    for S in itertools.combinations(range(N), k):
        idx = np.array(S, dtype=np.intp)
        dets[S] = max(float(np.linalg.det(L[np.ix_(idx, idx)])), 0.0) if k else 1.0
    Z = math.fsum(dets.values())
    # Hadamard: every det(L_S) <= prod(L_ii), so e_k(diag L) bounds Z from above
    ceiling = elementary_symmetric(np.clip(np.diag(L), 0.0, None), k).value(N, k)
    if Z <= RANK_TOL * ceiling:
        raise RankError(f"normalizer is zero: kernel rank is below k={k}")
    return {S: v / Z for S, v in dets.items()}

"""Quality scores, the low-rank kernel factor and its dual eigensystem.

The kernel is ``L = B B^T`` with rows ``b_i = q_i * phi_i``. Nothing of size
N x N is ever built; spectral work happens on the d x d dual ``C = B^T B``,
whose nonzero eigenvalues coincide with those of L.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .catalog import Item, UserProfile
from .embedding import cosine_to_many
from .errors import DimensionError, NotPSDError, RankError
from .linalg import symmetric_eigh

VARIANTS = ("A", "B", "C")
QUALITY_FLOOR = 1e-6
RANK_TOL = 1e-10
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class QualityScores:
    q: np.ndarray
    variant: str

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if np.any(self.q < 0.0) or np.any(self.q > 1.0):
            raise ValueError("quality scores must lie in [0, 1]")

    def __len__(self) -> int:
        return self.q.shape[0]


@dataclass(frozen=True, eq=False)
class KernelFactor:
    B: np.ndarray  # (N, d)
    item_ids: np.ndarray  # (N,)

    @property
    def N(self) -> int:
        return self.B.shape[0]

    @property
    def d(self) -> int:
        return self.B.shape[1]

    def gram(self, rows=None) -> np.ndarray:
        """Materialize L, or L restricted to ``rows``. Meant for tests and oracles."""
        Bs = self.B if rows is None else self.B[np.asarray(rows, dtype=np.intp)]
        return Bs @ Bs.T


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    eigenvalues: np.ndarray  # (r,), non-increasing
    eigenvectors: np.ndarray  # (d, r)

    @property
    def rank(self) -> int:
        return self.eigenvalues.shape[0]


def compute_quality_scores(variant: str, user: UserProfile, items: Sequence[Item]) -> QualityScores:
    """Per-item quality for one user.

    B maps the two-tower cosine affinely onto [0, 1] with a floor of
    ``QUALITY_FLOOR``; A and C use the constant 1.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    n = len(items)
    if variant != "B" or n == 0:
        return QualityScores(np.ones(n), variant)
    M = np.stack([it.retrieval_embedding for it in items])
    s = cosine_to_many(user.retrieval_embedding, M)
    return quality_from_cosine(s)


def quality_from_cosine(s) -> QualityScores:
    q = np.clip((np.asarray(s, dtype=np.float64) + 1.0) / 2.0, QUALITY_FLOOR, 1.0)
    return QualityScores(q, "B")


def build_kernel_factor(q: QualityScores | np.ndarray, phi, item_ids=None) -> KernelFactor:
    qv = q.q if isinstance(q, QualityScores) else np.asarray(q, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim != 2:
        raise DimensionError(f"phi must be 2-D, got shape {phi.shape}")
    if qv.shape[0] != phi.shape[0]:
        raise DimensionError(f"{qv.shape[0]} quality scores for {phi.shape[0]} embedding rows")
    ids = np.arange(phi.shape[0]) if item_ids is None else np.asarray(item_ids, dtype=np.int64)
    if ids.shape[0] != phi.shape[0]:
        raise DimensionError("item_ids length does not match phi rows")
    return KernelFactor(B=qv[:, None] * phi, item_ids=ids)


def eig_sym(C, tol: float = RANK_TOL) -> EigenDecomposition:
    """Eigenpairs of a PSD matrix, keeping those above ``tol * lambda_max``.

    Eigenvalues in ``[-tol * lambda_max, 0)`` are rounding noise and are
    clipped; anything more negative means the input is not PSD.
    """
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {C.shape}")
    norm = np.linalg.norm(C)
    if np.linalg.norm(C - C.T) > SYMMETRY_TOL * max(norm, np.finfo(float).tiny):
        raise ValueError("matrix is not symmetric")
    w, V = symmetric_eigh(0.5 * (C + C.T))
    scale = max(abs(w[0]), abs(w[-1])) if w.size else 0.0
    if w.size and w[-1] < -tol * scale:
        raise NotPSDError(f"matrix has a materially negative eigenvalue {w[-1]:.3e}")
    keep = w > tol * scale
    return EigenDecomposition(eigenvalues=w[keep].copy(), eigenvectors=np.ascontiguousarray(V[:, keep]))


def dual_eigensystem(factor: KernelFactor, tol: float = RANK_TOL) -> tuple[EigenDecomposition, np.ndarray]:
    """Eigendecompose ``B^T B`` and lift to orthonormal eigenvectors of L.

    Returns the dual decomposition and the N x r matrix whose columns are
    ``B v_j / sqrt(lambda_j)``.
    """
    B = factor.B
    eig = eig_sym(B.T @ B, tol)
    if eig.rank == 0:
        raise RankError("kernel is numerically zero: no eigenvalue above tolerance")
    U = (B @ eig.eigenvectors) / np.sqrt(eig.eigenvalues)
    return eig, U

"""PCA reduction of semantic embeddings and cosine similarity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, UndefinedSimilarityError


@dataclass(frozen=True, eq=False)
class ReductionModel:
    mean: np.ndarray  # (D,)
    projection: np.ndarray  # (D, d), orthonormal columns
    explained_variance: np.ndarray  # (d,), non-increasing

    @property
    def D(self) -> int:
        return self.projection.shape[0]

    @property
    def d(self) -> int:
        return self.projection.shape[1]


def _as_matrix(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D embedding matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("embedding matrix contains non-finite values")
    return arr


def fit_reduction(data, d: int) -> ReductionModel:
    """Fit a d-component PCA on the rows of ``data``.

    Variances use the 1/N (population) normalization, so each explained
    variance equals the variance of the projected fitting data along that
    component.
    """
    X = _as_matrix(data)
    N, D = X.shape
    if not 1 <= d <= D:
        raise DimensionError(f"target dimension d={d} must lie in [1, {D}]")
    if N < 2:
        raise ValueError("fit_reduction needs at least two rows")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = (Xc.T @ Xc) / N
    cov = 0.5 * (cov + cov.T)
    w, V = np.linalg.eigh(cov)
    order = np.argsort(-w, kind="stable")[:d]
    w = np.clip(w[order], 0.0, None)
    V = V[:, order]
    # sign convention: largest-magnitude loading of each component is positive
    flip = np.sign(V[np.argmax(np.abs(V), axis=0), np.arange(d)])
    V = V * np.where(flip == 0, 1.0, flip)
    mean.flags.writeable = False
    V.flags.writeable = False
    w.flags.writeable = False
    return ReductionModel(mean=mean, projection=V, explained_variance=w)


def project(model: ReductionModel, data) -> np.ndarray:
    X = np.asarray(data, dtype=np.float64)
    if X.ndim == 2 and X.shape[0] == 0:
        if X.shape[1] not in (0, model.D):
            raise DimensionError(f"expected {model.D} columns, got {X.shape[1]}")
        return np.zeros((0, model.d))
    X = _as_matrix(X)
    if X.shape[1] != model.D:
        raise DimensionError(f"expected {model.D} columns, got {X.shape[1]}")
    return (X - model.mean) @ model.projection


def reconstruct(model: ReductionModel, reduced) -> np.ndarray:
    return np.asarray(reduced, dtype=np.float64) @ model.projection.T + model.mean


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError(f"cosine needs two equal-length vectors, got {a.shape} and {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise UndefinedSimilarityError("cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def cosine_to_many(a, M, row_norms=None) -> np.ndarray:
    """Cosine between one vector and every row of ``M``."""
    a = np.asarray(a, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    na = np.linalg.norm(a)
    if na == 0.0:
        raise UndefinedSimilarityError("cosine similarity is undefined for a zero vector")
    if M.shape[0] == 0:
        return np.zeros(0)
    if M.shape[1] != a.shape[0]:
        raise DimensionError(f"vector of length {a.shape[0]} against rows of length {M.shape[1]}")
    norms = np.linalg.norm(M, axis=1) if row_norms is None else row_norms
    if np.any(norms == 0.0):
        raise UndefinedSimilarityError("cosine similarity is undefined for a zero vector")
    return np.clip((M @ a) / (norms * na), -1.0, 1.0)

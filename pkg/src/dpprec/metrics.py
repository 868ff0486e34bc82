"""Relevance, geometric diversity and business-novelty metrics."""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .catalog import Catalog, InteractionRecord, Item, UserProfile
from .embedding import cosine_to_many
from .errors import DimensionError, RankError
from .kernel import QualityScores
from .linalg import symmetric_eigh

VOLUME_FLOOR = 1e-12
DEGENERATE = -math.inf


class NoveltyRule(NamedTuple):
    attribute: str
    points: float


NOVELTY_RULES = (
    NoveltyRule("category", 2.5),
    NoveltyRule("venue_type", 2.0),
    NoveltyRule("subcategory", 1.0),
    NoveltyRule("venue_id", 0.5),
    NoveltyRule("genre", 0.5),
)
MAX_NOVELTY = sum(rule.points for rule in NOVELTY_RULES)


def _indices(S) -> np.ndarray:
    idx = np.asarray(S, dtype=np.intp).reshape(-1)
    if idx.size == 0:
        raise ValueError("metric needs a non-empty set")
    return idx


def relevance_mean_quality(S, q: QualityScores | np.ndarray) -> float:
    qv = q.q if isinstance(q, QualityScores) else np.asarray(q, dtype=np.float64)
    idx = _indices(S)
    if idx.min() < 0 or idx.max() >= qv.shape[0]:
        raise IndexError("set index outside the quality vector")
    return float(qv[idx].mean())


def mean_user_cosine(S: Sequence[int], user: UserProfile, catalog: Catalog) -> float:
    """Mean two-tower cosine between the user and the items with ids in S."""
    if len(S) == 0:
        raise ValueError("metric needs a non-empty set")
    rows = [catalog.position[i] for i in S]
    return float(cosine_to_many(user.retrieval_embedding, catalog.retrieval_matrix[rows]).mean())


def log_volume(S, phi_full) -> float:
    """Half the log-determinant of the Gram matrix of ``phi_full[S]``.

    Returns ``-inf`` when the Gram matrix has an eigenvalue at or below
    ``VOLUME_FLOOR``.
    """
    phi = np.asarray(phi_full, dtype=np.float64)
    if phi.ndim != 2:
        raise DimensionError(f"phi must be 2-D, got shape {phi.shape}")
    idx = _indices(S)
    X = phi[idx]
    w, _ = symmetric_eigh(X @ X.T)
    if w[-1] <= VOLUME_FLOOR:
        return DEGENERATE
    return 0.5 * float(np.sum(np.log(w)))


class Decomposition(NamedTuple):
    quality_term: float
    diversity_term: float
    total: float


def quality_diversity_decomposition(S, q: QualityScores | np.ndarray, phi) -> Decomposition:
    """Split a set's kernel log-determinant into quality and volume parts.

    ``quality_term = sum(log q_i)``, ``diversity_term = 2 log Vol(S)`` and
    ``total`` is their sum. Note that for ``L_ij = q_i q_j phi_i.phi_j`` the
    exact identity is ``log det L(S, S) = 2 * quality_term + diversity_term``;
    ``total`` matches it only when every q_i equals 1.
    """
    qv = q.q if isinstance(q, QualityScores) else np.asarray(q, dtype=np.float64)
    idx = _indices(S)
    qs = qv[idx]
    if np.any(qs <= 0.0):
        raise ValueError("quality score of zero inside S: log quality is undefined")
    lv = log_volume(idx, phi)
    if lv == DEGENERATE:
        raise RankError("S is rank deficient in phi: volume is zero")
    quality = float(np.sum(np.log(qs)))
    diversity = 2.0 * lv
    return Decomposition(quality, diversity, quality + diversity)


def business_diversity_item(item: Item, history: Sequence[InteractionRecord]) -> float:
    score = 0.0
    for rule in NOVELTY_RULES:
        value = getattr(item, rule.attribute)
        if not value:
            # a missing attribute is never novel
            continue
        if all(getattr(rec, rule.attribute) != value for rec in history):
            score += rule.points
    return score


def business_diversity_set(S: Sequence[Item], history: Sequence[InteractionRecord]) -> float:
    """Mean item novelty, each item judged only against the prior history."""
    if len(S) == 0:
        raise ValueError("metric needs a non-empty set")
    seen = {rule.attribute: {getattr(rec, rule.attribute) for rec in history} for rule in NOVELTY_RULES}
    total = 0.0
    for item in S:
        for rule in NOVELTY_RULES:
            value = getattr(item, rule.attribute)
            if value and value not in seen[rule.attribute]:
                total += rule.points
    return total / len(S)

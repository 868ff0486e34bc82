"""Three-stage recommender: retrieval, DPP diversity filter, compliance and popularity."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .catalog import Catalog, Item, UserProfile
from .embedding import cosine_to_many
from .errors import ConfigError
from .kernel import VARIANTS, build_kernel_factor, quality_from_cosine, QualityScores
from .rng import request_rng
from .sampler import KDPPSampler


@dataclass(frozen=True)
class PipelineConfig:
    retrieval_size: int = 300
    dpp_size: int = 30
    variant: str = "B"
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not 1 <= self.dpp_size <= self.retrieval_size:
            raise ConfigError(
                f"need 1 <= dpp_size <= retrieval_size, got {self.dpp_size} and {self.retrieval_size}"
            )

    @classmethod
    def production(cls, variant: str = "B", seed: int = 0) -> "PipelineConfig":
        return cls(retrieval_size=1000, dpp_size=60, variant=variant, seed=seed)


@dataclass(frozen=True)
class Candidate:
    item: Item
    score: float  # two-tower cosine with the user
    row: int  # position in the catalog

    @property
    def id(self) -> int:
        return self.item.id


@dataclass(frozen=True)
class RecommendationSet:
    user_id: int
    item_ids: tuple[int, ...]
    scores: tuple[float, ...]
    variant: str
    seed: int

    def __len__(self) -> int:
        return len(self.item_ids)

    def to_record(self) -> dict:
        return {
            "user_id": self.user_id,
            "variant": self.variant,
            "seed": self.seed,
            "items": list(self.item_ids),
            "scores": list(self.scores),
        }


def retrieve_top(user: UserProfile, catalog: Catalog, m: int) -> list[Candidate]:
    """Exact top-m retrieval by two-tower cosine, ties broken by ascending id."""
    if m < 1:
        raise ConfigError(f"retrieval size must be >= 1, got {m}")
    scores = cosine_to_many(user.retrieval_embedding, catalog.retrieval_matrix, catalog.retrieval_norms)
    order = np.lexsort((catalog.ids, -scores))[:m]
    return [Candidate(catalog.items[r], float(scores[r]), int(r)) for r in order]


def _candidate_quality(candidates: Sequence[Candidate], variant: str) -> QualityScores:
    if variant == "B":
        return quality_from_cosine([c.score for c in candidates])
    return QualityScores(np.ones(len(candidates)), variant)


def dpp_filter(
    candidates: Sequence[Candidate],
    user: UserProfile,
    reduced_phi,
    config: PipelineConfig,
    rng: np.random.Generator,
) -> list[Candidate]:
    """Sample ``config.dpp_size`` candidates from the k-DPP over their kernel.

    ``reduced_phi`` is indexed by catalog position (``Candidate.row``).
    Quality for variant B reuses the retrieval cosine already attached to
    each candidate, which is the cosine between user and item embeddings.
    """
    if config.variant not in ("B", "C"):
        raise ConfigError(f"dpp_filter applies to variants B and C, not {config.variant!r}")
    rows = np.array([c.row for c in candidates], dtype=np.intp)
    phi = np.asarray(reduced_phi, dtype=np.float64)[rows]
    q = _candidate_quality(candidates, config.variant)
    factor = build_kernel_factor(q, phi, item_ids=[c.id for c in candidates])
    picked = KDPPSampler(factor, config.dpp_size).sample(rng)
    return [candidates[i] for i in picked]


def _item_of(x) -> Item:
    return x.item if isinstance(x, Candidate) else x


def compliance_filter(items: Sequence, user: UserProfile) -> list:
    """Drop non-compliant, unaffordable and already-consumed items, keeping order."""
    seen = user.seen_item_ids
    out = []
    for x in items:
        it = _item_of(x)
        if not it.compliant or it.price > user.remaining_credit or it.id in seen:
            continue
        out.append(x)
    return out


def rank_by_popularity(items: Sequence) -> list:
    return sorted(items, key=lambda x: (-_item_of(x).popularity, _item_of(x).id))


def recommend(
    user: UserProfile,
    catalog: Catalog,
    reduced_phi,
    config: PipelineConfig,
    rng: np.random.Generator | None = None,
    *,
    apply_compliance: bool = True,
) -> RecommendationSet:
    """Run the full pipeline for one user.

    When ``rng`` is omitted the request stream for ``(config.seed, user.id,
    config.variant)`` is used. ``apply_compliance=False`` skips the business
    rule filter, as the offline evaluation does.
    """
    candidates = retrieve_top(user, catalog, config.retrieval_size)
    if config.variant == "A":
        kept = compliance_filter(candidates, user) if apply_compliance else list(candidates)
        selected = kept[: config.dpp_size]
    else:
        if rng is None:
            rng = request_rng(config.seed, user.id, config.variant)
        selected = dpp_filter(candidates, user, reduced_phi, config, rng)
        if apply_compliance:
            selected = compliance_filter(selected, user)
    ranked = rank_by_popularity(selected)
    return RecommendationSet(
        user_id=user.id,
        item_ids=tuple(c.id for c in ranked),
        scores=tuple(c.score for c in ranked),
        variant=config.variant,
        seed=config.seed,
    )

"""Stateless HTTP recommendation endpoint over a preloaded catalog."""

from __future__ import annotations

import json
import logging
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .catalog import Catalog, UserProfile, ingest_catalog, ingest_users
from .embedding import fit_reduction, project
from .errors import ConfigError, NumericalDegeneracyError, RankError
from .kernel import VARIANTS
from .pipeline import PipelineConfig, recommend
from .rng import fresh_seed, request_rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ServiceConfig:
    catalog: str
    users: str
    reduced_embeddings: str | None = None
    host: str = "127.0.0.1"
    port: int = 8000
    retrieval_size: int = 1000
    dpp_size: int = 60
    reduced_dim: int = 64

    @classmethod
    def from_file(cls, path) -> "ServiceConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        base = Path(path).resolve().parent
        for key in ("catalog", "users", "reduced_embeddings"):
            if raw.get(key) is not None and not Path(raw[key]).is_absolute():
                raw[key] = str(base / raw[key])
        return cls(**raw)

    def validate(self) -> None:
        for key in ("catalog", "users", "reduced_embeddings"):
            value = getattr(self, key)
            if value is not None and not Path(value).is_file():
                raise ConfigError(f"service config: {key} file {value!r} does not exist")
        PipelineConfig(retrieval_size=self.retrieval_size, dpp_size=self.dpp_size)


def resolve_reduced(catalog: Catalog, path: str | None = None, d: int = 64) -> np.ndarray:
    """Reduced item embeddings: from ``path`` (.npy), the catalog, or a fresh PCA."""
    if path is not None:
        reduced = np.load(path)
        if reduced.shape[0] != catalog.N:
            raise ConfigError(f"{path}: {reduced.shape[0]} rows for {catalog.N} items")
        return reduced
    if catalog.has_reduced:
        return catalog.reduced_matrix
    model = fit_reduction(catalog.semantic_matrix, min(d, catalog.D))
    return project(model, catalog.semantic_matrix)


class RecommendationService:
    """Request handlers over immutable shared state; responses are ``(status, body)``."""

    def __init__(self, catalog: Catalog, users: list[UserProfile], reduced: np.ndarray,
                 retrieval_size: int = 1000, dpp_size: int = 60):
        self.catalog = catalog
        self.users = {u.id: u for u in users}
        self.reduced = reduced
        self.retrieval_size = retrieval_size
        self.dpp_size = dpp_size

    @classmethod
    def load(cls, config: ServiceConfig) -> "RecommendationService":
        config.validate()
        catalog = ingest_catalog(config.catalog)
        users = ingest_users(config.users)
        reduced = resolve_reduced(catalog, config.reduced_embeddings, config.reduced_dim)
        return cls(catalog, users, reduced, config.retrieval_size, config.dpp_size)

    def handle_health(self) -> tuple[int, dict]:
        return 200, {"status": "ok", "items": self.catalog.N, "users": len(self.users)}

    def handle_recommend(self, user_id: int, variant: str | None = None, size: int | None = None,
                         seed: int | None = None) -> tuple[int, dict]:
        variant = "B" if variant is None else variant
        size = self.dpp_size if size is None else size
        if variant not in VARIANTS:
            return 400, {"error": f"variant must be one of {list(VARIANTS)}"}
        if not 1 <= size <= self.retrieval_size:
            return 400, {"error": f"size must lie in [1, {self.retrieval_size}]"}
        if seed is not None and seed < 0:
            return 400, {"error": "seed must be non-negative"}
        user = self.users.get(user_id)
        if user is None:
            return 404, {"error": f"unknown user {user_id}"}
        if seed is None:
            seed = fresh_seed()
        config = PipelineConfig(retrieval_size=self.retrieval_size, dpp_size=size, variant=variant, seed=seed)
        try:
            recs = recommend(user, self.catalog, self.reduced, config, request_rng(seed, user.id, variant))
        except (RankError, NumericalDegeneracyError) as exc:
            return 422, {"error": str(exc), "user_id": user_id, "variant": variant, "seed": seed}
        items = [self.catalog.by_id(i) for i in recs.item_ids]
        return 200, {
            "user_id": user_id,
            "variant": variant,
            "seed": seed,
            "items": [{"id": it.id, "category": it.category, "popularity": it.popularity} for it in items],
        }


def create_app(config: ServiceConfig | None = None, service: RecommendationService | None = None) -> FastAPI:
    """Build the FastAPI app.

    State is loaded in the lifespan hook, so the server only accepts traffic
    once loading has finished; until then health answers 503.
    """
    state: dict = {"service": service}

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if state["service"] is None:
            state["service"] = RecommendationService.load(config)
            log.info("loaded %d items and %d users", state["service"].catalog.N, len(state["service"].users))
        yield

    app = FastAPI(title="dpprec", lifespan=lifespan)

    def _respond(status: int, body: dict) -> JSONResponse:
        return JSONResponse(status_code=status, content=body)

    @app.exception_handler(RequestValidationError)
    async def bad_request(request: Request, exc: RequestValidationError):
        return _respond(400, {"error": "invalid request parameters"})

    @app.get("/v1/health")
    def health():
        svc = state["service"]
        if svc is None:
            return _respond(503, {"status": "loading"})
        return _respond(*svc.handle_health())

    @app.get("/v1/recommendations/{user_id}")
    def recommendations(user_id: int, variant: str = Query("B"), size: int | None = Query(None),
                        seed: int | None = Query(None)):
        svc = state["service"]
        if svc is None:
            return _respond(503, {"status": "loading"})
        return _respond(*svc.handle_recommend(user_id, variant, size, seed))

    return app


def serve(config: ServiceConfig) -> None:  # pragma: no cover - blocking server
    import uvicorn

    config.validate()
    uvicorn.run(create_app(config), host=config.host, port=config.port)

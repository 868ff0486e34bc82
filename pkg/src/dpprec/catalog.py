"""Items, users, JSONL ingestion and seeded synthetic generation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, ValidationError

ITEM_FIELDS = (
    "id",
    "category",
    "subcategory",
    "genre",
    "venue_id",
    "venue_type",
    "price",
    "popularity",
    "compliant",
    "semantic_embedding",
    "retrieval_embedding",
)
USER_FIELDS = ("id", "retrieval_embedding", "remaining_credit", "history")
HISTORY_FIELDS = ("item_id", "category", "subcategory", "genre", "venue_id", "venue_type")


def _frozen(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Item:
    id: int
    category: str
    subcategory: str
    genre: str
    venue_id: str
    venue_type: str
    price: float
    popularity: int
    compliant: bool
    semantic_embedding: np.ndarray
    retrieval_embedding: np.ndarray
    reduced_embedding: np.ndarray | None = None

    def __post_init__(self):
        if self.id < 0:
            raise ValidationError(f"item id must be non-negative, got {self.id}")
        if self.price < 0 or not math.isfinite(self.price):
            raise ValidationError(f"item {self.id}: price must be a finite value >= 0")
        if self.popularity < 0:
            raise ValidationError(f"item {self.id}: popularity must be >= 0")


@dataclass(frozen=True)
class InteractionRecord:
    item_id: int
    category: str
    subcategory: str
    genre: str
    venue_id: str
    venue_type: str

    def __post_init__(self):
        for name in HISTORY_FIELDS[1:]:
            value = getattr(self, name)
            if not isinstance(value, str) or not value:
                raise ValidationError(f"interaction with item {self.item_id}: {name} must be a non-empty string")

    @classmethod
    def snapshot(cls, item: Item) -> "InteractionRecord":
        return cls(item.id, item.category, item.subcategory, item.genre, item.venue_id, item.venue_type)


@dataclass(frozen=True, eq=False)
class UserProfile:
    id: int
    retrieval_embedding: np.ndarray
    remaining_credit: float
    history: tuple[InteractionRecord, ...] = ()

    def __post_init__(self):
        if self.id < 0:
            raise ValidationError(f"user id must be non-negative, got {self.id}")
        if not (self.remaining_credit >= 0) or not math.isfinite(self.remaining_credit):
            raise ValidationError(f"user {self.id}: remaining_credit must be >= 0")

    @cached_property
    def seen_item_ids(self) -> frozenset[int]:
        return frozenset(rec.item_id for rec in self.history)


class Catalog:
    """The universe of items with dimension-consistent embeddings.

    Matrices over all items (semantic, retrieval, reduced) are built lazily
    and cached; they are read-only views shared by every consumer.
    """

    def __init__(self, items: Sequence[Item], D: int | None = None, d_r: int | None = None):
        items = tuple(items)
        if not items:
            raise ValidationError("a catalog needs at least one item")
        self.D = int(D if D is not None else items[0].semantic_embedding.shape[0])
        self.d_r = int(d_r if d_r is not None else items[0].retrieval_embedding.shape[0])
        seen: set[int] = set()
        for item in items:
            if item.id in seen:
                raise ValidationError(f"duplicate item id {item.id}")
            seen.add(item.id)
            if item.semantic_embedding.shape != (self.D,):
                raise DimensionError(f"item {item.id}: semantic_embedding has length "
                                     f"{item.semantic_embedding.shape[0]}, expected {self.D}")
            if item.retrieval_embedding.shape != (self.d_r,):
                raise DimensionError(f"item {item.id}: retrieval_embedding has length "
                                     f"{item.retrieval_embedding.shape[0]}, expected {self.d_r}")
        self.items = items

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[Item]:
        return iter(self.items)

    def __getitem__(self, pos: int) -> Item:
        return self.items[pos]

    @property
    def N(self) -> int:
        return len(self.items)

    @cached_property
    def ids(self) -> np.ndarray:
        return _frozen([it.id for it in self.items], dtype=np.int64)

    @cached_property
    def position(self) -> dict[int, int]:
        return {it.id: pos for pos, it in enumerate(self.items)}

    def by_id(self, item_id: int) -> Item:
        return self.items[self.position[item_id]]

    @cached_property
    def semantic_matrix(self) -> np.ndarray:
        return _frozen(np.stack([it.semantic_embedding for it in self.items]))

    @cached_property
    def retrieval_matrix(self) -> np.ndarray:
        return _frozen(np.stack([it.retrieval_embedding for it in self.items]))

    @cached_property
    def retrieval_norms(self) -> np.ndarray:
        return _frozen(np.linalg.norm(self.retrieval_matrix, axis=1))

    @property
    def has_reduced(self) -> bool:
        return all(it.reduced_embedding is not None for it in self.items)

    @cached_property
    def reduced_matrix(self) -> np.ndarray:
        if not self.has_reduced:
            raise ValidationError("catalog items carry no reduced_embedding")
        return _frozen(np.stack([it.reduced_embedding for it in self.items]))

    def with_reduced(self, reduced: np.ndarray) -> "Catalog":
        """Return a copy whose items carry the given reduced embeddings."""
        reduced = np.asarray(reduced, dtype=np.float64)
        if reduced.shape[0] != self.N:
            raise DimensionError(f"reduced matrix has {reduced.shape[0]} rows for {self.N} items")
        items = []
        for it, row in zip(self.items, reduced):
            items.append(Item(it.id, it.category, it.subcategory, it.genre, it.venue_id, it.venue_type,
                              it.price, it.popularity, it.compliant, it.semantic_embedding,
                              it.retrieval_embedding, _frozen(row)))
        return Catalog(items, self.D, self.d_r)


# ---------------------------------------------------------------------------
# JSONL ingestion


def _require(record: dict, name: str, lineno: int, kind: str):
    if name not in record:
        raise ValidationError(f"{kind} record on line {lineno}: missing required field '{name}'")
    return record[name]


def _typed(value, types, name: str, lineno: int, kind: str):
    # bool is an int subclass; reject it where a number is expected
    if isinstance(value, bool) and bool not in types:
        raise ValidationError(f"{kind} record on line {lineno}: field '{name}' has wrong type")
    if not isinstance(value, types):
        raise ValidationError(f"{kind} record on line {lineno}: field '{name}' has wrong type")
    return value


def _vector(value, name: str, lineno: int, kind: str) -> np.ndarray:
    if not isinstance(value, list):
        raise ValidationError(f"{kind} record on line {lineno}: field '{name}' must be an array")
    arr = np.array(value, dtype=np.float64)
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise ValidationError(f"{kind} record on line {lineno}: field '{name}' must hold finite numbers")
    arr.flags.writeable = False
    return arr


def _read_jsonl(path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise ValidationError(f"line {lineno}: expected a JSON object")
            yield lineno, record


def _parse_item(record: dict, lineno: int) -> Item:
    kind = "item"
    vals = {name: _require(record, name, lineno, kind) for name in ITEM_FIELDS}
    for name in ("category", "subcategory", "genre", "venue_id", "venue_type"):
        _typed(vals[name], (str,), name, lineno, kind)
    reduced = record.get("reduced_embedding")
    try:
        return Item(
            id=_typed(vals["id"], (int,), "id", lineno, kind),
            category=vals["category"],
            subcategory=vals["subcategory"],
            genre=vals["genre"],
            venue_id=vals["venue_id"],
            venue_type=vals["venue_type"],
            price=float(_typed(vals["price"], (int, float), "price", lineno, kind)),
            popularity=_typed(vals["popularity"], (int,), "popularity", lineno, kind),
            compliant=_typed(vals["compliant"], (bool,), "compliant", lineno, kind),
            semantic_embedding=_vector(vals["semantic_embedding"], "semantic_embedding", lineno, kind),
            retrieval_embedding=_vector(vals["retrieval_embedding"], "retrieval_embedding", lineno, kind),
            reduced_embedding=None if reduced is None else _vector(reduced, "reduced_embedding", lineno, kind),
        )
    except ValidationError as exc:
        if f"line {lineno}" in str(exc):
            raise
        raise ValidationError(f"line {lineno}: {exc}") from None


def ingest_catalog(path, D: int | None = None) -> Catalog:
    """Load a catalog from JSONL, one item per line, preserving file order.

    ``D`` fixes the expected semantic dimension; when omitted it is taken
    from the first record.
    """
    items: list[Item] = []
    seen: dict[int, int] = {}
    d_r = None
    reduced_dim = None
    for lineno, record in _read_jsonl(path):
        item = _parse_item(record, lineno)
        if item.id in seen:
            raise ValidationError(f"duplicate item id {item.id} (lines {seen[item.id]} and {lineno})")
        seen[item.id] = lineno
        if D is None:
            D = item.semantic_embedding.shape[0]
        if d_r is None:
            d_r = item.retrieval_embedding.shape[0]
        if item.semantic_embedding.shape[0] != D:
            raise DimensionError(f"line {lineno}: semantic_embedding has length "
                                 f"{item.semantic_embedding.shape[0]}, expected D={D}")
        if item.retrieval_embedding.shape[0] != d_r:
            raise DimensionError(f"line {lineno}: retrieval_embedding has length "
                                 f"{item.retrieval_embedding.shape[0]}, expected {d_r}")
        if item.reduced_embedding is not None:
            if reduced_dim is None:
                reduced_dim = item.reduced_embedding.shape[0]
            elif item.reduced_embedding.shape[0] != reduced_dim:
                raise DimensionError(f"line {lineno}: reduced_embedding has length "
                                     f"{item.reduced_embedding.shape[0]}, expected {reduced_dim}")
        items.append(item)
    if not items:
        raise ValidationError(f"{path}: catalog file holds no items")
    return Catalog(items, D, d_r)


def _parse_history(entries, lineno: int) -> tuple[InteractionRecord, ...]:
    if not isinstance(entries, list):
        raise ValidationError(f"user record on line {lineno}: field 'history' must be an array")
    out = []
    for entry in entries:
        if not isinstance(entry, dict):
            raise ValidationError(f"user record on line {lineno}: history entries must be objects")
        vals = {name: _require(entry, name, lineno, "history") for name in HISTORY_FIELDS}
        _typed(vals["item_id"], (int,), "item_id", lineno, "history")
        for name in HISTORY_FIELDS[1:]:
            _typed(vals[name], (str,), name, lineno, "history")
        try:
            out.append(InteractionRecord(**vals))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    return tuple(out)


def ingest_users(path) -> list[UserProfile]:
    users: list[UserProfile] = []
    seen: dict[int, int] = {}
    d_r = None
    for lineno, record in _read_jsonl(path):
        vals = {name: _require(record, name, lineno, "user") for name in USER_FIELDS}
        uid = _typed(vals["id"], (int,), "id", lineno, "user")
        if uid in seen:
            raise ValidationError(f"duplicate user id {uid} (lines {seen[uid]} and {lineno})")
        seen[uid] = lineno
        emb = _vector(vals["retrieval_embedding"], "retrieval_embedding", lineno, "user")
        if d_r is None:
            d_r = emb.shape[0]
        elif emb.shape[0] != d_r:
            raise DimensionError(f"line {lineno}: retrieval_embedding has length {emb.shape[0]}, expected {d_r}")
        credit = float(_typed(vals["remaining_credit"], (int, float), "remaining_credit", lineno, "user"))
        history = _parse_history(vals["history"], lineno)
        try:
            users.append(UserProfile(uid, emb, credit, history))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    return users


def item_record(item: Item) -> dict:
    record = {
        "id": item.id,
        "category": item.category,
        "subcategory": item.subcategory,
        "genre": item.genre,
        "venue_id": item.venue_id,
        "venue_type": item.venue_type,
        "price": item.price,
        "popularity": item.popularity,
        "compliant": item.compliant,
        "semantic_embedding": item.semantic_embedding.tolist(),
        "retrieval_embedding": item.retrieval_embedding.tolist(),
    }
    if item.reduced_embedding is not None:
        record["reduced_embedding"] = item.reduced_embedding.tolist()
    return record


def user_record(user: UserProfile) -> dict:
    return {
        "id": user.id,
        "retrieval_embedding": user.retrieval_embedding.tolist(),
        "remaining_credit": user.remaining_credit,
        "history": [
            {name: getattr(rec, name) for name in HISTORY_FIELDS} for rec in user.history
        ],
    }


def _write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, separators=(",", ":")))
            fh.write("\n")


def write_catalog(catalog: Catalog, path) -> None:
    _write_jsonl(path, (item_record(it) for it in catalog))


def write_users(users: Sequence[UserProfile], path) -> None:
    _write_jsonl(path, (user_record(u) for u in users))


# ---------------------------------------------------------------------------
# Synthetic data

VENUE_TYPES = (
    "bookshop", "cinema", "theatre", "museum", "concert_hall", "library",
    "music_store", "festival", "gallery", "dance_studio", "circus", "online",
)


@dataclass(frozen=True)
class SynthConfig:
    n_items: int = 5000
    n_users: int = 500
    n_categories: int = 20
    semantic_dim: int = 384
    retrieval_dim: int = 32
    # norm of the Gaussian perturbation around each cluster center, before row normalization
    noise: float = 0.3
    retrieval_noise: float = 0.6
    user_noise: float = 0.4
    zipf_exponent: float = 1.1
    subcategories_per_category: int = 3
    genres_per_subcategory: int = 3
    venues_per_type: int = 12
    history_min: int = 3
    history_max: int = 12
    compliant_fraction: float = 0.95
    max_credit: float = 300.0

    def validate(self) -> None:
        for name in ("n_items", "n_users", "n_categories", "semantic_dim", "retrieval_dim",
                     "subcategories_per_category", "genres_per_subcategory", "venues_per_type"):
            if getattr(self, name) < 1:
                raise ConfigError(f"SynthConfig.{name} must be >= 1, got {getattr(self, name)}")
        if not 0 <= self.history_min <= self.history_max:
            raise ConfigError("need 0 <= history_min <= history_max")
        if self.zipf_exponent <= 0:
            raise ConfigError("zipf_exponent must be positive")


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def generate_synthetic(config: SynthConfig, seed: int) -> tuple[Catalog, list[UserProfile]]:
    """Generate a clustered catalog and users with seeded randomness.

    Categories own a cluster center in both the semantic and the retrieval
    space; items scatter around their category's centers and are row
    normalized. Each user sits near one category in retrieval space and has a
    history drawn from the items closest to them.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    C, D, dr = config.n_categories, config.semantic_dim, config.retrieval_dim

    sem_centers = _unit_rows(rng.standard_normal((C, D)))
    ret_centers = _unit_rows(rng.standard_normal((C, dr)))

    # every category maps onto a small set of venue types
    type_of_cat = [
        sorted(rng.choice(len(VENUE_TYPES), size=min(2, len(VENUE_TYPES)), replace=False).tolist())
        for _ in range(C)
    ]

    cats = rng.integers(0, C, size=config.n_items)
    sem = _unit_rows(sem_centers[cats] + rng.standard_normal((config.n_items, D)) * (config.noise / math.sqrt(D)))
    ret = ret_centers[cats] + rng.standard_normal((config.n_items, dr)) * (config.retrieval_noise / math.sqrt(dr))
    subs = rng.integers(0, config.subcategories_per_category, size=config.n_items)
    genres = rng.integers(0, config.genres_per_subcategory, size=config.n_items)
    type_pick = rng.integers(0, 2, size=config.n_items)
    venues = rng.integers(0, config.venues_per_type, size=config.n_items)
    ranks = rng.permutation(config.n_items) + 1
    popularity = np.floor(10_000.0 * ranks.astype(np.float64) ** (-config.zipf_exponent)).astype(np.int64)
    prices = np.round(np.exp(rng.normal(2.7, 0.9, size=config.n_items)), 2)
    compliant = rng.random(config.n_items) < config.compliant_fraction

    sem.flags.writeable = False
    ret.flags.writeable = False
    items = []
    for i in range(config.n_items):
        c = int(cats[i])
        vtype = VENUE_TYPES[type_of_cat[c][int(type_pick[i]) % len(type_of_cat[c])]]
        items.append(Item(
            id=i,
            category=f"cat_{c:02d}",
            subcategory=f"cat_{c:02d}/sub_{int(subs[i])}",
            genre=f"cat_{c:02d}/sub_{int(subs[i])}/genre_{int(genres[i])}",
            venue_id=f"{vtype}_{int(venues[i]):03d}",
            venue_type=vtype,
            price=float(prices[i]),
            popularity=int(popularity[i]),
            compliant=bool(compliant[i]),
            semantic_embedding=sem[i],
            retrieval_embedding=ret[i],
        ))
    catalog = Catalog(items, D, dr)

    ret_unit = ret / np.linalg.norm(ret, axis=1, keepdims=True)
    users = []
    for u in range(config.n_users):
        home = int(rng.integers(0, C))
        emb = ret_centers[home] + rng.standard_normal(dr) * (config.user_noise / math.sqrt(dr))
        emb.flags.writeable = False
        n_hist = int(rng.integers(config.history_min, config.history_max + 1))
        n_hist = min(n_hist, config.n_items)
        history: tuple[InteractionRecord, ...] = ()
        if n_hist:
            scores = ret_unit @ (emb / np.linalg.norm(emb))
            pool = np.argsort(-scores, kind="stable")[: max(n_hist, min(config.n_items, 5 * n_hist))]
            chosen = np.sort(rng.choice(pool, size=n_hist, replace=False))
            history = tuple(InteractionRecord.snapshot(items[int(p)]) for p in chosen)
        credit = round(float(rng.uniform(0.0, config.max_credit)), 2)
        users.append(UserProfile(u, emb, credit, history))
    return catalog, users

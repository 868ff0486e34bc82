import numpy as np
import pytest

from dpprec.catalog import Catalog, InteractionRecord, Item, UserProfile
from dpprec.errors import ConfigError, RankError, UndefinedSimilarityError
from dpprec.kernel import quality_from_cosine
from dpprec.pipeline import (
    Candidate,
    PipelineConfig,
    compliance_filter,
    dpp_filter,
    rank_by_popularity,
    recommend,
    retrieve_top,
)
from dpprec.rng import request_rng


def _item(i, ret, popularity=1, price=5.0, compliant=True, sem=None):
    sem = np.ones(3) if sem is None else np.asarray(sem, dtype=float)
    return Item(i, "c", "s", "g", "v", "t", price, popularity, compliant, sem, np.asarray(ret, dtype=float))


def test_config_validation():
    with pytest.raises(ConfigError):
        PipelineConfig(retrieval_size=10, dpp_size=11)
    with pytest.raises(ConfigError):
        PipelineConfig(variant="D")
    assert PipelineConfig.production().retrieval_size == 1000


def test_retrieve_all_sorted():
    items = [_item(0, [0.0, 1.0]), _item(1, [1.0, 0.1]), _item(2, [1.0, 1.0])]
    user = UserProfile(0, np.array([1.0, 0.0]), 10.0)
    out = retrieve_top(user, Catalog(items), 10)
    assert [c.id for c in out] == [1, 2, 0]
    assert [c.score for c in out] == sorted([c.score for c in out], reverse=True)


def test_retrieve_exact_match_first():
    rng = np.random.default_rng(0)
    items = [_item(i, rng.standard_normal(4)) for i in range(30)]
    user = UserProfile(0, items[17].retrieval_embedding.copy(), 10.0)
    assert retrieve_top(user, Catalog(items), 5)[0].id == 17


def test_retrieve_tie_break_by_id():
    items = [_item(5, [1.0, 0.0]), _item(2, [2.0, 0.0]), _item(9, [0.0, 1.0])]
    user = UserProfile(0, np.array([1.0, 0.0]), 10.0)
    assert [c.id for c in retrieve_top(user, Catalog(items), 2)] == [2, 5]


def test_retrieve_zero_user():
    with pytest.raises(UndefinedSimilarityError):
        retrieve_top(UserProfile(0, np.zeros(2), 1.0), Catalog([_item(0, [1.0, 0.0])]), 1)


def test_compliance_rules():
    user = UserProfile(0, np.ones(2), 300.0, (InteractionRecord(3, "c", "s", "g", "v", "t"),))
    items = [_item(0, [1, 0]), _item(1, [1, 0], price=301.0), _item(2, [1, 0], compliant=False),
             _item(3, [1, 0]), _item(4, [1, 0], price=300.0)]
    assert [it.id for it in compliance_filter(items, user)] == [0, 4]
    ok = [_item(i, [1, 0]) for i in range(3)]
    assert compliance_filter(ok, UserProfile(1, np.ones(2), 300.0)) == ok


def test_rank_by_popularity():
    items = [_item(0, [1, 0], popularity=5), _item(1, [1, 0], popularity=9), _item(2, [1, 0], popularity=1)]
    assert [it.popularity for it in rank_by_popularity(items)] == [9, 5, 1]
    tied = [_item(4, [1, 0], 3), _item(1, [1, 0], 3), _item(2, [1, 0], 3)]
    assert [it.id for it in rank_by_popularity(tied)] == [1, 2, 4]
    assert rank_by_popularity([]) == []


def test_dpp_filter_full_set(small_world):
    catalog, users, reduced = small_world
    cands = retrieve_top(users[0], catalog, 10)
    out = dpp_filter(cands, users[0], reduced, PipelineConfig(retrieval_size=10, dpp_size=10, variant="C"),
                     np.random.default_rng(0))
    assert sorted(c.id for c in out) == sorted(c.id for c in cands)


def test_dpp_filter_rejects_variant_a(small_world):
    catalog, users, reduced = small_world
    with pytest.raises(ConfigError):
        dpp_filter(retrieve_top(users[0], catalog, 10), users[0], reduced,
                   PipelineConfig(retrieval_size=10, dpp_size=5, variant="A"), np.random.default_rng(0))


def test_dpp_filter_duplicate_exclusion(small_world):
    catalog, users, reduced = small_world
    cands = retrieve_top(users[0], catalog, 40)
    red = np.array(reduced, copy=True)
    a, b = cands[0].row, cands[1].row
    red[b] = red[a]
    cfg = PipelineConfig(retrieval_size=40, dpp_size=10, variant="C")
    rng = np.random.default_rng(1)
    for _ in range(300):
        ids = {c.id for c in dpp_filter(cands, users[0], red, cfg, rng)}
        assert not {cands[0].id, cands[1].id} <= ids


def test_dpp_filter_rank_error(small_world):
    catalog, users, reduced = small_world
    cands = retrieve_top(users[0], catalog, 100)
    with pytest.raises(RankError):
        dpp_filter(cands, users[0], reduced[:, :5], PipelineConfig(retrieval_size=100, dpp_size=10, variant="C"),
                   np.random.default_rng(0))


def test_variant_b_selects_higher_quality(small_world):
    catalog, users, reduced = small_world
    user = users[2]
    cands = retrieve_top(user, catalog, 120)
    q_b = quality_from_cosine([c.score for c in cands]).q
    pos = {c.id: i for i, c in enumerate(cands)}
    means = {}
    for variant in ("B", "C"):
        cfg = PipelineConfig(retrieval_size=120, dpp_size=10, variant=variant)
        vals = []
        for seed in range(1000):
            picked = dpp_filter(cands, user, reduced, cfg, np.random.default_rng(seed))
            vals.append(q_b[[pos[c.id] for c in picked]].mean())
        means[variant] = np.mean(vals)
    assert means["B"] >= means["C"]


def test_variant_a_is_deterministic(small_world):
    catalog, users, reduced = small_world
    outs = {recommend(users[0], catalog, reduced, PipelineConfig(variant="A", seed=s, retrieval_size=200, dpp_size=20)).item_ids
            for s in range(5)}
    assert len(outs) == 1


def test_variant_a_takes_top_scores(small_world):
    catalog, users, reduced = small_world
    cfg = PipelineConfig(variant="A", retrieval_size=200, dpp_size=20)
    recs = recommend(users[1], catalog, reduced, cfg, apply_compliance=False)
    top = [c.id for c in retrieve_top(users[1], catalog, 20)]
    assert sorted(recs.item_ids) == sorted(top)


def test_variant_b_varies_with_seed(small_world):
    catalog, users, reduced = small_world
    outs = {recommend(users[0], catalog, reduced, PipelineConfig(variant="B", seed=s, retrieval_size=200, dpp_size=20)).item_ids
            for s in range(10)}
    assert len(outs) >= 2


@pytest.mark.parametrize("variant", ["A", "B", "C"])
def test_pipeline_invariants(small_world, variant):
    catalog, users, reduced = small_world
    cfg = PipelineConfig(variant=variant, retrieval_size=150, dpp_size=20, seed=4)
    for user in users[:6]:
        retrieved = {c.id for c in retrieve_top(user, catalog, 150)}
        full = recommend(user, catalog, reduced, cfg, apply_compliance=False)
        filtered = recommend(user, catalog, reduced, cfg)
        assert len(full) == 20
        assert len(set(full.item_ids)) == len(full.item_ids)
        assert set(full.item_ids) <= retrieved
        assert len(filtered) <= 20
        for i in filtered.item_ids:
            it = catalog.by_id(i)
            assert it.compliant and it.price <= user.remaining_credit and i not in user.seen_item_ids
        if variant != "A":
            kept = compliance_filter([catalog.by_id(i) for i in full.item_ids], user)
            assert sorted(filtered.item_ids) == sorted(it.id for it in kept)
        pops = [catalog.by_id(i).popularity for i in filtered.item_ids]
        assert pops == sorted(pops, reverse=True)


def test_production_size_bound(small_world):
    catalog, users, reduced = small_world
    cfg = PipelineConfig(retrieval_size=500, dpp_size=24, variant="B", seed=0)
    assert len(recommend(users[0], catalog, reduced, cfg)) <= 24


def test_request_streams_independent_of_order(small_world):
    catalog, users, reduced = small_world
    cfg = PipelineConfig(variant="C", retrieval_size=100, dpp_size=10, seed=7)
    forward = [recommend(u, catalog, reduced, cfg).item_ids for u in users[:4]]
    backward = [recommend(u, catalog, reduced, cfg).item_ids for u in reversed(users[:4])][::-1]
    assert forward == backward
    r1 = request_rng(7, 1, "B").random(3)
    r2 = request_rng(7, 1, "C").random(3)
    assert not np.allclose(r1, r2)

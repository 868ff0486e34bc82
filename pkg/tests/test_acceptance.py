"""Exit criteria for the package, one test per criterion.

Each test prints a single ``[criterion N] PASS|FAIL`` line with the measured
quantity next to its bound, then asserts it.
"""

import math
import re
import time

import numpy as np
import pytest

from dpprec.catalog import Catalog, InteractionRecord, Item, SynthConfig, generate_synthetic
from dpprec.cli import main as cli_main
from dpprec.embedding import fit_reduction, project
from dpprec.errors import RankError
from dpprec.evalharness import mann_whitney_u, oracle_total_variation, run_offline_eval
from dpprec.kernel import build_kernel_factor, dual_eigensystem
from dpprec.metrics import MAX_NOVELTY, NOVELTY_RULES, business_diversity_item, log_volume
from dpprec.pipeline import PipelineConfig, recommend
from dpprec.sampler import SampleConfig, sample_k_dpp


@pytest.fixture
def verdict(capsys):
    def report(number, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return report


@pytest.fixture(scope="module")
def benchmark_world():
    catalog, users = generate_synthetic(SynthConfig(n_items=5000, n_users=500), seed=0)
    reduced = project(fit_reduction(catalog.semantic_matrix, 64), catalog.semantic_matrix)
    return catalog, users, reduced


@pytest.mark.parametrize("n,d,k", [(8, 4, 3), (6, 2, 2)])
def test_c1_sampler_exactness(verdict, n, d, k):
    t0 = time.perf_counter()
    tv = oracle_total_variation(n, d, k, draws=200_000, seed=0)
    elapsed = time.perf_counter() - t0
    ok = tv < 0.02 and elapsed < 60.0
    verdict(1, ok, f"N={n} d={d} k={k}: TV={tv:.5f} (< 0.02), {elapsed:.1f}s (< 60s)")
    assert ok


def test_c2_quality_diversity_identity(verdict):
    rng = np.random.default_rng(0)
    worst = 0.0
    worst_corrected = 0.0
    for _ in range(1000):
        s = int(rng.integers(1, 6))
        dim = int(rng.integers(s, 9))
        phi = rng.standard_normal((s, dim))
        q = rng.uniform(0.05, 1.0, s)
        S = list(range(s))
        sum_log_q = float(np.sum(np.log(q)))
        two_log_vol = 2.0 * log_volume(S, phi)
        log_det_L = float(np.linalg.slogdet(build_kernel_factor(q, phi).gram(S))[1])
        scale = max(abs(log_det_L), 1.0)
        worst = max(worst, abs(sum_log_q + two_log_vol - log_det_L) / scale)
        worst_corrected = max(worst_corrected, abs(2 * sum_log_q + two_log_vol - log_det_L) / scale)
    ok = worst < 1e-8
    verdict(2, ok, f"max relative |sum log q + 2 log Vol - log det L| = {worst:.3e} (< 1e-8); "
                   f"with the quality term counted twice the gap is {worst_corrected:.3e}")
    assert ok


def test_c3_dual_primal_agreement(verdict):
    worst_spec = worst_res = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        factor = build_kernel_factor(rng.uniform(0.1, 1.0, 50), rng.standard_normal((50, 8)))
        eig, U = dual_eigensystem(factor)
        L = factor.gram()
        lam_max = eig.eigenvalues[0]
        dual = np.linalg.eigvalsh(factor.B.T @ factor.B)[::-1]
        primal = np.linalg.eigvalsh(L)[::-1][:8]
        worst_spec = max(worst_spec, np.abs(dual - primal).max(), np.abs(eig.eigenvalues - primal[: eig.rank]).max())
        for j in range(eig.rank):
            worst_res = max(worst_res, np.linalg.norm(L @ U[:, j] - eig.eigenvalues[j] * U[:, j]) / lam_max)
    ok = worst_spec < 1e-8 and worst_res <= 1e-8
    verdict(3, ok, f"max eigenvalue gap {worst_spec:.2e} (< 1e-8), max residual/lambda_max {worst_res:.2e} (<= 1e-8)")
    assert ok


def test_c4_table1_pattern(verdict, benchmark_world):
    catalog, users, reduced = benchmark_world
    t0 = time.perf_counter()
    report = run_offline_eval(catalog, users, reduced, retrieval_size=300, dpp_size=30, seed=0)
    elapsed = time.perf_counter() - t0
    a, b, c = report.row("A"), report.row("B"), report.row("C")
    checks = {
        "relevance A > B > C": a.mean_relevance > b.mean_relevance > c.mean_relevance,
        "volume C/A >= B/A > 5": c.volume_ratio_vs_A >= b.volume_ratio_vs_A > 5,
        "business B, C >= 1.1 A": min(b.mean_business_diversity, c.mean_business_diversity) >= 1.1 * a.mean_business_diversity,
        "runtime < 600s": elapsed < 600,
    }
    ok = all(checks.values())
    verdict(4, ok, f"relevance {a.mean_relevance:.3f}/{b.mean_relevance:.3f}/{c.mean_relevance:.3f}, "
                   f"volume ratio x{b.volume_ratio_vs_A:.3g}/x{c.volume_ratio_vs_A:.3g}, "
                   f"business {a.mean_business_diversity:.3f}/{b.mean_business_diversity:.3f}/{c.mean_business_diversity:.3f}, "
                   f"{elapsed:.1f}s; failed: {[k for k, v in checks.items() if not v]}")
    assert ok


def test_c5_complexity_scaling(verdict, capsys):
    code = cli_main(["bench", "--n", "1000,2000", "--d", "64", "--k", "60", "--seed", "0", "--check-scaling"])
    out = capsys.readouterr().out
    times = {int(n): float(t) for n, t in re.findall(r"N=(\d+) d=64 k=60 seconds=([0-9.]+)", out)}
    ratio = times[2000] / times[1000]
    ok = ratio < 3.0 and code == 0
    verdict(5, ok, f"t(2000)={times[2000]*1e3:.1f}ms, t(1000)={times[1000]*1e3:.1f}ms, ratio {ratio:.2f} (< 3)")
    assert ok


def test_c6_stochasticity(verdict, benchmark_world):
    catalog, users, reduced = benchmark_world
    user = users[0]
    sets = {}
    for variant in ("A", "B"):
        sets[variant] = {
            recommend(user, catalog, reduced, PipelineConfig(variant=variant, seed=s)).item_ids for s in range(10)
        }
    ok = len(sets["B"]) >= 2 and len(sets["A"]) == 1
    verdict(6, ok, f"distinct sets over 10 seeds: B={len(sets['B'])} (>= 2), A={len(sets['A'])} (== 1)")
    assert ok


def test_c7_duplicate_exclusion(verdict):
    base, users = generate_synthetic(SynthConfig(n_items=300, n_users=1, n_categories=5, semantic_dim=64, retrieval_dim=16), 1)
    twin_src = base.items[0]
    twin = Item(10_000, twin_src.category, twin_src.subcategory, twin_src.genre, twin_src.venue_id,
                twin_src.venue_type, twin_src.price, twin_src.popularity, twin_src.compliant,
                twin_src.semantic_embedding, twin_src.retrieval_embedding)
    catalog = Catalog(list(base.items) + [twin])
    reduced = project(fit_reduction(catalog.semantic_matrix, 32), catalog.semantic_matrix)
    assert np.array_equal(reduced[0], reduced[-1])
    user = users[0]
    # retrieve around the duplicated pair so both are always candidates
    user = type(user)(user.id, twin_src.retrieval_embedding.copy(), user.remaining_credit, user.history)
    config = PipelineConfig(retrieval_size=60, dpp_size=12, variant="B")
    together = 0
    for seed in range(10_000):
        rng = np.random.default_rng(seed)
        ids = set(recommend(user, catalog, reduced, config, rng, apply_compliance=False).item_ids)
        together += {twin_src.id, twin.id} <= ids
    ok = together == 0
    verdict(7, ok, f"pair co-selected in {together} of 10000 samples (== 0)")
    assert ok


def test_c8_business_metric_bounds(verdict):
    rng = np.random.default_rng(0)
    vocab = ["a", "b", "c"]
    bad = 0
    for _ in range(5000):
        attrs = {r.attribute: str(rng.choice(vocab)) for r in NOVELTY_RULES}
        item = Item(0, attrs["category"], attrs["subcategory"], attrs["genre"], attrs["venue_id"],
                    attrs["venue_type"], 1.0, 1, True, np.ones(1), np.ones(1))
        history = []
        previous = math.inf
        for _ in range(6):
            score = business_diversity_item(item, history)
            all_novel = all(all(getattr(h, a) != attrs[a] for h in history) for a, _ in NOVELTY_RULES)
            if not (0.0 <= score <= MAX_NOVELTY) or (score == 6.5) != all_novel or score > previous:
                bad += 1
            previous = score
            h = {r.attribute: str(rng.choice(vocab)) for r in NOVELTY_RULES}
            history.append(InteractionRecord(1, h["category"], h["subcategory"], h["genre"], h["venue_id"], h["venue_type"]))
    ok = bad == 0
    verdict(8, ok, f"violations of [0, 6.5], 6.5-iff-all-novel, monotonicity: {bad} of 30000 checks")
    assert ok


def test_c9_mann_whitney(verdict):
    u, p = mann_whitney_u([1, 2], [3, 4])
    _, p_same = mann_whitney_u([1, 2, 3], [1, 2, 3])
    ok = u == 0 and abs(p - 1 / 3) < 1e-12 and p_same >= 0.99
    verdict(9, ok, f"(1,2) vs (3,4): U={u}, p={p:.6f} (1/3); identical samples p={p_same:.3f} (>= 0.99)")
    assert ok


def test_c10_rank_guard(verdict):
    rng = np.random.default_rng(0)
    phi = rng.standard_normal((500, 30)) @ rng.standard_normal((30, 64))
    factor = build_kernel_factor(np.ones(500), phi)
    try:
        sample_k_dpp(factor, SampleConfig(k=60), rng)
        raised = None
    except RankError as exc:
        raised = exc
    ok = raised is not None
    verdict(10, ok, f"k=60 on rank-30 kernel -> {'RankError: ' + str(raised) if ok else 'no error'}")
    assert ok

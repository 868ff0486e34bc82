import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from dpprec.evalharness import (
    CSV_COLUMNS,
    EvaluationReport,
    VariantRow,
    mann_whitney_u,
    oracle_total_variation,
    read_report,
    run_offline_eval,
    total_variation,
    write_report,
)
from dpprec.kernel import build_kernel_factor


def _enumerated_p(a, b):
    """Exact two-sided p by listing every assignment of the pooled ranks."""
    pooled = sorted(a + b)
    ranks = {v: np.mean([i + 1 for i, w in enumerate(pooled) if w == v]) for v in pooled}
    n1, n = len(a), len(a) + len(b)
    rank_list = [ranks[v] for v in pooled]
    mu = n1 * (n - n1) / 2
    u_obs = sum(ranks[v] for v in a) - n1 * (n1 + 1) / 2
    us = [sum(rank_list[i] for i in c) - n1 * (n1 + 1) / 2 for c in itertools.combinations(range(n), n1)]
    return sum(abs(u - mu) >= abs(u_obs - mu) - 1e-12 for u in us) / len(us)


def test_mw_exact_small_case():
    u, p = mann_whitney_u([1, 2], [3, 4])
    assert u == 0
    assert p == pytest.approx(1 / 3, abs=1e-15)
    assert _enumerated_p([1, 2], [3, 4]) == pytest.approx(1 / 3)


def test_mw_identical_samples():
    assert mann_whitney_u([1, 2, 3], [1, 2, 3])[1] >= 0.99


def test_mw_symmetric_in_samples(rng):
    a, b = rng.normal(size=6).tolist(), rng.normal(0.5, size=7).tolist()
    assert mann_whitney_u(a, b)[1] == mann_whitney_u(b, a)[1]
    a, b = rng.normal(size=30), rng.normal(0.5, size=40)
    assert mann_whitney_u(a, b)[1] == pytest.approx(mann_whitney_u(b, a)[1], rel=1e-14)


def test_mw_exact_with_ties_matches_enumeration():
    a, b = [1, 2, 2, 3, 5], [2, 3, 3, 4, 6, 6]
    assert mann_whitney_u(a, b)[1] == pytest.approx(_enumerated_p(a, b), rel=1e-12)


def test_mw_exact_matches_scipy(rng):
    a, b = rng.normal(size=7), rng.normal(1.0, size=8)
    ref = stats.mannwhitneyu(a, b, alternative="two-sided", method="exact")
    u, p = mann_whitney_u(a, b)
    assert u == ref.statistic
    assert p == pytest.approx(ref.pvalue, rel=1e-10)


def test_mw_asymptotic_matches_scipy(rng):
    a = np.round(rng.normal(size=40), 1)
    b = np.round(rng.normal(0.3, size=55), 1)
    ref = stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=True)
    u, p = mann_whitney_u(a, b)
    assert u == ref.statistic
    assert p == pytest.approx(ref.pvalue, rel=1e-10)


def test_mw_large_shift_drives_p_down(rng):
    a = rng.normal(size=30)
    assert mann_whitney_u(a, a + 100)[1] < 1e-9
    assert mann_whitney_u([1, 2, 3], [101, 102, 103])[1] == pytest.approx(0.1)


def test_mw_empty():
    with pytest.raises(ValueError):
        mann_whitney_u([], [1.0])


@settings(max_examples=60, deadline=None)
@given(a=st.lists(st.integers(0, 5), min_size=1, max_size=12), b=st.lists(st.integers(0, 5), min_size=1, max_size=12))
def test_mw_p_in_unit_interval(a, b):
    u, p = mann_whitney_u(a, b)
    assert 0.0 < p <= 1.0
    assert 0.0 <= u <= len(a) * len(b)


def test_oracle_identity_singletons():
    f = build_kernel_factor(np.ones(3), np.eye(3))
    assert total_variation(f, 1, 100_000, np.random.default_rng(0)) < 0.01


def test_oracle_bounds():
    tv = oracle_total_variation(5, 3, 2, 50, seed=1)
    assert 0.0 <= tv <= 1.0


def test_oracle_default_instance():
    assert oracle_total_variation(8, 4, 3, 200_000, seed=0) < 0.02


def _report():
    rows = (
        VariantRow("A", 0.8, -30.0, 1.0, 0.5, 0, 1.0, 1.0),
        VariantRow("B", 0.7, -25.5, math.exp(4.5), 1.9, 1, 1e-12, 3.5e-40),
        VariantRow("C", 0.6, -25.0, math.exp(5.0), 2.1, 0, 2e-15, 0.25),
    )
    return EvaluationReport(rows=rows, n_users=3)


def test_csv_round_trip(tmp_path):
    write_report(_report(), tmp_path / "r.csv", "csv")
    back = read_report(tmp_path / "r.csv")
    assert back.rows == _report().rows
    header = (tmp_path / "r.csv").read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)
    assert back.row("A").volume_ratio_vs_A == 1.0


def test_markdown_rows(tmp_path):
    write_report(_report(), tmp_path / "r.md", "markdown")
    lines = [l for l in (tmp_path / "r.md").read_text().splitlines() if l.startswith("|")]
    assert len(lines) == 2 + 3
    assert all(col in lines[0] for col in CSV_COLUMNS)


def test_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        write_report(_report(), tmp_path / "missing" / "r.csv")


def test_offline_eval_structure_and_determinism(small_world):
    catalog, users, reduced = small_world
    kw = dict(retrieval_size=120, dpp_size=12, seed=5)
    r1 = run_offline_eval(catalog, users, reduced, **kw)
    r2 = run_offline_eval(catalog, users, reduced, **kw)
    r3 = run_offline_eval(catalog, users, reduced, workers=4, **kw)
    assert r1.rows == r2.rows == r3.rows
    assert [r.variant for r in r1.rows] == ["A", "B", "C"]
    a = r1.row("A")
    assert a.volume_ratio_vs_A == 1.0 and a.p_cosine_vs_A == pytest.approx(1.0)
    for r in r1.rows:
        assert 0 <= r.degenerate_count <= len(users)
        assert math.isclose(r.volume_ratio_vs_A, math.exp(r.mean_log_volume - a.mean_log_volume), rel_tol=1e-12)


def test_offline_eval_needs_two_users(small_world):
    catalog, users, reduced = small_world
    with pytest.raises(ValueError):
        run_offline_eval(catalog, users[:1], reduced)


def test_offline_eval_counts_failures(small_world):
    catalog, users, reduced = small_world
    rep = run_offline_eval(catalog, users[:3], reduced[:, :4], retrieval_size=50, dpp_size=10, seed=0)
    assert rep.failures["B"] == 3 and rep.failures["C"] == 3 and rep.failures["A"] == 0

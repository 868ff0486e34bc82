"""Offline A/B/C evaluation, Mann-Whitney testing and sampler correctness checks."""

from __future__ import annotations

import csv
import itertools
import logging
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .catalog import Catalog, UserProfile
from .errors import DPPRecError
from .kernel import KernelFactor, build_kernel_factor
from .metrics import DEGENERATE, business_diversity_set, log_volume, mean_user_cosine
from .pipeline import PipelineConfig, recommend
from .rng import request_rng
from .sampler import ENUMERATION_LIMIT, KDPPSampler, SampleConfig, brute_force_k_dpp, sample_k_dpp
from .errors import EnumerationLimitError

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "variant",
    "mean_relevance",
    "mean_log_volume",
    "volume_ratio_vs_A",
    "mean_business_diversity",
    "degenerate_count",
    "p_cosine_vs_A",
    "p_business_vs_A",
)
EXACT_MW_LIMIT = 8


@dataclass(frozen=True)
class VariantRow:
    variant: str
    mean_relevance: float
    mean_log_volume: float
    volume_ratio_vs_A: float
    mean_business_diversity: float
    degenerate_count: int
    p_cosine_vs_A: float
    p_business_vs_A: float

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


@dataclass(frozen=True)
class EvaluationReport:
    rows: tuple[VariantRow, ...]
    n_users: int = 0
    failures: dict = field(default_factory=dict)

    def row(self, variant: str) -> VariantRow:
        for r in self.rows:
            if r.variant == variant:
                return r
        raise KeyError(variant)


# ---------------------------------------------------------------------------
# Mann-Whitney U


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def mann_whitney_u(sample_a, sample_b) -> tuple[float, float]:
    """Two-sided Mann-Whitney U test.

    Returns ``(U, p)`` where U counts pairs with ``a > b`` (ties count half).
    With at most 8 observations per side the p-value comes from enumerating
    every split of the pooled midranks, which handles ties exactly; otherwise
    a tie-corrected normal approximation with continuity correction is used.
    """
    a = np.asarray(sample_a, dtype=np.float64).ravel()
    b = np.asarray(sample_b, dtype=np.float64).ravel()
    n1, n2 = a.size, b.size
    if n1 == 0 or n2 == 0:
        raise ValueError("mann_whitney_u needs two non-empty samples")
    ranks = _midranks(np.concatenate([a, b]))
    offset = n1 * (n1 + 1) / 2.0
    u = float(ranks[:n1].sum() - offset)
    mu = n1 * n2 / 2.0
    if n1 <= EXACT_MW_LIMIT and n2 <= EXACT_MW_LIMIT:
        dev = abs(u - mu)
        hits = total = 0
        for combo in itertools.combinations(range(n1 + n2), n1):
            total += 1
            if abs(ranks[list(combo)].sum() - offset - mu) >= dev - 1e-9:
                hits += 1
        return u, hits / total
    n = n1 + n2
    _, counts = np.unique(ranks, return_counts=True)
    tie = float(np.sum(counts**3 - counts))
    var = n1 * n2 / 12.0 * ((n + 1) - tie / (n * (n - 1)))
    if var <= 0.0:
        return u, 1.0
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    p = math.erfc(z / math.sqrt(2.0))
    # keep p strictly positive when the tail underflows
    return u, min(1.0, max(p, np.finfo(float).tiny))


# ---------------------------------------------------------------------------
# sampler oracle


def total_variation(factor: KernelFactor, k: int, draws: int, rng: np.random.Generator) -> float:
    """TV distance between ``draws`` k-DPP samples and the enumerated law."""
    if factor.N > ENUMERATION_LIMIT:
        raise EnumerationLimitError(f"N={factor.N} exceeds the enumeration limit {ENUMERATION_LIMIT}")
    exact = brute_force_k_dpp(factor.gram(), k)
    samples = KDPPSampler(factor, k).sample_many(draws, rng)
    counts = Counter(map(tuple, samples.tolist()))
    support = set(exact) | set(counts)
    tv = 0.5 * sum(abs(counts.get(S, 0) / draws - exact.get(S, 0.0)) for S in support)
    return float(min(max(tv, 0.0), 1.0))


def oracle_total_variation(n: int, d: int, k: int, draws: int, seed: int) -> float:
    """TV check on a seeded Gaussian factor of shape (n, d)."""
    if n > ENUMERATION_LIMIT:
        raise EnumerationLimitError(f"n={n} exceeds the enumeration limit {ENUMERATION_LIMIT}")
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, d))
    factor = build_kernel_factor(np.ones(n), B)
    return total_variation(factor, k, draws, rng)


# ---------------------------------------------------------------------------
# offline evaluation


@dataclass
class _UserOutcome:
    cosine: float
    log_volume: float
    business: float


def _evaluate_user(user, catalog, reduced_phi, variant, retrieval_size, dpp_size, seed):
    config = PipelineConfig(retrieval_size=retrieval_size, dpp_size=dpp_size, variant=variant, seed=seed)
    rng = request_rng(seed, user.id, variant)
    recs = recommend(user, catalog, reduced_phi, config, rng, apply_compliance=False)
    ids = list(recs.item_ids)
    rows = [catalog.position[i] for i in ids]
    return _UserOutcome(
        cosine=mean_user_cosine(ids, user, catalog),
        log_volume=log_volume(rows, catalog.semantic_matrix),
        business=business_diversity_set([catalog.items[r] for r in rows], user.history),
    )


def run_offline_eval(
    catalog: Catalog,
    users: Sequence[UserProfile],
    reduced_phi,
    *,
    retrieval_size: int = 300,
    dpp_size: int = 30,
    seed: int = 0,
    variants: Sequence[str] = ("A", "B", "C"),
    workers: int = 1,
) -> EvaluationReport:
    """Evaluate every variant on every user, without compliance filtering.

    Volumes use the full semantic embeddings. Cross-user volume aggregation is
    the mean of per-user log-volumes; the ratio against A is
    ``exp(mean_logvol(v) - mean_logvol(A))``. Users whose set is rank
    deficient are left out of that mean and counted instead; users whose
    pipeline raised are recorded in ``failures``.
    """
    if len(users) < 2:
        raise ValueError("offline evaluation needs at least two users")
    if "A" not in variants:
        raise ValueError("variant A is the reference and must be evaluated")
    reduced_phi = np.asarray(reduced_phi, dtype=np.float64)
    outcomes: dict[str, list[_UserOutcome]] = {}
    failures: dict[str, int] = {}

    for variant in variants:
        def task(user, variant=variant):
            try:
                return _evaluate_user(user, catalog, reduced_phi, variant, retrieval_size, dpp_size, seed)
            except DPPRecError as exc:
                log.warning("user %s variant %s failed: %s", user.id, variant, exc)
                return None

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(task, users))
        else:
            results = [task(u) for u in users]
        failures[variant] = sum(r is None for r in results)
        outcomes[variant] = [r for r in results if r is not None]

    def mean_logvol(v):
        vals = [o.log_volume for o in outcomes[v] if o.log_volume != DEGENERATE]
        return float(np.mean(vals)) if vals else math.nan

    ref_lv = mean_logvol("A")
    ref_cos = [o.cosine for o in outcomes["A"]]
    ref_bus = [o.business for o in outcomes["A"]]
    rows = []
    for v in variants:
        res = outcomes[v]
        lv = mean_logvol(v)
        cos = [o.cosine for o in res]
        bus = [o.business for o in res]
        rows.append(VariantRow(
            variant=v,
            mean_relevance=float(np.mean(cos)) if cos else math.nan,
            mean_log_volume=lv,
            volume_ratio_vs_A=1.0 if v == "A" else float(math.exp(lv - ref_lv)),
            mean_business_diversity=float(np.mean(bus)) if bus else math.nan,
            degenerate_count=sum(o.log_volume == DEGENERATE for o in res),
            p_cosine_vs_A=mann_whitney_u(cos, ref_cos)[1] if cos and ref_cos else math.nan,
            p_business_vs_A=mann_whitney_u(bus, ref_bus)[1] if bus and ref_bus else math.nan,
        ))
    return EvaluationReport(rows=tuple(rows), n_users=len(users), failures=failures)


# ---------------------------------------------------------------------------
# report files


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def write_report(report: EvaluationReport, path, format: str = "csv") -> None:
    path = Path(path)
    if format == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in report.rows:
                writer.writerow([_fmt(x) for x in row.as_tuple()])
    elif format == "markdown":
        lines = ["| " + " | ".join(CSV_COLUMNS) + " |", "|" + "---|" * len(CSV_COLUMNS)]
        for row in report.rows:
            cells = [row.variant]
            cells += [f"{x:.4g}" if isinstance(x, float) else str(x) for x in row.as_tuple()[1:]]
            lines.append("| " + " | ".join(cells) + " |")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown report format {format!r}")


def read_report(path) -> EvaluationReport:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected CSV header {reader.fieldnames}")
        for rec in reader:
            rows.append(VariantRow(
                variant=rec["variant"],
                degenerate_count=int(rec["degenerate_count"]),
                **{c: float(rec[c]) for c in CSV_COLUMNS if c not in ("variant", "degenerate_count")},
            ))
    return EvaluationReport(rows=tuple(rows))


# ---------------------------------------------------------------------------
# timing


def bench_sampling(ns: Sequence[int], d: int = 64, k: int = 60, seed: int = 0, repeats: int = 7) -> dict[int, float]:
    """Median wall-clock seconds of one ``sample_k_dpp`` call per N."""
    rng = np.random.default_rng(seed)
    out = {}
    # warm-up compiles the numba kernels outside the timed region
    warm = build_kernel_factor(np.ones(max(k, d) + 1), rng.standard_normal((max(k, d) + 1, d)))
    sample_k_dpp(warm, SampleConfig(k=min(k, d)), rng)
    for n in ns:
        B = rng.standard_normal((n, d)) / math.sqrt(d)
        factor = build_kernel_factor(rng.uniform(0.1, 1.0, size=n), B)
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            sample_k_dpp(factor, SampleConfig(k=k), rng)
            times.append(time.perf_counter() - t0)
        out[n] = float(np.median(times))
    return out

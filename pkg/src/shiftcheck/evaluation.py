"""Evaluation protocol: per-(model, dataset) absolute errors, MAE, Wilcoxon
signed-rank tests with Bonferroni correction, and CSV report emission."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm, rankdata

EXACT_CUTOFF = 25
ALPHA = 0.05


@dataclass(frozen=True)
class ErrorRecord:
    model_id: str
    dataset_id: str
    method: str
    predicted_accuracy: float
    true_accuracy: float

    @property
    def absolute_error(self) -> float:
        return abs(self.predicted_accuracy - self.true_accuracy)


@dataclass(frozen=True)
class SignificanceResult:
    method_a: str
    method_b: str
    n_pairs: int
    statistic: float
    p_value_raw: float
    p_value_bonferroni: float
    n_comparisons: int
    degenerate: bool = False


@dataclass(frozen=True)
class MethodComparison:
    best_method: str
    mae_by_method: Dict[str, float]
    results: List[SignificanceResult]
    best_equivalent: List[str]


def mae(records: Sequence[ErrorRecord]) -> float:
    if not records:
        raise ValueError("empty record list")
    return float(np.mean([r.absolute_error for r in records]))


def _signed_ranks(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    d = d[d != 0.0]  # classic Wilcoxon: zero differences dropped
    ranks = rankdata(np.abs(d)) if len(d) else np.array([])
    return d, ranks


def exact_wilcoxon_p(d: np.ndarray, ranks: np.ndarray) -> float:
    """Two-sided exact p by enumerating all 2^n sign assignments.

    Implemented as a distribution convolution over doubled ranks (average
    ranks are multiples of 1/2, so doubling makes them integers); equivalent
    to full enumeration but O(n * total_rank) instead of O(2^n).
    """
    n = len(d)
    r2 = np.rint(2.0 * ranks).astype(np.int64)
    total = int(r2.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in r2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts += shifted
    w_plus2 = int(np.rint(2.0 * ranks[d > 0].sum()))
    w_obs2 = min(w_plus2, total - w_plus2)
    sums = np.arange(total + 1)
    extreme = np.minimum(sums, total - sums) <= w_obs2
    return float(counts[extreme].sum() / (2.0 ** n))


def normal_wilcoxon_p(d: np.ndarray, ranks: np.ndarray) -> float:
    """Two-sided normal approximation with tie-corrected variance and
    continuity correction."""
    n = len(d)
    w_plus = float(ranks[d > 0].sum())
    w = min(w_plus, n * (n + 1) / 2.0 - w_plus)
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(((tie_counts ** 3) - tie_counts).sum()) / 48.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
    if var <= 0.0:
        return 1.0
    z = (w - mean + 0.5) / np.sqrt(var)
    return float(min(1.0, 2.0 * norm.cdf(z)))


def wilcoxon_signed_rank(
    paired_errors_a: Sequence[float],
    paired_errors_b: Sequence[float],
    n_comparisons: int = 1,
) -> SignificanceResult:
    """Paired two-sided Wilcoxon signed-rank test.

    Exact sign-enumeration p when the effective sample size (after dropping
    zero differences) is at most 25, normal approximation beyond that.
    """
    a = np.asarray(paired_errors_a, dtype=np.float64)
    b = np.asarray(paired_errors_b, dtype=np.float64)
    if len(a) != len(b) or len(a) == 0:
        raise ValueError("need equal-length nonempty pairs")
    d, ranks = _signed_ranks(a, b)
    n = len(d)
    if n == 0:
        return SignificanceResult(
            method_a="a",
            method_b="b",
            n_pairs=0,
            statistic=0.0,
            p_value_raw=1.0,
            p_value_bonferroni=1.0,
            n_comparisons=n_comparisons,
            degenerate=True,
        )
    w_plus = float(ranks[d > 0].sum())
    statistic = min(w_plus, n * (n + 1) / 2.0 - w_plus)
    p = exact_wilcoxon_p(d, ranks) if n <= EXACT_CUTOFF else normal_wilcoxon_p(d, ranks)
    return SignificanceResult(
        method_a="a",
        method_b="b",
        n_pairs=n,
        statistic=statistic,
        p_value_raw=p,
        p_value_bonferroni=min(1.0, p * n_comparisons),
        n_comparisons=n_comparisons,
    )


def compare_methods(records: Sequence[ErrorRecord]) -> MethodComparison:
    """Find the lowest-MAE method and test it pairwise against every other,
    Bonferroni-correcting over the number of pairwise tests."""
    by_method: Dict[str, Dict[Tuple[str, str], float]] = {}
    for r in records:
        by_method.setdefault(r.method, {})[(r.model_id, r.dataset_id)] = r.absolute_error
    methods = sorted(by_method)
    if len(methods) < 2:
        raise ValueError("need at least two methods to compare")
    keys = sorted(by_method[methods[0]])
    for m in methods[1:]:
        if sorted(by_method[m]) != keys:
            raise ValueError(f"method {m!r} does not cover the same (model, dataset) pairs")

    mae_by_method = {m: float(np.mean(list(by_method[m].values()))) for m in methods}
    best = min(methods, key=lambda m: mae_by_method[m])
    others = [m for m in methods if m != best]
    n_comparisons = len(others)

    results = []
    equivalent = [best]
    for m in others:
        a = [by_method[best][k] for k in keys]
        b = [by_method[m][k] for k in keys]
        res = wilcoxon_signed_rank(a, b, n_comparisons=n_comparisons)
        res = SignificanceResult(
            method_a=best,
            method_b=m,
            n_pairs=res.n_pairs,
            statistic=res.statistic,
            p_value_raw=res.p_value_raw,
            p_value_bonferroni=res.p_value_bonferroni,
            n_comparisons=n_comparisons,
            degenerate=res.degenerate,
        )
        results.append(res)
        if res.p_value_bonferroni >= ALPHA:
            equivalent.append(m)
    return MethodComparison(
        best_method=best,
        mae_by_method=mae_by_method,
        results=results,
        best_equivalent=equivalent,
    )


def emit_report(
    records: Sequence[ErrorRecord],
    comparison: Optional[MethodComparison],
    out_dir: str,
    dataset_family: str = "all",
    group_key: Optional[Dict[Tuple[str, str], str]] = None,
) -> List[str]:
    """Write errors, scatter, summary (MAE in %) and optional per-group CSVs.

    ``group_key`` maps (model_id, dataset_id) to a grouping label such as a
    corruption severity; when given, a per-group MAE curve file is emitted.
    Returns the list of files written.
    """
    if not records:
        raise ValueError("empty record list")
    os.makedirs(out_dir, exist_ok=True)
    written = []

    errors_path = os.path.join(out_dir, "errors.csv")
    with open(errors_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["model_id", "dataset_id", "method", "predicted", "true", "abs_error"])
        for r in records:
            w.writerow(
                [
                    r.model_id,
                    r.dataset_id,
                    r.method,
                    f"{r.predicted_accuracy:.6f}",
                    f"{r.true_accuracy:.6f}",
                    f"{r.absolute_error:.6f}",
                ]
            )
    written.append(errors_path)

    scatter_path = os.path.join(out_dir, "scatter.csv")
    with open(scatter_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "predicted", "true"])
        for r in records:
            w.writerow([r.method, f"{r.predicted_accuracy:.6f}", f"{r.true_accuracy:.6f}"])
    written.append(scatter_path)

    summary_path = os.path.join(out_dir, "summary.csv")
    methods = sorted({r.method for r in records})
    p_by_method = {}
    if comparison is not None:
        p_by_method = {res.method_b: res.p_value_bonferroni for res in comparison.results}
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["dataset_family", "method", "mae_pct", "is_best", "best_equivalent", "p_bonferroni"]
        )
        for m in methods:
            m_records = [r for r in records if r.method == m]
            is_best = comparison is not None and m == comparison.best_method
            equivalent = comparison is not None and m in comparison.best_equivalent
            p = "" if is_best or m not in p_by_method else f"{p_by_method[m]:.6g}"
            w.writerow(
                [
                    dataset_family,
                    m,
                    f"{100.0 * mae(m_records):.2f}",
                    int(is_best),
                    int(equivalent),
                    p,
                ]
            )
    written.append(summary_path)

    if group_key is not None:
        groups_path = os.path.join(out_dir, "groups.csv")
        groups = sorted({group_key[(r.model_id, r.dataset_id)] for r in records})
        with open(groups_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["group", "method", "mae_pct"])
            for g in groups:
                for m in methods:
                    subset = [
                        r
                        for r in records
                        if r.method == m and group_key[(r.model_id, r.dataset_id)] == g
                    ]
                    if subset:
                        w.writerow([g, m, f"{100.0 * mae(subset):.2f}"])
        written.append(groups_path)
    return written

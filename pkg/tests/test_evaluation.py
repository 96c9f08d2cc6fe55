import csv
import itertools

import numpy as np
import pytest
from scipy.stats import rankdata

from shiftcheck.evaluation import (
    ErrorRecord,
    compare_methods,
    emit_report,
    exact_wilcoxon_p,
    mae,
    normal_wilcoxon_p,
    wilcoxon_signed_rank,
)


def _record(method, predicted, true, model="m", dataset="d"):
    return ErrorRecord(
        model_id=model,
        dataset_id=dataset,
        method=method,
        predicted_accuracy=predicted,
        true_accuracy=true,
    )


def test_mae_basic():
    records = [_record("a", 0.5, 0.6), _record("a", 0.5, 0.2)]
    assert mae(records) == pytest.approx(0.2)


def test_mae_single_record():
    assert mae([_record("a", 0.9, 0.7)]) == pytest.approx(0.2)


def test_mae_zero_when_exact():
    records = [_record("a", x, x) for x in (0.1, 0.5, 0.9)]
    assert mae(records) == 0.0


def test_mae_empty_errors():
    with pytest.raises(ValueError):
        mae([])


def test_mae_scales_linearly():
    base = [_record("a", 0.5 + e, 0.5) for e in (0.1, 0.2, 0.3)]
    doubled = [_record("a", 0.5 + 2 * e, 0.5) for e in (0.1, 0.2, 0.3)]
    assert mae(doubled) == pytest.approx(2 * mae(base))


def brute_force_p(d):
    """Enumerate every sign assignment explicitly (small n only)."""
    ranks = rankdata(np.abs(d))
    total = ranks.sum()
    w_plus = ranks[np.asarray(d) > 0].sum()
    w_obs = min(w_plus, total - w_plus)
    hits = 0
    for signs in itertools.product([0, 1], repeat=len(d)):
        w = ranks[np.asarray(signs, dtype=bool)].sum()
        if min(w, total - w) <= w_obs + 1e-12:
            hits += 1
    return hits / 2 ** len(d)


def test_exact_p_for_three_positive_diffs():
    res = wilcoxon_signed_rank([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
    assert res.statistic == 0.0
    assert res.p_value_raw == 0.25
    assert res.p_value_raw == pytest.approx(brute_force_p([1.0, 2.0, 3.0]))


def test_exact_p_matches_explicit_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(10):
        n = int(rng.integers(3, 11))
        d = rng.normal(size=n)
        ranks = rankdata(np.abs(d))
        assert exact_wilcoxon_p(d, ranks) == pytest.approx(brute_force_p(d), abs=1e-12)


def test_degenerate_all_zero_differences():
    res = wilcoxon_signed_rank([1.0, 2.0], [1.0, 2.0])
    assert res.degenerate
    assert res.p_value_raw == 1.0


def test_symmetry_in_arguments():
    rng = np.random.default_rng(1)
    a = rng.normal(size=15)
    b = rng.normal(size=15)
    assert wilcoxon_signed_rank(a, b).p_value_raw == pytest.approx(
        wilcoxon_signed_rank(b, a).p_value_raw
    )


def test_normal_approximation_close_to_exact():
    rng = np.random.default_rng(2)
    for _ in range(20):
        d = rng.normal(size=12)
        ranks = rankdata(np.abs(d))
        assert abs(exact_wilcoxon_p(d, ranks) - normal_wilcoxon_p(d, ranks)) < 0.02


def test_matches_scipy_exact_where_comparable():
    from scipy.stats import wilcoxon as scipy_wilcoxon

    rng = np.random.default_rng(3)
    d = rng.normal(size=10)
    res = wilcoxon_signed_rank(d, np.zeros(10))
    want = scipy_wilcoxon(d, mode="exact").pvalue
    assert res.p_value_raw == pytest.approx(want, abs=1e-12)


def test_bonferroni_monotone_and_capped():
    res = wilcoxon_signed_rank([1.0, 2.0, 3.0], [0.0, 0.0, 0.0], n_comparisons=3)
    assert res.p_value_bonferroni == pytest.approx(0.75)
    res = wilcoxon_signed_rank([1.0, 2.0, 3.0], [0.0, 0.0, 0.0], n_comparisons=50)
    assert res.p_value_bonferroni == 1.0


def test_mismatched_lengths_error():
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([1.0], [1.0, 2.0])


def _paired_records(errors_by_method):
    records = []
    for method, errors in errors_by_method.items():
        for i, e in enumerate(errors):
            records.append(_record(method, 0.5 + e, 0.5, model=f"m{i}"))
    return records


def test_identical_methods_both_best_equivalent():
    errors = list(np.linspace(0.01, 0.2, 12))
    comparison = compare_methods(_paired_records({"a": errors, "b": errors}))
    assert set(comparison.best_equivalent) == {"a", "b"}


def test_strict_domination_detected():
    rng = np.random.default_rng(4)
    base = rng.random(30) * 0.1
    comparison = compare_methods(_paired_records({"a": base, "b": base + 0.05}))
    assert comparison.best_method == "a"
    assert comparison.best_equivalent == ["a"]
    assert comparison.results[0].p_value_bonferroni < 0.05


def test_three_methods_two_comparisons():
    rng = np.random.default_rng(5)
    base = rng.random(10) * 0.1
    comparison = compare_methods(
        _paired_records({"a": base, "b": base + 0.01, "c": base + 0.02})
    )
    assert all(res.n_comparisons == 2 for res in comparison.results)
    assert len(comparison.results) == 2


def test_mismatched_coverage_errors():
    records = _paired_records({"a": [0.1, 0.2], "b": [0.1, 0.2]})
    records.append(_record("b", 0.6, 0.5, model="extra"))
    with pytest.raises(ValueError, match="cover"):
        compare_methods(records)


def test_emit_report_files(tmp_path):
    records = _paired_records({"a": [0.1, 0.2, 0.3], "b": [0.2, 0.3, 0.4]})
    comparison = compare_methods(records)
    files = emit_report(records, comparison, str(tmp_path), dataset_family="toy")
    assert len(files) == 3
    with open(tmp_path / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert rows[0]["dataset_family"] == "toy"
    assert rows[0]["method"] == "a" and rows[0]["is_best"] == "1"
    assert rows[0]["mae_pct"] == "20.00"
    with open(tmp_path / "errors.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 6
    with open(tmp_path / "scatter.csv") as fh:
        header = fh.readline().strip()
    assert header == "method,predicted,true"


def test_emit_report_grouped(tmp_path):
    records = []
    group_key = {}
    for severity in range(1, 6):
        for method in ("a", "b"):
            records.append(
                _record(method, 0.5 + 0.01 * severity, 0.5, model="m", dataset=f"d{severity}")
            )
        group_key[("m", f"d{severity}")] = str(severity)
    files = emit_report(records, None, str(tmp_path), group_key=group_key)
    with open(tmp_path / "groups.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 10  # 5 severities x 2 methods


def test_emit_report_empty_errors(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], None, str(tmp_path))

import numpy as np
import pytest

from shiftcheck.calibration import ConfidenceVector
from shiftcheck.confidence import atc_estimate, doc_estimate, fit_atc


def sort_and_count_oracle(val_conf, correct, test_conf):
    """Independent oracle: pick the k-th smallest confidence by sorting, then
    count strict exceedances on the test side."""
    n = len(val_conf)
    err = 1.0 - np.mean(correct)
    k = int(round(err * n))
    t = 0.0 if k == 0 else sorted(val_conf)[k - 1]
    return t, float(np.mean(np.asarray(test_conf) > t))


def _cv(conf, pred=None):
    conf = np.asarray(conf, dtype=np.float64)
    if pred is None:
        pred = np.zeros(len(conf), dtype=np.int64)
    return ConfidenceVector(conf=conf, pred=np.asarray(pred))


def test_worked_fit_and_estimate_example():
    val_conf = _cv([0.2, 0.4, 0.6, 0.8, 1.0])
    labels = np.array([1, 1, 0, 0, 0])  # first two wrong, rest right
    model = fit_atc(val_conf, labels)
    t_oracle, est_oracle = sort_and_count_oracle(
        val_conf.conf, val_conf.pred == labels, [0.3, 0.5, 0.9]
    )
    assert model.global_threshold == pytest.approx(0.4)
    assert model.global_threshold == pytest.approx(t_oracle)
    est, kept = atc_estimate(_cv([0.3, 0.5, 0.9]), model)
    assert est == pytest.approx(2.0 / 3.0)
    assert est == pytest.approx(est_oracle)
    np.testing.assert_array_equal(kept, [False, True, True])


def test_perfect_validation_passes_everything():
    val_conf = _cv([0.5, 0.6, 0.7])
    model = fit_atc(val_conf, np.zeros(3, dtype=int))
    est, kept = atc_estimate(_cv([0.01, 0.4, 0.99]), model)
    assert est == 1.0
    assert kept.all()


def test_self_consistency_bound():
    rng = np.random.default_rng(8)
    for _ in range(20):
        n = int(rng.integers(20, 200))
        conf = rng.random(n) * 0.8 + 0.2
        pred = rng.integers(0, 3, size=n)
        labels = np.where(rng.random(n) < 0.7, pred, (pred + 1) % 3)
        cv = _cv(conf, pred)
        model = fit_atc(cv, labels)
        est, _ = atc_estimate(cv, model)
        truth = float((pred == labels).mean())
        assert abs(est - truth) <= 1.0 / n + 1e-12


def test_estimate_monotone_in_threshold():
    from shiftcheck.confidence import AtcModel

    conf = _cv(np.linspace(0.1, 0.9, 30))
    estimates = [
        atc_estimate(conf, AtcModel(global_threshold=t))[0] for t in np.linspace(0, 1, 15)
    ]
    assert all(a >= b for a, b in zip(estimates, estimates[1:]))


def test_empty_test_set_errors():
    model = fit_atc(_cv([0.5]), np.array([0]))
    with pytest.raises(ValueError, match="empty test set"):
        atc_estimate(_cv([]), model)


def test_empty_validation_errors():
    with pytest.raises(ValueError, match="empty validation"):
        fit_atc(_cv([]), np.array([], dtype=int))


def test_classwise_all_invalid_reproduces_global():
    rng = np.random.default_rng(9)
    conf = rng.random(30)
    pred = rng.integers(0, 4, size=30)  # ~8 per class, all below min_samples
    labels = rng.integers(0, 4, size=30)
    cv = _cv(conf, pred)
    global_model = fit_atc(cv, labels, classwise=False)
    cs_model = fit_atc(cv, labels, classwise=True, min_samples=20, n_classes=4)
    assert not cs_model.per_class_valid.any()
    est_g, kept_g = atc_estimate(cv, global_model)
    est_c, kept_c = atc_estimate(cv, cs_model)
    assert est_g == est_c
    np.testing.assert_array_equal(kept_g, kept_c)


def test_classwise_uses_per_class_thresholds():
    conf = np.concatenate([np.linspace(0.3, 0.9, 25), np.linspace(0.5, 0.99, 25)])
    pred = np.concatenate([np.zeros(25, dtype=int), np.ones(25, dtype=int)])
    labels = pred.copy()
    labels[:5] = 1  # class 0 has 20% error, class 1 none
    cv = _cv(conf, pred)
    model = fit_atc(cv, labels, classwise=True, min_samples=20, n_classes=2)
    assert model.per_class_valid.all()
    assert model.per_class_threshold[0] > model.per_class_threshold[1]


def test_doc_direct_formula():
    # acc_val 0.9, mean val conf 0.85, mean test conf 0.75 -> 0.8
    pred = np.zeros(10, dtype=int)
    labels = np.zeros(10, dtype=int)
    labels[0] = 1
    val = _cv(np.full(10, 0.85), pred)
    test = _cv(np.full(7, 0.75))
    assert doc_estimate(val, labels, test) == pytest.approx(0.9 - (0.85 - 0.75))


def test_doc_identity_on_validation():
    rng = np.random.default_rng(10)
    pred = rng.integers(0, 3, size=50)
    labels = np.where(rng.random(50) < 0.8, pred, (pred + 1) % 3)
    cv = _cv(rng.random(50), pred)
    assert doc_estimate(cv, labels, cv) == float((pred == labels).mean())


def test_doc_clamped_to_zero():
    pred = np.zeros(10, dtype=int)
    labels = np.zeros(10, dtype=int)
    labels[:5] = 1  # acc 0.5
    val = _cv(np.full(10, 0.99), pred)
    test = _cv(np.full(10, 0.10))
    assert doc_estimate(val, labels, test) == 0.0


def test_doc_empty_errors():
    with pytest.raises(ValueError, match="empty"):
        doc_estimate(_cv([]), np.array([], dtype=int), _cv([0.5]))

import math

import numpy as np
import pytest

from hotpursuit.survival import kaplan_meier, log_rank


def test_no_captures_is_flat_one():
    curve = kaplan_meier([(40, False)] * 10, horizon=40)
    for t in range(0, 41, 5):
        assert curve.survival_at(t) == 1.0


def test_single_event_halves_survival():
    curve = kaplan_meier([(1, True), (40, False)], horizon=40)
    assert curve.survival_at(0) == 1.0
    assert curve.survival_at(1) == pytest.approx(0.5)
    assert curve.survival_at(40) == pytest.approx(0.5)


def test_hand_computed_product_limit():
    # 10 subjects: two captured at t=3 (n=10), one censored at t=4 (still at
    # risk through the t=5 event), one captured at t=5 (n=8):
    # S(5) = (1 - 2/10) * (1 - 1/8) = 0.7
    data = [(3, True), (3, True), (4, False), (5, True)]
    data += [(40, False)] * 6
    curve = kaplan_meier(data, horizon=40)
    assert curve.at_risk == [10, 8]
    assert curve.events == [2, 1]
    assert curve.survival_at(5) == pytest.approx(0.7)
    assert curve.survival_at(3) == pytest.approx(0.8)
    assert curve.survival_at(2) == 1.0


def test_kaplan_meier_equals_empirical_without_censoring():
    rng = np.random.default_rng(3)
    times = rng.integers(1, 20, size=50)
    data = [(int(t), True) for t in times]
    curve = kaplan_meier(data, horizon=25)
    for t in range(0, 26):
        empirical = np.mean(times > t)
        assert curve.survival_at(t) == pytest.approx(empirical, abs=1e-12)


def test_kaplan_meier_monotone_and_bounded():
    rng = np.random.default_rng(5)
    data = [(int(t), bool(c)) for t, c in
            zip(rng.integers(0, 41, 80), rng.random(80) < 0.7)]
    curve = kaplan_meier(data, horizon=40)
    values = [curve.survival_at(t) for t in range(41)]
    assert all(0.0 <= v <= 1.0 for v in values)
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_kaplan_meier_input_validation():
    with pytest.raises(ValueError):
        kaplan_meier([], horizon=40)
    with pytest.raises(ValueError):
        kaplan_meier([(-1, True)], horizon=40)
    with pytest.raises(ValueError):
        kaplan_meier([(41, True)], horizon=40)


def test_survival_csv_shape(tmp_path):
    curve = kaplan_meier([(3, True), (40, False)], horizon=40)
    path = tmp_path / "curve.csv"
    curve.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "time,survival_probability"
    assert len(lines) == 42
    assert lines[1] == "0,1.000000"
    assert lines[4] == "3,0.500000"


def test_log_rank_identical_groups():
    group = [(t, True) for t in (2, 5, 9)] + [(40, False)] * 3
    chi2, p = log_rank(group, list(group))
    assert chi2 == pytest.approx(0.0)
    assert p >= 0.99


def test_log_rank_all_versus_none():
    group_a = [(1, True)] * 20
    group_b = [(40, False)] * 20
    chi2, p = log_rank(group_a, group_b)
    # hand table: only event time t=1, O_a=20, E_a=10,
    # V = 20 * 0.5 * 0.5 * 20/39 = 100/39, chi2 = 100/(100/39) = 39
    assert chi2 == pytest.approx(39.0)
    assert p == pytest.approx(math.erfc(math.sqrt(39.0 / 2.0)), rel=1e-12)
    assert p < 0.001


def test_log_rank_textbook_two_group_example():
    # Hand-computed O/E/V table. Group A events at 1 and 3 (n=4 subjects),
    # group B event at 2 (n=4 subjects); everyone else censored at 10.
    group_a = [(1, True), (3, True), (10, False), (10, False)]
    group_b = [(2, True), (10, False), (10, False), (10, False)]

    # t=1: n_a=4, n_b=4, d_a=1  -> E_a=0.5,   V=0.25
    # t=2: n_a=3, n_b=4, d_b=1  -> E_a=3/7,   V=12/49
    # t=3: n_a=3, n_b=3, d_a=1  -> E_a=0.5,   V=0.25
    o_minus_e = (1 - 0.5) + (0 - 3 / 7) + (1 - 0.5)
    variance = 0.25 + 12 / 49 + 0.25
    expected_chi2 = o_minus_e ** 2 / variance
    chi2, p = log_rank(group_a, group_b)
    assert chi2 == pytest.approx(expected_chi2, abs=1e-6)
    assert p == pytest.approx(math.erfc(math.sqrt(expected_chi2 / 2)),
                              abs=1e-9)


def test_log_rank_symmetric_in_group_labels():
    rng = np.random.default_rng(7)
    group_a = [(int(t), bool(c)) for t, c in
               zip(rng.integers(0, 40, 30), rng.random(30) < 0.8)]
    group_b = [(int(t), bool(c)) for t, c in
               zip(rng.integers(0, 40, 25), rng.random(25) < 0.6)]
    chi_ab, p_ab = log_rank(group_a, group_b)
    chi_ba, p_ba = log_rank(group_b, group_a)
    assert chi_ab == pytest.approx(chi_ba, abs=1e-12)
    assert p_ab == pytest.approx(p_ba, abs=1e-12)


def test_log_rank_degenerate_no_events():
    chi2, p = log_rank([(40, False)] * 5, [(40, False)] * 5)
    assert (chi2, p) == (0.0, 1.0)
    with pytest.raises(ValueError):
        log_rank([], [(40, False)])

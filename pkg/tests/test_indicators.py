import numpy as np
import pytest

from hotpursuit.indicators import gd_family, hypervolume, indicator_report


def _double_loop_oracle(p, p_star, exponent, plus, inverted):
    """Deliberately naive re-implementation with explicit loops."""
    outer, inner = (p_star, p) if inverted else (p, p_star)
    total = 0.0
    for a in outer:
        best = None
        for z in inner:
            if plus:
                # positive part always taken on the approximation side
                gap = (a - z) if not inverted else (z - a)
                d = np.linalg.norm(np.maximum(gap, 0.0))
            else:
                d = np.linalg.norm(a - z)
            best = d if best is None else min(best, d)
        total += best ** exponent
    return (total / len(outer)) ** (1.0 / exponent)


def test_gd_family_zero_on_identical_sets():
    pts = np.random.default_rng(0).random((12, 3))
    for plus in (False, True):
        for inverted in (False, True):
            assert gd_family(pts, pts, plus=plus, inverted=inverted) \
                == pytest.approx(0.0, abs=1e-12)


def test_gd_single_pair_distance():
    assert gd_family([[1.0, 1.0]], [[0.0, 0.0]]) == pytest.approx(np.sqrt(2))


def test_gd_family_matches_double_loop_oracle():
    rng = np.random.default_rng(3)
    p = rng.random((20, 3))
    p_star = rng.random((20, 3))
    for plus in (False, True):
        for inverted in (False, True):
            got = gd_family(p, p_star, plus=plus, inverted=inverted)
            want = _double_loop_oracle(p, p_star, 2, plus, inverted)
            assert got == pytest.approx(want, abs=1e-12)


def test_plus_variants_never_exceed_plain():
    rng = np.random.default_rng(9)
    for _ in range(10):
        p = rng.random((15, 3))
        p_star = rng.random((10, 3))
        assert gd_family(p, p_star, plus=True) <= gd_family(p, p_star) + 1e-12
        assert gd_family(p, p_star, plus=True, inverted=True) \
            <= gd_family(p, p_star, inverted=True) + 1e-12


def test_gd_family_input_validation():
    with pytest.raises(ValueError):
        gd_family([], [[0.0, 0.0]])
    with pytest.raises(ValueError):
        gd_family([[0.0, 0.0]], [[0.0, 0.0, 0.0]])


def test_hypervolume_unit_square():
    assert hypervolume([[0.0, 0.0]], [1.0, 1.0]) == pytest.approx(1.0)


def test_hypervolume_two_rectangles():
    got = hypervolume([[0.0, 0.5], [0.5, 0.0]], [1.0, 1.0])
    assert got == pytest.approx(0.75)


def test_hypervolume_ignores_dominated_points():
    base = hypervolume([[0.0, 0.5], [0.5, 0.0]], [1.0, 1.0])
    with_dominated = hypervolume([[0.0, 0.5], [0.5, 0.0], [0.6, 0.6]],
                                 [1.0, 1.0])
    assert with_dominated == pytest.approx(base)


def test_hypervolume_monotone_under_new_point():
    rng = np.random.default_rng(5)
    pts = rng.random((8, 3))
    ref = np.array([1.0, 1.0, 1.0])
    base = hypervolume(pts, ref)
    extra = np.vstack([pts, rng.random(3)])
    assert hypervolume(extra, ref) >= base - 1e-12


def test_hypervolume_rejects_non_dominating_point():
    with pytest.raises(ValueError):
        hypervolume([[0.5, 1.5]], [1.0, 1.0])
    with pytest.raises(ValueError):
        hypervolume([[0.1, 0.1]], [1.0, 1.0, 1.0])


def test_hypervolume_3d_simple_boxes():
    # one point: box volume; two nested boxes by hand
    assert hypervolume([[0.0, 0.0, 0.0]], [1.0, 1.0, 1.0]) \
        == pytest.approx(1.0)
    got = hypervolume([[0.5, 0.5, 0.0], [0.0, 0.0, 0.5]], [1.0, 1.0, 1.0])
    # slab z in [0, 0.5): only the first point: each slice area 0.25
    # slab z in [0.5, 1]: union of 0.25 and the full unit square: 1.0
    assert got == pytest.approx(0.25 * 0.5 + 1.0 * 0.5)


def test_hypervolume_3d_matches_monte_carlo():
    rng = np.random.default_rng(11)
    pts = rng.random((12, 3)) * 0.9
    ref = np.array([1.0, 1.0, 1.0])
    exact = hypervolume(pts, ref)
    samples = rng.random((1_000_000, 3))
    dominated = np.zeros(len(samples), dtype=bool)
    for p in pts:
        dominated |= np.all(samples >= p, axis=1)
    estimate = dominated.mean()  # reference box has unit volume
    assert exact == pytest.approx(estimate, rel=0.01)


def test_indicator_report_fields():
    rng = np.random.default_rng(13)
    approx = rng.random((10, 3)) * 0.8
    truth = rng.random((10, 3)) * 0.8
    report = indicator_report(approx, truth, (1.0, 1.0, 1.0))
    data = report.to_dict()
    for key in ("gd", "gd_plus", "igd", "igd_plus", "hypervolume"):
        assert np.isfinite(data[key]) and data[key] >= 0.0
    assert data["reference"] == [1.0, 1.0, 1.0]

import numpy as np
import pytest

from covrepro.errors import DimensionMismatch, EmptyGrid, NotPositiveDefinite
from covrepro.metrics import (
    block_offdiag_ssq,
    delta_pair,
    loading_grid,
    offdiag_msq,
    paper_grid,
    threshold_scan,
)
from covrepro.model import ModelSet, ModelSetSpec, build_simple_structure, implied_sigma
from covrepro.predictors import reproduce_from_weights
from covrepro.verify import closed_form_ssq_pq3


def model(set_id, q, m, l):
    return build_simple_structure(ModelSetSpec(set_id, q, m, l))


def test_msq_identical_is_zero():
    s = implied_sigma(model("Set1", 2, 3, 0.5))
    assert offdiag_msq(s, s) == 0.0


def test_msq_constant_residual():
    target = np.full((3, 3), 0.25)
    np.fill_diagonal(target, 1.0)
    assert offdiag_msq(target, np.eye(3)) == pytest.approx(0.0625)
    assert offdiag_msq(target, np.eye(3), "all") == pytest.approx(0.0625 * 6 / 9)


def test_msq_ignores_diagonal():
    assert offdiag_msq(np.eye(3), 5 * np.eye(3)) == 0.0


def test_msq_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        offdiag_msq(np.eye(3), np.eye(4))
    with pytest.raises(ValueError):
        offdiag_msq(np.eye(3), np.eye(3), "bogus")


def test_delta_pair_q1_p3_half():
    dp = delta_pair(model("Set1", 1, 3, 0.5))
    s = 0.25
    assert dp.delta_b == pytest.approx(2 * (s - s * s) ** 2 / 6, abs=1e-15)
    assert dp.delta_r == pytest.approx(6 * (1 / 3 - s / 3) ** 2 / 6, abs=1e-15)
    assert dp.delta_b == pytest.approx(0.01171875, abs=1e-15)
    assert dp.delta_r == pytest.approx(0.0625, abs=1e-15)
    assert dp.gap == dp.delta_r - dp.delta_b > 0


@pytest.mark.parametrize("l", [0.3, 0.55, 0.8, 0.95])
def test_delta_pair_two_per_factor(l):
    dp = delta_pair(model("Set1", 3, 2, l))
    assert dp.delta_b < 1e-30
    assert dp.gap == pytest.approx(dp.delta_r)
    assert dp.gap >= 0


def test_delta_pair_gap_zero_at_h():
    dp = delta_pair(model("Set1", 1, 3, 3 ** -0.25))
    assert abs(dp.gap) < 1e-6


@pytest.mark.parametrize("sigma", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
@pytest.mark.parametrize("q", [1, 3])
def test_pipeline_matches_closed_forms(sigma, q):
    m = model("Set1", q, 3, np.sqrt(sigma))
    s = implied_sigma(m)
    single, conventional = closed_form_ssq_pq3(s[0, 1])
    p = 3 * q
    dp = delta_pair(m, s)
    assert dp.delta_b == pytest.approx(q * single / (p * (p - 1)), abs=1e-12)
    assert dp.delta_r == pytest.approx(q * conventional / (p * (p - 1)), abs=1e-12)


def test_gap_sign_invariant_to_denominator(rng):
    for _ in range(20):
        set_id = ModelSet(rng.choice([s.value for s in ModelSet]))
        grid = paper_grid(set_id)
        m = model(set_id, int(rng.integers(1, 6)), int(rng.integers(2, 9)), grid[rng.integers(len(grid))])
        a = delta_pair(m, denominator="offdiag")
        b = delta_pair(m, denominator="all")
        assert np.sign(a.gap) == np.sign(b.gap)
        p = m.p
        assert b.delta_r == pytest.approx(a.delta_r * (p - 1) / p, rel=1e-12)


def test_per_block_ssq_independent_of_q_for_set1():
    # the global MSQ dilutes with q; per-block SSQ does not
    ref = None
    for q in (1, 3, 5):
        m = model("Set1", q, 4, 0.5)
        s = implied_sigma(m)
        from covrepro.predictors import closed_form_reproduced

        blocks = block_offdiag_ssq(s, closed_form_reproduced(m.loadings, s), 4)
        assert np.allclose(blocks, blocks[0], atol=1e-14)
        if ref is None:
            ref = blocks[0]
        assert blocks[0] == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("set_id", ["Set1", "Set2"])
def test_gap_sign_same_across_q(set_id):
    for m in range(2, 11):
        for l in paper_grid(set_id):
            signs = {np.sign(delta_pair(model(set_id, q, m, l)).gap) for q in (1, 3, 5)}
            assert len(signs) == 1, (m, l, signs)


def test_threshold_fine_grid_per_factor_3():
    res = threshold_scan("Set1", 1, 3, loading_grid(0.25, 0.95, 0.001))
    assert 0.759 <= res.threshold <= 0.761
    assert not res.censored
    assert res.grid_step == 0.001


def test_threshold_censored_for_two_per_factor():
    res = threshold_scan("Set1", 1, 2)
    assert res.censored and res.threshold == 0.95


def test_threshold_decreases_with_per_factor():
    t3 = threshold_scan("Set1", 1, 3).threshold
    t10 = threshold_scan("Set1", 1, 10).threshold
    assert t10 < t3


def test_threshold_none_when_never_positive():
    res = threshold_scan("Set1", 1, 10, [0.85, 0.9])
    assert res.threshold is None and not res.censored


def test_threshold_errors():
    with pytest.raises(EmptyGrid):
        threshold_scan("Set1", 1, 3, [])
    with pytest.raises(ValueError):
        threshold_scan("Set1", 1, 3, [0.5, 0.4])


def test_loading_grid_is_clean():
    g = paper_grid("Set1")
    assert g[0] == 0.25 and g[-1] == 0.95 and len(g) == 15
    assert paper_grid("Set2")[-1] == 0.85
    assert 0.4 in g


def test_singular_component_covariance_raises():
    s = implied_sigma(model("Set1", 1, 3, 0.5))
    b = np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
    with pytest.raises(NotPositiveDefinite):
        reproduce_from_weights(b, s)


def test_oblique_gap_depends_on_q():
    # single-variable cross-block residuals grow with q when factors correlate
    gaps = [delta_pair(model("Set3", q, 5, 0.5)).gap for q in (1, 3, 5)]
    assert gaps[0] > 0 > gaps[2]

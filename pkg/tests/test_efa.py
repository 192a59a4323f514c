import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covrepro.efa import (
    align_columns,
    correlation_matrix,
    loadings_for_uniquenesses,
    offdiag_residual_ssq,
    promax,
    rotate,
    sample_data,
    uls_extract,
    varimax,
    varimax_criterion,
)
from covrepro.errors import ZeroVarianceColumn
from covrepro.model import ModelSetSpec, build_simple_structure, implied_sigma
from covrepro.predictors import closed_form_reproduced


def model(set_id, q, m, l):
    return build_simple_structure(ModelSetSpec(set_id, q, m, l))


# ---------------------------------------------------------------- data


def test_sample_data_deterministic():
    m = model("Set3", 3, 4, 0.6)
    a = sample_data(m, 200, (7, 1, 2))
    b = sample_data(m, 200, (7, 1, 2))
    assert a.values.tobytes() == b.values.tobytes()
    c = sample_data(m, 200, (7, 1, 3))
    assert not np.array_equal(a.values, c.values)


def test_sample_data_law_of_large_numbers():
    r = correlation_matrix(sample_data(model("Set1", 1, 3, 0.6), 100_000, (1, 0, 0)))
    off = r[~np.eye(3, dtype=bool)]
    assert np.all(np.abs(off - 0.36) < 0.01)


def test_sample_data_independent_case():
    n = 5000
    r = correlation_matrix(sample_data(model("Set1", 1, 4, 1e-6), n, (3, 0, 0)))
    assert np.all(np.abs(r[~np.eye(4, dtype=bool)]) < 3 / np.sqrt(n))


def test_sample_data_requires_enough_rows():
    with pytest.raises(ValueError):
        sample_data(model("Set1", 1, 4, 0.5), 4, (0,))


def test_correlation_matrix_basics(rng):
    x = rng.normal(size=(50, 3))
    x[:, 1] = x[:, 0]
    x[:, 2] = -x[:, 0]
    r = correlation_matrix(x)
    assert r[0, 1] == pytest.approx(1.0) and r[0, 2] == pytest.approx(-1.0)
    assert np.all(np.diag(r) == 1.0)


def test_correlation_matrix_affine_invariance(rng):
    x = rng.normal(size=(80, 4))
    y = x.copy()
    y[:, 2] = 3.5 * y[:, 2] - 10
    assert np.max(np.abs(correlation_matrix(x) - correlation_matrix(y))) < 1e-12


def test_correlation_matrix_psd(rng):
    r = correlation_matrix(rng.normal(size=(30, 10)))
    assert np.linalg.eigvalsh(r)[0] > -1e-10
    assert np.all(np.abs(r) <= 1)


def test_correlation_zero_variance():
    x = np.ones((10, 2))
    x[:, 0] = np.arange(10)
    with pytest.raises(ZeroVarianceColumn) as exc:
        correlation_matrix(x)
    assert exc.value.column == 1


# ---------------------------------------------------------------- extraction


def test_uls_noiseless_one_factor():
    sol = uls_extract(implied_sigma(model("Set1", 1, 6, 0.6)), 1)
    assert sol.converged
    assert np.allclose(sol.unrotated[:, 0], 0.6, atol=1e-4)
    assert np.allclose(sol.psi2_hat, 0.64, atol=1e-4)


def test_uls_noiseless_two_factor_reproduction():
    m = model("Set1", 2, 4, 0.7)
    s = implied_sigma(m)
    sol = uls_extract(s, 2)
    a = closed_form_reproduced(sol.unrotated, s)
    b = closed_form_reproduced(m.loadings, s)
    assert np.max(np.abs(a - b)) < 1e-6


def test_uls_degenerate_identity():
    sol = uls_extract(np.eye(4), 3)
    zero_ssq = offdiag_residual_ssq(np.eye(4), np.zeros((4, 4)))
    ssq = offdiag_residual_ssq(np.eye(4), sol.unrotated @ sol.unrotated.T)
    assert (not sol.converged) or np.max(np.abs(sol.unrotated)) < 1e-6
    assert ssq <= zero_ssq + 1e-12


def test_uls_iteration_cap_flags_nonconvergence():
    r = correlation_matrix(sample_data(model("Set1", 3, 4, 0.5), 150, (5, 0, 0)))
    sol = uls_extract(r, 3, max_iter=2)
    assert not sol.converged and sol.iterations == 2


def test_uls_heywood_clamp():
    # exact one-factor fit needs communality r12 * r13 / r23 = 1.62 for variable 1
    r = np.array([[1.0, 0.9, 0.9, 0.3], [0.9, 1.0, 0.5, 0.3], [0.9, 0.5, 1.0, 0.3], [0.3, 0.3, 0.3, 1.0]])
    sol = uls_extract(r, 1)
    assert sol.heywood_clamped >= 1
    assert np.all(sol.psi2_hat >= 0.001 - 1e-15)


@pytest.mark.parametrize("seed", range(20))
def test_uls_local_optimality(seed):
    rng = np.random.default_rng(seed)
    q = int(rng.integers(1, 4))
    m = model("Set1", q, int(rng.integers(3, 6)), float(rng.choice([0.4, 0.6, 0.8])))
    r = correlation_matrix(sample_data(m, 300, (seed, 99)))
    sol = uls_extract(r, q, tol=1e-10, max_iter=20000)
    if sol.heywood_clamped:
        pytest.skip("boundary solution")
    base = offdiag_residual_ssq(r, sol.unrotated @ sol.unrotated.T)
    for i in range(r.shape[0]):
        for d in (-0.01, 0.01):
            psi = sol.psi2_hat.copy()
            psi[i] += d
            lam = loadings_for_uniquenesses(r, psi, q)
            assert offdiag_residual_ssq(r, lam @ lam.T) > base - 1e-8


# ---------------------------------------------------------------- rotation


def test_varimax_fixed_point_on_simple_structure():
    lam = model("Set2", 3, 4, 0.6).loadings
    out, t = varimax(lam)
    matched = align_columns(out, lam)
    assert np.max(np.abs(matched - lam)) < 1e-8


def test_varimax_recovers_rotated_simple_structure(rng):
    lam = model("Set1", 3, 4, 0.7).loadings
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    out, t = varimax(lam @ q)
    assert np.max(np.abs(align_columns(out, lam) - lam)) < 1e-6


def test_varimax_single_factor_identity():
    lam = np.array([[0.5], [0.6]])
    out, t = varimax(lam)
    assert np.array_equal(t, np.eye(1)) and np.array_equal(out, lam)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(4, 15), q=st.integers(2, 4))
def test_varimax_ascent_and_orthogonality(seed, p, q):
    a = np.random.default_rng(seed).normal(size=(p, q))
    out, t = varimax(a)
    assert np.max(np.abs(t.T @ t - np.eye(q))) < 1e-10
    assert np.allclose(out, a @ t)
    assert varimax_criterion(out) >= varimax_criterion(a) - 1e-12


def test_varimax_brute_force_two_factors(rng):
    a = rng.normal(size=(10, 2))
    angles = np.linspace(0, np.pi / 2, 20001)
    best = max(
        varimax_criterion(a @ np.array([[np.cos(x), -np.sin(x)], [np.sin(x), np.cos(x)]]))
        for x in angles
    )
    assert varimax_criterion(varimax(a)[0]) >= best - 1e-8


@pytest.mark.parametrize("set_id, phi", [("Set1", 0.0), ("Set3", 0.4)])
def test_promax_noiseless(set_id, phi):
    m = model(set_id, 3, 5, 0.6)
    sol = uls_extract(implied_sigma(m), 3)
    pattern, phi_hat, t = promax(sol.unrotated)
    off = phi_hat[~np.eye(3, dtype=bool)]
    assert np.all(np.abs(off - phi) < 0.05)
    assert np.allclose(np.diag(phi_hat), 1.0)
    assert np.allclose(pattern, sol.unrotated @ t)


def test_promax_power_one_is_varimax():
    lam = model("Set1", 3, 4, 0.6).loadings
    vm, _ = varimax(lam)
    pattern, phi, _ = promax(lam, power=1)
    assert np.max(np.abs(pattern - vm)) < 1e-6
    assert np.allclose(phi, np.eye(3), atol=1e-6)


@pytest.mark.parametrize("method", ["varimax", "promax"])
def test_rotation_preserves_fit(method):
    m = model("Set3", 3, 4, 0.6)
    r = correlation_matrix(sample_data(m, 300, (11,)))
    sol = uls_extract(r, 3)
    rot = rotate(sol, method)
    before = offdiag_residual_ssq(r, sol.unrotated @ sol.unrotated.T)
    after = offdiag_residual_ssq(r, rot.loadings @ rot.phi_hat @ rot.loadings.T)
    assert abs(before - after) < 1e-10


def test_estimates_are_consistent():
    # n = 900, q = 3, p/q = 5, l = .60, orthogonal, 100 replications
    m = model("Set1", 3, 5, 0.6)
    mask = m.loadings != 0
    devs = []
    for rep in range(100):
        r = correlation_matrix(sample_data(m, 900, (2024, rep)))
        sol = rotate(uls_extract(r, 3), "varimax")
        devs.append((align_columns(sol.loadings, m.loadings) - m.loadings)[mask])
    d = np.concatenate(devs)
    assert np.mean(np.abs(d)) < 0.05
    assert abs(np.mean(d)) < 0.02

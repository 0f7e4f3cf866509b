import numpy as np
import pytest

from casimir_plates.boundary import PRESETS, haar_sample, preset
from casimir_plates.errors import NotARoot, UnknownFamily
from casimir_plates.kernel import minor_determinants
from casimir_plates.spectral import (EPS_NODES, SpectralContext, closed_form, coeffs_interp,
                                     coeffs_printed, compare_coefficients, d_pm, dh_dk,
                                     h_direct, h_eps, m_matrices, minors, mode_vector,
                                     monomial_discrepancies)


def oracle_m(k, L, sign):
    # M_+ for sign = +1, M_- for sign = -1, written out entry by entry
    e = np.exp(1j * k * L)
    a, b = 1 - sign * 1j * k, 1 + sign * 1j * k
    return np.array([[a, 0, b, 0],
                     [0, a, 0, b],
                     [e * b, 0, a / e, 0],
                     [0, e * b, 0, a / e]])


def oracle_h(u, k, L, eps=1.0):
    return np.linalg.det(oracle_m(k, L, -1) - eps * u @ oracle_m(k, L, +1))


def test_m_matrices_match_oracle():
    k = 1.3 - 0.2j
    m_minus, m_plus = m_matrices(k, 0.7)
    np.testing.assert_allclose(m_minus, oracle_m(k, 0.7, -1), atol=1e-15)
    np.testing.assert_allclose(m_plus, oracle_m(k, 0.7, +1), atol=1e-15)


def test_h_direct_against_numpy_det():
    for seed in range(10):
        bc = haar_sample(seed)
        for k in (0.3, 2.5, 7.1 + 0.3j):
            ctx = SpectralContext(bc, 1.4)
            ref = oracle_h(bc.u, k, 1.4)
            assert abs(h_direct(ctx, k) - ref) <= 1e-11 * max(1, abs(ref))


def test_h_direct_broadcasts():
    ctx = SpectralContext(haar_sample(0), 1.0)
    ks = np.linspace(0.1, 5, 7)
    vals = h_direct(ctx, ks)
    assert vals.shape == ks.shape
    assert vals[3] == pytest.approx(h_direct(ctx, ks[3]), rel=1e-14)


def test_d_pm_against_numpy():
    for k in (0.5, 2.0, 3.3 + 0.1j):
        dm, dp = d_pm(k, 0.9)
        assert dm == pytest.approx(np.linalg.det(oracle_m(k, 0.9, -1)), rel=1e-12)
        assert dp == pytest.approx(np.linalg.det(oracle_m(k, 0.9, +1)), rel=1e-12)


def test_invalid_separation():
    with pytest.raises(ValueError):
        SpectralContext(preset("dirichlet"), 0.0)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_closed_forms_match_direct(name):
    params = {p: 0.37 * (i + 1) for i, p in enumerate(PRESETS[name].params)}
    bc = preset(name, params)
    ks = np.linspace(0.1, 10, 100)
    for L in (0.5, 1.0, 2.0):
        cf = closed_form(name, params, ks, L)
        direct = h_direct(SpectralContext(bc, L), ks)
        assert np.all(np.abs(direct - cf) <= 1e-9 * (1 + np.abs(cf)))


def test_closed_form_examples():
    assert closed_form("dirichlet", None, np.pi / 2, 1.0) == pytest.approx(-64)
    assert closed_form("neumann", None, np.pi / 2, 1.0) == pytest.approx(-64 * (np.pi / 2) ** 4)
    with pytest.raises(UnknownFamily):
        closed_form("robin", None, 1.0, 1.0)


def test_reductions():
    ks = np.linspace(0.1, 10, 100)
    per = h_direct(SpectralContext(preset("periodic"), 1.0), ks)
    for name, params in [("pseudo_periodic", {"alpha": 0.0}),
                         ("two_flux", {"alpha": 0.4, "beta": -0.4}),
                         ("antiperiodic", None)]:
        other = h_direct(SpectralContext(preset(name, params), 1.0), ks)
        np.testing.assert_allclose(other, per, rtol=0, atol=1e-10 * np.max(np.abs(per)))


def test_h_eps_is_quartic_in_eps():
    bc = haar_sample(4)
    ctx = SpectralContext(bc, 0.8)
    k = 2.3
    c = coeffs_interp(ctx, k).c
    for eps in (0.2, 0.9, 2.0, -1.0):
        assert np.polyval(c[::-1], eps) == pytest.approx(h_eps(ctx, k, eps), rel=1e-10)
    assert c.sum() == pytest.approx(h_direct(ctx, k), rel=1e-11)
    assert len(EPS_NODES) == 5


def test_coeff_extremes_are_determinants():
    # c0 = det M_-, c4 = det(U) det M_+
    bc = haar_sample(9)
    ctx = SpectralContext(bc, 1.1)
    c = coeffs_interp(ctx, 1.7).c
    dm, dp = d_pm(1.7, 1.1)
    assert c[0] == pytest.approx(dm, rel=1e-10)
    assert c[4] == pytest.approx(np.linalg.det(bc.u) * dp, rel=1e-10)


def test_printed_coefficients_except_c2():
    for seed in range(5):
        ctx = SpectralContext(haar_sample(seed), 1.0)
        ci, cp = coeffs_interp(ctx, 1.9).c, coeffs_printed(ctx, 1.9).c
        for j in (0, 1, 3, 4):
            assert abs(ci[j] - cp[j]) <= 1e-8 * abs(ci[j])


def test_printed_c2_sign_slips_are_located():
    hits = monomial_discrepancies(2, 1.9, 1.0)
    assert [h.name for h in hits] == ["U11*U44", "U13*U42", "U13*U44"]
    for h in hits:
        # each one is a flipped sign
        assert h.printed == pytest.approx(-h.actual, rel=1e-10)
    assert monomial_discrepancies(1, 1.9, 1.0) == []
    assert monomial_discrepancies(3, 1.9, 1.0) == []


def test_compare_coefficients_reports_first_failing_term():
    checks = compare_coefficients(SpectralContext(haar_sample(1), 1.0), 2.2)
    assert [c.ok for c in checks] == [True, True, False, True, True]
    assert checks[2].first_failing_term == "U11*U44"


def test_minors_conventions():
    thetas = [0.3, 0.7, 1.1, 1.9]
    l1, l2, l3, l4 = np.exp(1j * np.array(thetas))
    u = preset("antidiagonal", {"thetas": thetas}).u
    a = minors(u)
    # reversed indexing: entry (i, j) drops row 5-i and column 5-j
    expected = [-l1 * l2 * l3, -l1 * l2 * l4, -l1 * l3 * l4, -l2 * l3 * l4]
    np.testing.assert_allclose([a[i, 3 - i] for i in range(4)], expected, atol=1e-14)
    # standard indexing gives the same entries in the opposite order
    s = minor_determinants(u)
    np.testing.assert_allclose([s[i, 3 - i] for i in range(4)], expected[::-1], atol=1e-14)
    # the trace and the (1,3),(3,1),(2,4),(4,2) sum are the same either way
    rng = np.random.default_rng(0)
    m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    a, s = minors(m), minor_determinants(m)
    assert np.trace(a) == pytest.approx(np.trace(s))
    assert a[0, 2] + a[2, 0] + a[1, 3] + a[3, 1] == pytest.approx(
        s[0, 2] + s[2, 0] + s[1, 3] + s[3, 1])


def test_dh_dk_dirichlet_analytic():
    ctx = SpectralContext(preset("dirichlet"), 1.0)
    for k in (1.0, 2.5):
        assert dh_dk(ctx, k) == pytest.approx(-64 * np.sin(2 * k), rel=1e-12)


def test_dh_dk_methods_agree():
    ctx = SpectralContext(haar_sample(6), 1.3)
    for k in (0.8, 4.0 + 0.2j):
        assert dh_dk(ctx, k, "fd") == pytest.approx(dh_dk(ctx, k), rel=1e-8)
    with pytest.raises(ValueError):
        dh_dk(ctx, 1.0, "spline")


def test_mode_vector_at_roots():
    ctx = SpectralContext(preset("dirichlet"), 1.0)
    mode = mode_vector(ctx, np.pi)
    m_minus, m_plus = m_matrices(np.pi, 1.0)
    assert np.linalg.norm((m_minus - ctx.u @ m_plus) @ mode.phi) < 1e-12
    assert np.linalg.norm(mode.phi) == pytest.approx(1.0)
    per = SpectralContext(preset("periodic"), 1.0)
    phi = mode_vector(per, 2 * np.pi).phi
    assert mode_vector(per, 2 * np.pi).residual < 1e-12
    assert np.linalg.norm(phi) == pytest.approx(1.0)
    with pytest.raises(NotARoot):
        mode_vector(ctx, 1.0)

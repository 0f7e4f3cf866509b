import numpy as np
import pytest

from casimir_plates.boundary import ClassKind, haar_sample, preset
from casimir_plates.errors import CountMismatch
from casimir_plates.roots import ScanOptions, count_in_rect, multiplicity_at, scan_roots
from casimir_plates.spectral import SpectralContext, h_direct


def ctx(name, L=1.0, params=None):
    return SpectralContext(preset(name, params), L)


@pytest.mark.parametrize("name, rect, expected", [
    ("dirichlet", ((0.1, 10), (-0.5, 0.5)), 6),
    ("neumann", ((0.1, 10), (-0.5, 0.5)), 6),
    ("dirichlet", ((3.3, 6.0), (-0.2, 0.2)), 0),
    ("dirichlet", ((0.2, 3.3), (-0.2, 0.2)), 2),
    ("periodic", ((-0.05, 0.05), (-0.05, 0.05)), 4),
    ("neumann", ((-0.05, 0.05), (-0.05, 0.05)), 6),
])
def test_count_in_rect_examples(name, rect, expected):
    assert count_in_rect(ctx(name), *rect) == expected


def test_count_in_rect_additive():
    c = ctx("mixed_nd")
    whole = count_in_rect(c, (0.1, 10), (-0.5, 0.5))
    parts = count_in_rect(c, (0.1, 5), (-0.5, 0.5)) + count_in_rect(c, (5, 10), (-0.5, 0.5))
    assert whole == parts == 6


def test_count_in_rect_nudges_off_a_root():
    # the right edge passes exactly through the root at pi
    assert count_in_rect(ctx("dirichlet"), (1.0, np.pi), (-0.3, 0.3)) == 2


def test_count_in_rect_rejects_bad_rectangle():
    with pytest.raises(ValueError):
        count_in_rect(ctx("dirichlet"), (2, 1), (-1, 1))


def test_multiplicity_at():
    assert multiplicity_at(ctx("dirichlet"), np.pi, 0.05) == 2
    assert multiplicity_at(ctx("periodic"), np.pi, 0.05) == 2
    assert multiplicity_at(ctx("dirichlet"), 2.0, 0.05) == 0


def test_multiplicity_matches_closed_form_factorization():
    # at alpha = pi/2 the pseudo-periodic form is -16 (k^2 - 1)^2 sin^2(kL)
    c = ctx("pseudo_periodic", params={"alpha": np.pi / 2})
    rep = scan_roots(c, 4.0)
    assert rep.roots[0].k == pytest.approx(1.0, rel=1e-9)
    assert rep.roots[0].multiplicity == 2


@pytest.mark.parametrize("name, offset", [("dirichlet", 0.0), ("neumann", 0.0),
                                          ("periodic", 0.0), ("mixed_nd", 0.5)])
def test_scan_reproduces_analytic_roots(name, offset):
    for L in (0.5, 1.0, 2.0):
        rep = scan_roots(ctx(name, L), 10.25 * np.pi / L)
        expected = (np.arange(1, 11) - offset) * np.pi / L
        assert rep.consistent
        np.testing.assert_allclose(rep.ks(), expected, rtol=1e-9)
        assert [r.multiplicity for r in rep.roots] == [2] * 10
        assert rep.winding_total == 20


def test_scan_scaling_law():
    base = scan_roots(ctx("periodic", 1.0), 20).ks()
    for L in (0.5, 2.0):
        scaled = scan_roots(ctx("periodic", L), 20 / L).ks()
        np.testing.assert_allclose(scaled * L, base, rtol=1e-9)


def test_scan_residual_invariant():
    c = ctx("dirichlet")
    rep = scan_roots(c, 10)
    grid = np.linspace(0.1, 10, 400)
    scale = np.max(np.abs(h_direct(c, grid)))
    assert all(r.residual <= 1e-8 * scale for r in rep.roots)
    assert np.all(np.diff(rep.ks()) > 0)


def test_scan_is_deterministic():
    c = ctx("periodic_antiperiodic", 2.0)
    assert scan_roots(c, 6) == scan_roots(c, 6)


def test_periodic_antiperiodic_k1_root():
    for L in (0.5, 1.0, 2.0):
        rep = scan_roots(ctx("periodic_antiperiodic", L), 4.0)
        k1 = [r for r in rep.roots if abs(r.k - 1) < 1e-6]
        assert len(k1) == 1 and k1[0].multiplicity == 2
        assert k1[0].k == pytest.approx(1.0, rel=1e-9)


def test_include_k0_warns_and_counts_zero_order():
    with pytest.warns(UserWarning):
        rep = scan_roots(ctx("periodic"), 4.0, ScanOptions(include_k0=True))
    assert rep.roots[0].k == 0.0 and rep.roots[0].multiplicity == 4
    assert rep.weighted_count == 2


def test_count_mismatch_carries_report():
    # a consistent Haar sample whose zeros in the strip are not on the real axis
    bc = haar_sample(0, ClassKind.INTERIOR)
    with pytest.raises(CountMismatch) as info:
        scan_roots(SpectralContext(bc, 1.0), 10, ScanOptions(k_min=1e-3))
    rep = info.value.report
    assert not rep.consistent
    assert rep.winding_total != rep.weighted_count
    assert any(abs(z.imag) > 1e-3 for z in rep.off_axis)

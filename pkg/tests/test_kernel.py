import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from casimir_plates.errors import RankDeficient
from casimir_plates.kernel import (Quartic, adjugate4, as_cmat4, charpoly, det4,
                                   quartic_roots, unitarity_defect, unitarize)


def leibniz_det(m):
    total = 0j
    for perm in itertools.permutations(range(4)):
        inv = sum(1 for i in range(4) for j in range(i + 1, 4) if perm[i] > perm[j])
        term = (-1) ** inv
        for r, c in enumerate(perm):
            term *= m[r, c]
        total += term
    return total


def rand_c(rng, shape=(4, 4)):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
cmat = st.lists(st.tuples(finite, finite), min_size=16, max_size=16).map(
    lambda xs: np.array([complex(a, b) for a, b in xs]).reshape(4, 4))


def test_det4_matches_leibniz():
    rng = np.random.default_rng(0)
    for _ in range(50):
        m = rand_c(rng)
        assert abs(det4(m) - leibniz_det(m)) <= 1e-12 * max(1, abs(leibniz_det(m))) * 10


def test_det4_batched_matches_single():
    rng = np.random.default_rng(1)
    stack = rand_c(rng, (3, 5, 4, 4))
    batch = det4(stack)
    assert batch.shape == (3, 5)
    for idx in np.ndindex(3, 5):
        assert batch[idx] == pytest.approx(det4(stack[idx]), rel=1e-13)


def test_det4_needs_pivoting():
    m = np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    assert det4(m) == 1
    assert det4(np.zeros((4, 4))) == 0


@settings(max_examples=60, deadline=None)
@given(cmat, cmat)
def test_det_multiplicative(a, b):
    lhs = det4(a @ b)
    rhs = det4(a) * det4(b)
    scale = np.prod(np.linalg.norm(a, axis=0)) * np.prod(np.linalg.norm(b, axis=0))
    assert abs(lhs - rhs) <= 1e-11 * max(scale, 1.0)


def test_adjugate_identity():
    rng = np.random.default_rng(2)
    m = rand_c(rng)
    adj = adjugate4(m)
    np.testing.assert_allclose(m @ adj, det4(m) * np.eye(4), atol=1e-11)
    np.testing.assert_allclose(adj, det4(m) * np.linalg.inv(m), atol=1e-10)


def test_adjugate_of_singular_matrix_is_rank_one():
    m = np.ones((4, 4), dtype=complex)
    m[0, 0] = 2
    m[1, 1] = 3
    m[3] = m[2]
    adj = adjugate4(m)
    np.testing.assert_allclose(m @ adj, 0, atol=1e-12)
    assert np.linalg.matrix_rank(adj) == 1


def test_charpoly_matches_numpy():
    rng = np.random.default_rng(3)
    m = rand_c(rng)
    p = charpoly(m)
    np.testing.assert_allclose(p.coeffs[::-1], np.poly(m), rtol=1e-12, atol=1e-12)


def test_quartic_roots_random_against_numpy():
    rng = np.random.default_rng(4)
    for _ in range(30):
        c = rand_c(rng, (5,))
        z = quartic_roots(Quartic(tuple(c)))
        ref = np.roots(c[::-1])
        for r in ref:
            assert np.min(np.abs(z - r)) <= 1e-8 * max(1, abs(r))


def test_quartic_roots_quadruple_root_is_exact():
    # (x - 1)^4
    z = quartic_roots(Quartic((1, -4, 6, -4, 1)))
    assert np.all(z == 1)


def test_quartic_roots_of_double_pairs():
    z = quartic_roots(charpoly(np.diag([1, 1, -1, -1])))
    assert sorted(z.real) == [-1, -1, 1, 1]
    assert np.all(z.imag == 0)


def test_quartic_validation():
    with pytest.raises(ValueError):
        Quartic((1, 2, 3, 4, 0))
    with pytest.raises(ValueError):
        Quartic((1, 2, 3))


def test_quartic_derivative_at():
    p = Quartic((1, 2, 3, 4, 5))
    x = 0.7 - 0.2j
    assert p.derivative_at(x, 1) == pytest.approx(2 + 6 * x + 12 * x ** 2 + 20 * x ** 3)
    assert p.derivative_at(x, 2) == pytest.approx(3 + 12 * x + 30 * x ** 2)


def test_unitarize_gives_unitary_spanning_same_flag():
    rng = np.random.default_rng(5)
    m = rand_c(rng)
    q = unitarize(m)
    assert unitarity_defect(q) < 1e-14
    # Gram-Schmidt keeps the leading column direction
    v = m[:, 0] / np.linalg.norm(m[:, 0])
    assert abs(abs(np.vdot(q[:, 0], v)) - 1) < 1e-14


def test_unitarize_rank_deficient():
    m = np.eye(4, dtype=complex)
    m[:, 3] = m[:, 2]
    with pytest.raises(RankDeficient):
        unitarize(m)


def test_as_cmat4_rejects_bad_input():
    with pytest.raises(ValueError):
        as_cmat4(np.eye(3))
    with pytest.raises(ValueError):
        as_cmat4(np.full((4, 4), np.nan))

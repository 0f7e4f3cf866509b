"""Spectral function ``h_U(k; L) = det[M_-(k) - U M_+(k)]`` and its pieces.

``k`` may be complex and may be an array; every evaluator broadcasts over
``k``. The plate separation ``L`` enters only through ``kL``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Mapping

import numpy as np

from .boundary import BoundaryCondition, normalize_params
from .errors import NotARoot, UnknownFamily
from .kernel import adjugate4, det4, minor_determinants

__all__ = [
    "SpectralContext",
    "CoeffValues",
    "ModeCoefficients",
    "m_matrices",
    "d_pm",
    "h_direct",
    "h_eps",
    "coeffs_interp",
    "coeffs_printed",
    "compare_coefficients",
    "monomial_discrepancies",
    "minors",
    "closed_form",
    "dh_dk",
    "mode_vector",
    "EPS_NODES",
]

EPS_NODES = (0.5, 0.75, 1.0, 1.25, 1.5)


@dataclass(frozen=True)
class SpectralContext:
    bc: BoundaryCondition
    L: float

    def __post_init__(self):
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"plate separation L must be positive, got {self.L}")
        object.__setattr__(self, "L", float(self.L))

    @property
    def u(self) -> np.ndarray:
        return self.bc.u


@dataclass(frozen=True)
class CoeffValues:
    """Coefficients ``c[0..4]`` of ``h_eps`` as a polynomial in eps.

    ``c`` has shape ``(5,) + k.shape``.
    """

    c: np.ndarray

    def total(self):
        return self.c.sum(axis=0)


@dataclass(frozen=True)
class ModeCoefficients:
    """Plane-wave amplitudes ``(A, B, C, D)`` of a mode."""

    phi: np.ndarray
    residual: float


def _scalar_out(x):
    return complex(x) if np.ndim(x) == 0 else x


def m_matrices(k, L: float) -> tuple[np.ndarray, np.ndarray]:
    """``(M_minus, M_plus)`` with shape ``k.shape + (4, 4)``."""
    k = np.asarray(k, dtype=complex)
    e = np.exp(1j * k * L)
    ei = np.exp(-1j * k * L)
    z = np.zeros_like(k)

    def build(a, b):
        # a multiplies the e^{ikx} amplitude at x = 0, b the e^{-ikx} one
        return np.stack([
            np.stack([a, z, b, z], axis=-1),
            np.stack([z, a, z, b], axis=-1),
            np.stack([e * b, z, ei * a, z], axis=-1),
            np.stack([z, e * b, z, ei * a], axis=-1),
        ], axis=-2)

    m_plus = build(1 - 1j * k, 1 + 1j * k)
    m_minus = build(1 + 1j * k, 1 - 1j * k)
    return m_minus, m_plus


def _m_derivatives(k, L: float) -> tuple[np.ndarray, np.ndarray]:
    k = np.asarray(k, dtype=complex)
    e = np.exp(1j * k * L)
    ei = np.exp(-1j * k * L)
    z = np.zeros_like(k)

    def build(a, da, b, db):
        top = b * 1j * L * e + db * e
        bot = a * -1j * L * ei + da * ei
        return np.stack([
            np.stack([da, z, db, z], axis=-1),
            np.stack([z, da, z, db], axis=-1),
            np.stack([top, z, bot, z], axis=-1),
            np.stack([z, top, z, bot], axis=-1),
        ], axis=-2)

    one = np.ones_like(k)
    d_plus = build(1 - 1j * k, -1j * one, 1 + 1j * k, 1j * one)
    d_minus = build(1 + 1j * k, 1j * one, 1 - 1j * k, -1j * one)
    return d_minus, d_plus


def d_pm(k, L: float):
    """Closed-form ``(det M_minus, det M_plus)``."""
    k = np.asarray(k, dtype=complex)
    s, c = np.sin(k * L), np.cos(k * L)
    d_minus = -4 * (2 * k * c + (k * k - 1) * s) ** 2
    d_plus = -4 * (2 * k * c - (k * k - 1) * s) ** 2
    return _scalar_out(d_minus), _scalar_out(d_plus)


def _h_eps_u(u: np.ndarray, k, L: float, eps):
    m_minus, m_plus = m_matrices(k, L)
    eps = np.asarray(eps, dtype=float)[..., None, None]
    return det4(m_minus - eps * (u @ m_plus))


def h_direct(ctx: SpectralContext, k):
    """The spectral function; the reference every other evaluator is
    checked against."""
    return _scalar_out(_h_eps_u(ctx.u, k, ctx.L, 1.0))


def h_eps(ctx: SpectralContext, k, eps: float):
    return _scalar_out(_h_eps_u(ctx.u, k, ctx.L, eps))


_VANDERMONDE = np.vander(np.array(EPS_NODES), 5, increasing=True)


def _coeffs_interp_u(u, k, L):
    k = np.asarray(k, dtype=complex)
    vals = np.stack([_h_eps_u(u, k, L, e) for e in EPS_NODES])
    flat = vals.reshape(5, -1)
    c = np.linalg.solve(_VANDERMONDE, flat)
    return c.reshape((5,) + k.shape)


def coeffs_interp(ctx: SpectralContext, k) -> CoeffValues:
    """Coefficients in eps recovered from five evaluations of ``h_eps``."""
    return CoeffValues(_coeffs_interp_u(ctx.u, k, ctx.L))


def minors(u) -> np.ndarray:
    """Matrix of 3x3 minors with reversed indexing.

    Entry ``(i, j)`` is the determinant of ``u`` with row ``5 - i`` and
    column ``5 - j`` removed (1-based), without cofactor signs.
    """
    return np.flip(minor_determinants(u), axis=(-2, -1))


# Printed c2: (group, sign, (row, col), (row, col)) with 1-based indices.
# Groups: 0 -> 16 k^2, 1 -> 4 (k^2+1)^2 sin^2(kL),
# 2 -> 16 k^2 - 4 (k^2+1)^2 sin^2(kL), 3 -> -8 k (k^2+1) sin(kL).
C2_PRINTED_TERMS = (
    (0, +1, (1, 4), (2, 3)), (0, -1, (1, 3), (2, 4)), (0, -1, (2, 4), (3, 1)),
    (0, +1, (2, 1), (3, 4)), (0, +1, (3, 2), (4, 1)), (0, +1, (1, 3), (4, 2)),
    (0, -1, (3, 1), (4, 2)), (0, +1, (1, 2), (4, 3)),
    (1, +1, (1, 2), (2, 1)), (1, -1, (1, 1), (2, 2)), (1, +1, (2, 3), (3, 2)),
    (1, -1, (2, 2), (3, 3)), (1, +1, (1, 4), (4, 1)), (1, +1, (3, 4), (4, 3)),
    (1, +1, (1, 1), (4, 4)), (1, -1, (3, 3), (4, 4)),
    (2, +1, (1, 1), (3, 3)), (2, -1, (1, 3), (3, 1)), (2, +1, (2, 2), (4, 4)),
    (2, -1, (2, 4), (4, 2)),
    (3, +1, (1, 2), (2, 3)), (3, +1, (3, 4), (2, 3)), (3, -1, (1, 1), (2, 4)),
    (3, -1, (2, 2), (3, 1)), (3, +1, (2, 1), (3, 2)), (3, -1, (2, 4), (3, 3)),
    (3, +1, (1, 2), (4, 1)), (3, +1, (3, 4), (4, 1)), (3, -1, (1, 1), (4, 2)),
    (3, -1, (3, 3), (4, 2)), (3, +1, (3, 2), (4, 3)), (3, +1, (1, 4), (2, 1)),
    (3, +1, (1, 4), (4, 3)), (3, -1, (3, 1), (4, 4)), (3, -1, (1, 3), (2, 2)),
    (3, +1, (1, 3), (4, 4)),
)


def _c2_groups(k, L):
    s = np.sin(k * L)
    kk = (k * k + 1) ** 2 * s * s
    return (16 * k * k, 4 * kk, 16 * k * k - 4 * kk, -8 * k * (k * k + 1) * s)


def _coeffs_printed_u(u, k, L):
    k = np.asarray(k, dtype=complex)
    u = np.asarray(u, dtype=complex)
    s, c = np.sin(k * L), np.cos(k * L)
    f_minus = 2 * k * c + (k * k - 1) * s
    f_plus = 2 * k * c - (k * k - 1) * s

    def U(i, j):
        return u[..., i - 1, j - 1]

    c0 = -4 * f_minus ** 2
    c1 = f_minus * (-4 * (k * k + 1) * np.trace(u, axis1=-2, axis2=-1) * s
                    + 8 * k * (U(1, 3) + U(3, 1) + U(2, 4) + U(4, 2)))
    groups = _c2_groups(k, L)
    c2 = sum(groups[g] * sign * U(*a) * U(*b) for g, sign, a, b in C2_PRINTED_TERMS)
    a = minors(u)

    def A(i, j):
        return a[..., i - 1, j - 1]

    c3 = f_plus * (4 * (k * k + 1) * s * np.trace(a, axis1=-2, axis2=-1)
                   + 8 * k * (A(1, 3) + A(3, 1) + A(2, 4) + A(4, 2)))
    c4 = det4(u) * (-4 * f_plus ** 2)
    return np.stack(np.broadcast_arrays(c0, c1, c2, c3, c4))


def coeffs_printed(ctx: SpectralContext, k) -> CoeffValues:
    """The five closed-form coefficient expressions exactly as published.

    ``c3`` uses the matrix-of-minors form. The published ``c2`` carries sign
    slips (see ``monomial_discrepancies``); ``coeffs_interp`` is the
    reference.
    """
    return CoeffValues(_coeffs_printed_u(ctx.u, k, ctx.L))


_ENTRIES = [(i, j) for i in range(1, 5) for j in range(1, 5)]


@dataclass(frozen=True)
class MonomialDiscrepancy:
    """A monomial in the entries of U whose published coefficient is wrong."""

    order: int
    term: tuple
    actual: complex
    printed: complex

    @property
    def name(self) -> str:
        return "*".join(f"U{i}{j}" for i, j in self.term)


def _unit_sum(entries) -> np.ndarray:
    m = np.zeros((4, 4), dtype=complex)
    for i, j in entries:
        m[i - 1, j - 1] += 1
    return m


def monomial_discrepancies(order: int, k: float, L: float, rtol: float = 1e-8
                           ) -> list[MonomialDiscrepancy]:
    """Compare the published coefficient of every monomial of the given
    order in the entries of U against the true one.

    The coefficient of ``U_a U_b ...`` is isolated by inclusion-exclusion
    over matrix-unit inputs, which is exact because the expansion is
    multilinear in distinct entries. Both sides go through the same
    extraction, so a hit names a term that is wrong in the published
    formula. Results are in lexicographic term order.
    """
    if order not in (1, 2, 3):
        raise ValueError("only orders 1, 2 and 3 have entry-level structure")
    subsets = [s for r in range(1, order + 1) for s in combinations(_ENTRIES, r)]
    stack = np.stack([_unit_sum(s) for s in subsets])
    actual_all = _coeffs_interp_u(stack, np.full(len(subsets), k), L)[order]
    printed_all = _coeffs_printed_u(stack, np.full(len(subsets), k), L)[order]
    value = {s: (actual_all[n], printed_all[n]) for n, s in enumerate(subsets)}

    def coefficient(term, which):
        total = 0j
        for r in range(1, len(term) + 1):
            for sub in combinations(term, r):
                total += (-1) ** (len(term) - r) * value[sub][which]
        return total

    terms = list(combinations(_ENTRIES, order))
    actual = np.array([coefficient(t, 0) for t in terms])
    printed = np.array([coefficient(t, 1) for t in terms])
    scale = max(np.max(np.abs(actual)), np.max(np.abs(printed)), 1.0)
    return [MonomialDiscrepancy(order, t, complex(a), complex(p))
            for t, a, p in zip(terms, actual, printed)
            if abs(a - p) > rtol * scale]


@dataclass(frozen=True)
class CoefficientCheck:
    order: int
    rel_error: float
    ok: bool
    first_failing_term: str | None = None


def compare_coefficients(ctx: SpectralContext, k: float, rtol: float = 1e-8
                         ) -> list[CoefficientCheck]:
    """Published versus interpolated coefficients at one ``k``.

    A failing order 1-3 is traced to its first wrong monomial.
    """
    ci = coeffs_interp(ctx, k).c
    cp = coeffs_printed(ctx, k).c
    scale = max(np.max(np.abs(ci)), 1e-300)
    out = []
    for j in range(5):
        err = abs(ci[j] - cp[j]) / max(abs(ci[j]), 1e-12 * scale)
        ok = abs(ci[j] - cp[j]) <= rtol * max(abs(ci[j]), 1e-6 * scale)
        first = None
        if not ok and 1 <= j <= 3:
            hits = monomial_discrepancies(j, float(np.real(k)), ctx.L, rtol)
            first = hits[0].name if hits else "(no single monomial; rounding)"
        out.append(CoefficientCheck(j, float(err), bool(ok), first))
    return out


# -- closed forms ----------------------------------------------------------

def _sqrt_d(k, L):
    s, c = np.sin(k * L), np.cos(k * L)
    return 2j * (2 * k * c + (k * k - 1) * s), 2j * (2 * k * c - (k * k - 1) * s)


def _pp_form(k, L, angle):
    s = np.sin(k * L)
    return 8 * (-1 + 6 * k * k - k ** 4 + (1 + k * k) ** 2 * np.cos(angle)) * s * s


def _cf_diagonal(p, k, L):
    lam = [np.exp(1j * p[f"theta{j}"]) for j in range(1, 5)]
    sq_minus, sq_plus = _sqrt_d(k, L)
    s = np.sin(k * L)

    def poly(x, y):
        return 2j * (k * k + 1) * s * (x + y) - sq_plus * x * y + sq_minus

    return poly(lam[0], lam[2]) * poly(lam[1], lam[3])


def _cf_antidiagonal(p, k, L):
    l1, l2, l3, l4 = (np.exp(1j * p[f"theta{j}"]) for j in range(1, 5))
    d_minus, d_plus = d_pm(k, L)
    s = np.sin(k * L)
    return (d_minus + d_plus * l1 * l2 * l3 * l4
            + 4 * (k * k + 1) ** 2 * s * s * (l2 * l3 + l1 * l4)
            + 16 * k * k * (l1 * l2 + l3 * l4))


_CLOSED_FORMS = {
    "dirichlet": lambda p, k, L: -64 * np.sin(k * L) ** 2,
    "neumann": lambda p, k, L: -64 * k ** 4 * np.sin(k * L) ** 2,
    "mixed_nd": lambda p, k, L: -64 * k * k * np.cos(k * L) ** 2,
    "diagonal": _cf_diagonal,
    "antidiagonal": _cf_antidiagonal,
    "periodic": lambda p, k, L: 64 * k * k * np.sin(k * L) ** 2,
    "antiperiodic": lambda p, k, L: 64 * k * k * np.sin(k * L) ** 2,
    "periodic_antiperiodic": lambda p, k, L: -16 * (k * k - 1) ** 2 * np.sin(k * L) ** 2,
    "pseudo_periodic": lambda p, k, L: _pp_form(k, L, 2 * p["alpha"]),
    "two_flux": lambda p, k, L: _pp_form(k, L, p["alpha"] + p["beta"]),
    "quasi_periodic": lambda p, k, L: _pp_form(k, L, 2 * p["alpha"]),
}


def closed_form(family: str, params: Mapping[str, float] | None, k, L: float):
    """Published closed-form spectral function of a catalogue family."""
    if family not in _CLOSED_FORMS:
        raise UnknownFamily(family)
    p = normalize_params(family, params)
    k = np.asarray(k, dtype=complex)
    return _scalar_out(np.broadcast_to(_CLOSED_FORMS[family](p, k, L), k.shape))


# -- derivative and null vectors -------------------------------------------

def _dh_jacobi(u, k, L):
    m_minus, m_plus = m_matrices(k, L)
    dm_minus, dm_plus = _m_derivatives(k, L)
    a = m_minus - u @ m_plus
    da = dm_minus - u @ dm_plus
    return np.einsum("...ij,...ji->...", adjugate4(a), da)


def _fd_stencil(ctx: SpectralContext, k, step):
    k = np.asarray(k, dtype=complex)
    f = lambda z: _h_eps_u(ctx.u, z, ctx.L, 1.0)
    return ((f(k + step) - f(k - step)) - 1j * (f(k + 1j * step) - f(k - 1j * step))) / (4 * step)


def dh_dk(ctx: SpectralContext, k, method: str = "jacobi"):
    """Derivative of ``h_direct`` with respect to ``k``.

    ``method="jacobi"`` differentiates the determinant exactly,
    ``tr(adj(A) dA/dk)``. ``method="fd"`` uses the four-point complex
    stencil with step ``max(1e-5, 1e-5 |k|)`` and one Richardson step.
    """
    if method == "jacobi":
        return _scalar_out(_dh_jacobi(ctx.u, k, ctx.L))
    if method != "fd":
        raise ValueError(f"unknown derivative method {method!r}")
    k = np.asarray(k, dtype=complex)
    step = np.maximum(1e-5, 1e-5 * np.abs(k))
    coarse = _fd_stencil(ctx, k, step)
    fine = _fd_stencil(ctx, k, step / 2)
    return _scalar_out((16 * fine - coarse) / 15)


def _hadamard_scale(a: np.ndarray) -> float:
    return float(np.prod(np.linalg.norm(a, axis=0)))


def mode_vector(ctx: SpectralContext, k: float, *, tol: float = 1e-6) -> ModeCoefficients:
    """Unit null vector of ``M_-(k) - U M_+(k)`` at a root ``k``.

    Raises ``NotARoot`` when ``|h(k)|`` exceeds ``tol`` times the Hadamard
    bound of the matrix.
    """
    m_minus, m_plus = m_matrices(k, ctx.L)
    a = m_minus - ctx.u @ m_plus
    scale = _hadamard_scale(a)
    h = abs(det4(a))
    if h > tol * scale:
        raise NotARoot(f"|h({k})| = {h:.3g} is not small against scale {scale:.3g}")
    norm_a = np.linalg.norm(a)

    adj = adjugate4(a)
    col = adj[:, np.argmax(np.linalg.norm(adj, axis=0))]
    if np.linalg.norm(col) > 0:
        phi = col / np.linalg.norm(col)
        res = np.linalg.norm(a @ phi)
        if res <= 1e-7 * norm_a:
            return ModeCoefficients(phi, float(res))

    # rank below 3: inverse iteration on A^H A for the smallest singular direction
    g = a.conj().T @ a
    shift = 1e-14 * np.linalg.norm(g)
    x = np.ones(4, dtype=complex) / 2
    for _ in range(6):
        x = np.linalg.solve(g + shift * np.eye(4), x)
        x /= np.linalg.norm(x)
    res = np.linalg.norm(a @ x)
    return ModeCoefficients(x, float(res))

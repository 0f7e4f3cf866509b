"""Fixed-size complex linear algebra on 4x4 matrices.

Every function accepts a single ``(4, 4)`` complex array. ``det4`` and
``adjugate4`` also accept a stack of shape ``(..., 4, 4)`` so spectral
functions can be evaluated on whole grids at once.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import NonConvergence, RankDeficient

__all__ = [
    "Quartic",
    "as_cmat4",
    "det4",
    "adjugate4",
    "charpoly",
    "quartic_roots",
    "unitarize",
    "unitarity_defect",
]

_EPS = np.finfo(float).eps


def as_cmat4(m, *, name: str = "matrix") -> np.ndarray:
    """Validate ``m`` as a finite 4x4 complex matrix and return a copy."""
    arr = np.array(m, dtype=complex)
    if arr.shape != (4, 4):
        raise ValueError(f"{name} must have shape (4, 4), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def det4(m) -> complex | np.ndarray:
    """Determinant by LU factorization with partial pivoting.

    Works on a single matrix or a stack ``(..., 4, 4)``; returns a Python
    ``complex`` for a single matrix.
    """
    a = np.array(m, dtype=complex)
    batch_shape = a.shape[:-2]
    a = a.reshape(-1, 4, 4)
    nb = a.shape[0]
    rows = np.arange(nb)
    det = np.ones(nb, dtype=complex)
    for j in range(4):
        p = j + np.argmax(np.abs(a[:, j:, j]), axis=1)
        swap = p != j
        if np.any(swap):
            tmp = a[rows, j].copy()
            a[rows, j] = a[rows, p]
            a[rows, p] = tmp
            det[swap] = -det[swap]
        pivot = a[:, j, j]
        det *= pivot
        if j == 3:
            break
        safe = np.where(pivot == 0, 1.0, pivot)
        factors = a[:, j + 1:, j] / safe[:, None]
        factors[pivot == 0] = 0.0
        a[:, j + 1:, :] -= factors[:, :, None] * a[:, j, None, :]
    det = det.reshape(batch_shape)
    return complex(det) if det.ndim == 0 else det


def _det3(s: np.ndarray) -> np.ndarray:
    return (
        s[..., 0, 0] * (s[..., 1, 1] * s[..., 2, 2] - s[..., 1, 2] * s[..., 2, 1])
        - s[..., 0, 1] * (s[..., 1, 0] * s[..., 2, 2] - s[..., 1, 2] * s[..., 2, 0])
        + s[..., 0, 2] * (s[..., 1, 0] * s[..., 2, 1] - s[..., 1, 1] * s[..., 2, 0])
    )


_KEEP = np.array([[r for r in range(4) if r != i] for i in range(4)])


def minor_determinants(m) -> np.ndarray:
    """``out[..., i, j]`` is the determinant with row i and column j deleted."""
    a = np.asarray(m, dtype=complex)
    # all sixteen 3x3 submatrices at once: shape (..., 4, 4, 3, 3)
    sub = a[..., _KEEP[:, None, :, None], _KEEP[None, :, None, :]]
    return _det3(sub)


_SIGNS = np.array([[(-1) ** (i + j) for j in range(4)] for i in range(4)], dtype=float)


def adjugate4(m) -> np.ndarray:
    """Transpose of the signed cofactor matrix, so ``m @ adj = det(m) I``."""
    cof = _SIGNS * minor_determinants(m)
    return np.swapaxes(cof, -1, -2)


@dataclass(frozen=True)
class Quartic:
    """Polynomial ``sum(coeffs[j] * x**j)`` of exact degree four."""

    coeffs: tuple

    def __post_init__(self):
        c = tuple(complex(v) for v in self.coeffs)
        if len(c) != 5:
            raise ValueError("a quartic needs exactly 5 coefficients")
        if c[4] == 0:
            raise ValueError("leading coefficient must be nonzero")
        if not all(np.isfinite(v) for v in c):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    def __call__(self, x):
        c = self.coeffs
        return (((c[4] * x + c[3]) * x + c[2]) * x + c[1]) * x + c[0]

    def derivative_at(self, x, order: int = 1):
        """Value of the ``order``-th derivative divided by ``order!``."""
        return sum(comb(j, order) * c * x ** (j - order)
                   for j, c in enumerate(self.coeffs) if j >= order)

    def scale_at(self, x, order: int = 0) -> float:
        """Rounding scale for evaluating the ``order``-th Taylor coefficient."""
        ax = abs(x)
        return sum(comb(j, order) * abs(c) * ax ** (j - order)
                   for j, c in enumerate(self.coeffs) if j >= order)

    def monic(self) -> Quartic:
        lead = self.coeffs[4]
        return Quartic(tuple(v / lead for v in self.coeffs))


def charpoly(m) -> Quartic:
    """Coefficients of ``det(x I - m)`` by the Faddeev-LeVerrier recurrence."""
    a = as_cmat4(m)
    n = 4
    coeffs = [0j] * (n + 1)
    coeffs[n] = 1.0 + 0j
    mk = np.zeros((4, 4), dtype=complex)
    eye = np.eye(4)
    for k in range(1, n + 1):
        mk = a @ mk + coeffs[n - k + 1] * eye
        coeffs[n - k] = -np.trace(a @ mk) / k
    return Quartic(tuple(coeffs))


def _initial_guesses(p: Quartic) -> np.ndarray:
    c = p.monic().coeffs
    radius = max(abs(c[0]) ** 0.25, 1e-3)
    center = -c[3] / 4
    angles = 2 * np.pi * np.arange(4) / 4 + 0.4
    return center + radius * np.exp(1j * angles) * (1 + 0.05 * np.arange(4))


def _merge_clusters(p: Quartic, z: np.ndarray, radius: float) -> np.ndarray:
    # A cluster of m roots of an m-fold root scatters by ~eps**(1/m); its mean
    # is accurate to ~eps, so replace genuine clusters by their mean.
    z = z.copy()
    n = len(z)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(z[i] - z[j]) <= radius * max(1.0, abs(z[i])):
                parent[find(j)] = find(i)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    for members in groups.values():
        if len(members) < 2:
            continue
        m = len(members)
        center = np.mean(z[members])
        # an m-fold root is a simple root of the (m-1)-th derivative
        for _ in range(8):
            d_lo = p.derivative_at(center, m - 1)
            d_hi = p.derivative_at(center, m)
            if d_hi == 0:
                break
            step = d_lo / (m * d_hi)
            center = center - step
            if abs(step) <= 4 * _EPS * max(1.0, abs(center)):
                break
        if abs(p(center)) <= 1e-11 * p.scale_at(center):
            z[members] = center
    return z


def quartic_roots(p: Quartic, *, max_iter: int = 200, tol: float = 1e-10,
                  cluster_radius: float = 1e-3) -> np.ndarray:
    """All four roots of ``p`` by Aberth iteration with Newton polishing.

    Raises
    ------
    NonConvergence
        If some root residual exceeds ``tol`` (relative to the coefficient
        scale at the root) after ``max_iter`` sweeps.
    """
    if not isinstance(p, Quartic):
        p = Quartic(tuple(p))
    p = p.monic()
    z = _initial_guesses(p)
    for _ in range(max_iter):
        vals = np.array([p(zi) for zi in z])
        scales = np.array([p.scale_at(zi) for zi in z])
        if np.all(np.abs(vals) <= 8 * _EPS * scales):
            break
        ders = np.array([p.derivative_at(zi) for zi in z])
        z_new = z.copy()
        for i in range(4):
            if abs(vals[i]) <= 8 * _EPS * scales[i] or ders[i] == 0:
                continue
            w = vals[i] / ders[i]
            s = sum(1.0 / (z[i] - z[j]) for j in range(4) if j != i and z[i] != z[j])
            denom = 1.0 - w * s
            z_new[i] = z[i] - (w / denom if denom != 0 else w)
        if np.allclose(z_new, z, rtol=4 * _EPS, atol=0):
            z = z_new
            break
        z = z_new

    for i in range(4):
        for _ in range(3):
            d = p.derivative_at(z[i])
            if d == 0:
                break
            cand = z[i] - p(z[i]) / d
            if abs(p(cand)) < abs(p(z[i])):
                z[i] = cand
            else:
                break

    z = _merge_clusters(p, z, cluster_radius)
    residuals = np.array([abs(p(zi)) / max(1.0, p.scale_at(zi)) for zi in z])
    if not np.all(np.isfinite(z)) or np.any(residuals > tol):
        raise NonConvergence(
            f"quartic root iteration did not reach residual {tol:g} "
            f"(worst {np.max(residuals):.3g})")
    return z


def unitarize(m, *, min_norm: float = 1e-8) -> np.ndarray:
    """Orthonormalize the columns of ``m`` with modified Gram-Schmidt.

    Two passes are made so that orthogonality holds to rounding even for
    moderately ill-conditioned input.
    """
    a = as_cmat4(m)
    q = a.copy()
    for j in range(4):
        v = q[:, j].copy()
        for _ in range(2):
            for i in range(j):
                v = v - np.vdot(q[:, i], v) * q[:, i]
        nrm = np.linalg.norm(v)
        if nrm <= min_norm:
            raise RankDeficient(f"column {j} is numerically dependent (norm {nrm:.3g})")
        q[:, j] = v / nrm
    return q


def unitarity_defect(m) -> float:
    """``max |m^H m - I|`` over all entries."""
    a = np.asarray(m, dtype=complex)
    return float(np.max(np.abs(a.conj().T @ a - np.eye(4))))

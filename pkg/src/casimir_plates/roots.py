"""Transverse momenta: real positive zeros of the spectral function.

Zeros are located as minima of ``|h|`` on a real grid, polished, and then
confirmed with the argument principle: the winding number of ``h`` on a
small circle gives the multiplicity, and the winding number around a strip
rectangle must match the total.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ContourTooCloseToZero, CountMismatch, NonIntegerWinding
from .spectral import SpectralContext, _dh_jacobi, _h_eps_u

__all__ = [
    "Root",
    "RootScanReport",
    "ScanOptions",
    "scan_roots",
    "count_in_rect",
    "multiplicity_at",
]


@dataclass(frozen=True)
class Root:
    k: float
    multiplicity: int
    residual: float
    method: str


@dataclass(frozen=True)
class RootScanReport:
    roots: tuple
    k_max: float
    grid_points: int
    winding_total: int
    consistent: bool
    k_min: float = 0.0
    # zeros inside the strip that polish to complex values
    off_axis: tuple = ()

    @property
    def weighted_count(self) -> int:
        return sum(r.multiplicity for r in self.roots if r.k > 0)

    def ks(self) -> np.ndarray:
        return np.array([r.k for r in self.roots])


@dataclass(frozen=True)
class ScanOptions:
    k_min: float = 1e-6
    samples_per_interval: int = 40
    candidate_threshold: float = 0.25
    mult_radius: float | None = None
    include_k0: bool = False
    strip: float = 0.5
    check_count: bool = True
    imag_tol: float = 1e-7


def _h_and_dh(ctx: SpectralContext, z):
    z = np.asarray(z, dtype=complex)
    return _h_eps_u(ctx.u, z, ctx.L, 1.0), _dh_jacobi(ctx.u, z, ctx.L)


def _noise_floor(z, L):
    # rounding level of the 4x4 determinant: Hadamard bound times a margin
    z = np.asarray(z, dtype=complex)
    return 1e-14 * (1 + np.abs(z)) ** 4 * np.exp(4 * np.abs(z.imag) * L)


def _distance_estimate(ctx, z, h, dh):
    """Newton-step distance to the nearest zero; 0 where ``h`` is noise."""
    dist = np.abs(h / np.where(dh == 0, 1e-300, dh))
    return np.where(np.abs(h) < _noise_floor(z, ctx.L), 0.0, dist)


# -- contour integrals -----------------------------------------------------

def _circle_moments(ctx, center, radius, n):
    theta = 2 * np.pi * np.arange(n) / n
    z = center + radius * np.exp(1j * theta)
    h, dh = _h_and_dh(ctx, z)
    g = dh / h
    dist = float(np.min(_distance_estimate(ctx, z, h, dh)))
    w = g * (z - center)
    return np.mean(w), np.mean(w * (z - center)), dist


def _circle_winding(ctx, center, radius, *, n0=64, max_refinements=4,
                    dist_tol=1e-6):
    """Winding number and root-sum offset on a circle, with refinement."""
    prev = None
    n = n0
    for _ in range(max_refinements + 1):
        m0, m1, dist = _circle_moments(ctx, center, radius, n)
        if dist < dist_tol * max(1.0, radius):
            raise ContourTooCloseToZero(
                f"zero within ~{dist:.2g} of circle around {center}")
        w = m0.real
        near_int = abs(w - round(w)) <= 0.05 and abs(m0.imag) <= 0.05
        if near_int and prev is not None and abs(prev[0] - m0) <= 1e-6 \
                and abs(prev[1] - m1) <= 1e-12 * max(1.0, abs(center)) + 1e-12:
            return int(round(w)), m1
        prev = (m0, m1)
        n *= 2
    if near_int:
        return int(round(w)), m1
    raise NonIntegerWinding(f"circle winding {w:.4f} around {center} is not an integer")


def multiplicity_at(ctx: SpectralContext, k, radius: float) -> int:
    """Winding number of ``h`` on the circle of ``radius`` around ``k``."""
    return _circle_winding(ctx, complex(k), radius)[0]


def _edge_integral(ctx, z0, z1, n0, tol, max_depth=30, max_segments=200_000):
    """Adaptive Simpson integral of ``h'/h`` along a straight edge.

    Segments are bisected until trapezoid and Simpson estimates agree to
    ``tol`` per unit parameter and the phase of ``h`` changes by less than
    pi/4 on each half.
    """
    span = z1 - z0

    def evaluate(t):
        z = z0 + t * span
        h, dh = _h_and_dh(ctx, z)
        return h, dh / h * span, _distance_estimate(ctx, z, h, dh)

    with np.errstate(divide="ignore", invalid="ignore"):
        return _edge_refine(evaluate, z0, span, n0, tol, max_depth, max_segments)


def _edge_refine(evaluate, z0, span, n0, tol, max_depth, max_segments):
    t = np.linspace(0.0, 1.0, n0 + 1)
    h, g, dist = evaluate(t)
    min_dist, where = float(np.min(dist)), z0 + t[np.argmin(dist)] * span
    a, b = t[:-1], t[1:]
    ha, hb, ga, gb = h[:-1], h[1:], g[:-1], g[1:]
    total = 0j
    for depth in range(max_depth):
        if a.size == 0:
            break
        tm = 0.5 * (a + b)
        hm, gm, dm = evaluate(tm)
        i = int(np.argmin(dm))
        if dm[i] < min_dist:
            min_dist, where = float(dm[i]), z0 + tm[i] * span
        w = b - a
        coarse = 0.5 * (ga + gb) * w
        fine = 0.25 * (ga + 2 * gm + gb) * w
        phase_ok = (np.abs(np.angle(hm / ha)) < np.pi / 4) & (np.abs(np.angle(hb / hm)) < np.pi / 4)
        ok = phase_ok & (np.abs(fine - coarse) <= tol * w)
        if depth == max_depth - 1 or 2 * a.size > max_segments:
            ok[:] = True
        total += np.sum(fine[ok] + (fine[ok] - coarse[ok]) / 3)
        keep = ~ok
        a, b, tm = a[keep], b[keep], tm[keep]
        ha, hb, hm = ha[keep], hb[keep], hm[keep]
        ga, gb, gm = ga[keep], gb[keep], gm[keep]
        a, b = np.concatenate([a, tm]), np.concatenate([tm, b])
        ha, hb = np.concatenate([ha, hm]), np.concatenate([hm, hb])
        ga, gb = np.concatenate([ga, gm]), np.concatenate([gm, gb])
    return total, min_dist, where


def _rect_winding(ctx, x0, x1, y0, y1, tol):
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    total = 0j
    worst = (np.inf, None, None)
    for e in range(4):
        z0, z1 = corners[e], corners[(e + 1) % 4]
        n0 = max(16, int(np.ceil(40 * abs(z1 - z0) * ctx.L / np.pi)))
        val, dist, where = _edge_integral(ctx, z0, z1, n0, tol)
        total += val
        if dist < worst[0]:
            worst = (dist, where, e)
    return total / (2j * np.pi), worst


def count_in_rect(ctx: SpectralContext, re_range, im_range, *, dist_tol: float = 1e-6,
                  max_nudge: float = 1e-3, max_refinements: int = 4) -> int:
    """Number of zeros of ``h`` (with multiplicity) inside a rectangle.

    If a zero sits within ``dist_tol`` of an edge, that edge is moved away
    from it in growing steps, by at most ``max_nudge`` in total.
    """
    x0, x1 = map(float, re_range)
    y0, y1 = map(float, im_range)
    if not (x0 < x1 and y0 < y1):
        raise ValueError("rectangle ranges must be increasing")
    step = 1e-5
    while True:
        tol = 1e-2
        for _ in range(max_refinements + 1):
            value, (dist, where, edge) = _rect_winding(ctx, x0, x1, y0, y1, tol)
            if dist < dist_tol:
                break
            if abs(value.real - round(value.real)) <= 0.05 and abs(value.imag) <= 0.05:
                return int(round(value.real))
            tol /= 10
        else:
            raise NonIntegerWinding(f"rectangle winding {value.real:.4f} is not an integer")
        # move the offending edge away from the nearby zero
        if step > max_nudge:
            raise ContourTooCloseToZero(f"zero within ~{dist:.2g} of contour near {where}")
        h, dh = _h_and_dh(ctx, where)
        zero = where - h / dh if h != 0 and dh != 0 else where
        if edge in (1, 3):
            x = x1 if edge == 1 else x0
            x += step if x >= zero.real else -step
            if edge == 1:
                x1 = x
            else:
                x0 = x
        else:
            y = y0 if edge == 0 else y1
            y += step if y >= zero.imag else -step
            if edge == 0:
                y0 = y
            else:
                y1 = y
        step *= 2


# -- scanning ---------------------------------------------------------------

def _muller(f, x0, x1, x2, max_iter=60):
    f0, f1, f2 = f(x0), f(x1), f(x2)
    for _ in range(max_iter):
        if f2 == 0:
            return x2, True
        h1, h2 = x1 - x0, x2 - x1
        d1, d2 = (f1 - f0) / h1, (f2 - f1) / h2
        a = (d2 - d1) / (h2 + h1)
        b = a * h2 + d2
        disc = np.sqrt(b * b - 4 * f2 * a + 0j)
        den = b + disc if abs(b + disc) >= abs(b - disc) else b - disc
        if den == 0:
            return x2, False
        dx = -2 * f2 / den
        x0, x1, x2 = x1, x2, x2 + dx
        f0, f1, f2 = f1, f2, f(x2)
        if abs(dx) <= 1e-15 * max(1.0, abs(x2)):
            return x2, True
    return x2, False


def _polish(ctx, k0, dk, strip, deflate=()):
    """Muller then Newton from a grid minimum at ``k0``.

    ``deflate`` lists ``(root, multiplicity)`` pairs divided out of ``h``
    so that a nearby stronger zero does not capture the iteration.
    """
    if deflate:
        def f(z):
            val = complex(_h_eps_u(ctx.u, z, ctx.L, 1.0))
            for r, m in deflate:
                val /= (z - r) ** m
            return val

        x, ok = _muller(f, complex(k0 - dk / 2), complex(k0 + dk / 2), complex(k0))
        if not ok or not np.isfinite(x) or abs(x - k0) > 2 * dk or abs(x.imag) > strip:
            return complex(k0), "unpolished"
        return x, "muller"
    f = lambda z: complex(_h_eps_u(ctx.u, z, ctx.L, 1.0))
    x, ok = _muller(f, complex(k0 - dk / 2), complex(k0 + dk / 2), complex(k0))
    method = "muller"
    if not ok or not np.isfinite(x) or abs(x - k0) > 2 * dk or abs(x.imag) > strip:
        x, method = complex(k0), "unpolished"
    for _ in range(8):
        h, dh = _h_and_dh(ctx, x)
        if dh == 0 or h == 0:
            break
        cand = x - complex(h / dh)
        if abs(cand - k0) > 2 * dk or abs(f(cand)) >= abs(complex(h)):
            break
        x, method = cand, "newton"
    return x, method


def _grid_minima(mag, threshold, win):
    out = []
    for i in range(1, len(mag) - 1):
        if mag[i] <= mag[i - 1] and mag[i] < mag[i + 1]:
            scale = np.max(mag[max(0, i - win):i + win + 1])
            if mag[i] <= threshold * scale:
                out.append(i)
    return out


class _Collector:
    """Accepts polished zeros, assigns multiplicities, and keeps real and
    off-axis zeros apart."""

    def __init__(self, ctx, opts, k_max, dk):
        self.ctx, self.opts, self.k_max, self.dk = ctx, opts, k_max, dk
        self.cap = opts.mult_radius if opts.mult_radius is not None else 0.05 / ctx.L
        self.accepted: list[tuple] = []
        self.roots: list[Root] = []
        self.off_axis: list[complex] = []

    def known(self, x):
        return any(abs(r - x) < 1e-6 * max(1.0, abs(x)) for r, _ in self.accepted)

    def near(self, k0):
        return [(r, m) for r, m in self.accepted if abs(r - k0) < 4 * self.dk]

    def add(self, x, method, neighbours=()) -> bool:
        others = list(neighbours) + [r for r, _ in self.accepted]
        gaps = [abs(x - c) for c in others if abs(x - c) > 1e-9]
        if x.real <= self.opts.k_min:
            return False
        radius = min([self.cap] + [0.5 * g for g in gaps] + [0.5 * x.real])
        for _ in range(4):
            try:
                mult, m1 = _circle_winding(self.ctx, x, radius)
                break
            except (NonIntegerWinding, ContourTooCloseToZero):
                radius /= 4
        else:
            # left for the strip count to report
            return False
        if mult <= 0:
            return False
        if mult > 1:
            x, method = x + m1 / mult, "contour"
        if self.known(x):
            return False
        self.accepted.append((x, mult))
        if abs(x.imag) > self.opts.imag_tol * max(1.0, abs(x)):
            self.off_axis.append(complex(x))
            return True
        k = float(x.real)
        if self.opts.k_min < k <= self.k_max:
            resid = float(abs(_h_eps_u(self.ctx.u, k, self.ctx.L, 1.0)))
            self.roots.append(Root(k, mult, resid, method))
        return True

    def count_between(self, lo, hi, strip):
        return sum(m for r, m in self.accepted
                   if lo < r.real <= hi and abs(r.imag) < strip)


def _repair(col: _Collector, lo, hi, strip, depth=0):
    """Find zeros the grid missed, by bisecting the strip with the argument
    principle and searching short pieces for minima of the deflated ``h``."""
    ctx, dk = col.ctx, col.dk
    missing = count_in_rect(ctx, (lo, hi), (-strip, strip)) - col.count_between(lo, hi, strip)
    if missing <= 0:
        return
    if hi - lo > 8 * dk and depth < 40:
        mid = 0.5 * (lo + hi)
        for r, _ in col.accepted:
            if abs(r.real - mid) < 0.1 * dk:
                mid = r.real + 0.25 * dk
        _repair(col, lo, mid, strip, depth + 1)
        _repair(col, mid, hi, strip, depth + 1)
        return
    grid = np.linspace(lo, hi, 201)
    defl = [(r, m) for r, m in col.accepted if lo - 8 * dk < r.real < hi + 8 * dk]
    vals = _h_eps_u(ctx.u, grid, ctx.L, 1.0).astype(complex)
    for r, m in defl:
        vals = vals / (grid - r) ** m
    mag = np.abs(vals)
    idx = _grid_minima(np.concatenate([[np.inf], mag, [np.inf]]), 1.0, len(grid))
    step = grid[1] - grid[0]
    for i in sorted(idx, key=lambda j: mag[j - 1]):
        k0 = grid[i - 1]
        x, method = _polish(ctx, k0, 4 * step, strip, deflate=defl)
        if method != "unpolished" and not col.known(x):
            col.add(x, method)
            defl = [(r, m) for r, m in col.accepted if lo - 8 * dk < r.real < hi + 8 * dk]


def scan_roots(ctx: SpectralContext, k_max: float, opts: ScanOptions | None = None
               ) -> RootScanReport:
    """Real zeros of ``h`` in ``(opts.k_min, k_max]`` with multiplicities.

    Zeros are seeded from local minima of ``|h|`` on a grid. When the strip
    winding number disagrees with what the grid found, the strip is bisected
    to locate and search the pieces holding the missing zeros.

    Raises
    ------
    CountMismatch
        If the multiplicity-weighted real count still differs from the
        winding number around ``[k_min, k_max] x [-strip/L, strip/L]``; the
        report is attached to the exception.
    """
    opts = opts or ScanOptions()
    if not k_max > opts.k_min:
        raise ValueError("k_max must exceed k_min")
    L = ctx.L
    dk = np.pi / L / opts.samples_per_interval
    n = int(np.ceil((k_max - opts.k_min) / dk)) + 2
    grid = opts.k_min + dk * np.arange(n)
    mag = np.abs(_h_eps_u(ctx.u, grid, L, 1.0))
    cands = [grid[i] for i in _grid_minima(mag, opts.candidate_threshold,
                                            opts.samples_per_interval)]
    strip = opts.strip / L
    polished = [_polish(ctx, k0, dk, strip) for k0 in cands]
    centers = [x for x, _ in polished]

    col = _Collector(ctx, opts, k_max, dk)
    for idx, (x, method) in enumerate(polished):
        if col.known(x):
            # captured by a zero already found; look again with it divided out
            x, method = _polish(ctx, cands[idx], dk, strip, deflate=col.near(cands[idx]))
            if method == "unpolished" or col.known(x):
                continue
            centers[idx] = x
        col.add(x, method, [c for j, c in enumerate(centers) if j != idx])

    total = None
    if opts.check_count:
        # keep the left edge clear of the rounding-dominated zone around k = 0
        k_lo = opts.k_min
        first = min([r.k for r in col.roots] + [k_max])
        while 2 * k_lo < first / 2:
            h0, dh0 = _h_and_dh(ctx, k_lo)
            if abs(h0) >= 1e3 * _noise_floor(k_lo, L) and abs(h0) >= 1e-3 * abs(dh0):
                break
            k_lo *= 2
        total = count_in_rect(ctx, (k_lo, k_max), (-strip, strip))
        if total != sum(r.multiplicity for r in col.roots):
            _repair(col, k_lo, k_max, strip)

    roots = sorted(col.roots, key=lambda r: r.k)
    if opts.include_k0:
        r0 = 0.05 / L
        m0 = count_in_rect(ctx, (-r0, r0), (-r0, r0))
        if m0 > 0:
            warnings.warn(f"including a zero of order {m0} at k = 0; its mode is not "
                          "established by the spectral function alone", stacklevel=2)
            roots.insert(0, Root(0.0, m0, float(abs(_h_eps_u(ctx.u, 0.0, L, 1.0))), "contour"))

    weighted = sum(r.multiplicity for r in roots if r.k > 0)
    if total is None:
        total = weighted
    off_axis = tuple(sorted(col.off_axis, key=lambda z: (z.real, z.imag)))
    report = RootScanReport(tuple(roots), float(k_max), int(n), int(total),
                            total == weighted, float(opts.k_min), off_axis)
    if not report.consistent:
        raise CountMismatch(
            f"scan found {weighted} real zeros (with multiplicity) but the strip "
            f"winding number is {total}", report)
    return report

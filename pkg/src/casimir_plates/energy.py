"""Heat-kernel regularized vacuum energy by double mode summation.

The energy is ``sum_n sum_k mult(k) * w * exp(-eps * w)`` with
``w = sqrt(k**2 + q_n**2 + m**2)`` and ``q_n = 2 pi n / a``. The ``k`` sum
runs over real zeros of the spectral function. Both sums are truncated
where an analytic majorant of the remainder drops below the budget.

Tail majorant: ``w <= k + q + m`` and ``w >= (k + q) / sqrt(2)``, so every
term is at most ``(k + q + m) exp(-beta (k + q))`` with
``beta = eps / sqrt(2)``. Beyond the cutoff ``K`` the weighted root count in
any cell of width ``pi / (2L)`` is assumed at most ``c``, with
``c = max(2, observed)``; the remaining double geometric sums have closed
forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .boundary import BoundaryCondition
from .errors import (CasimirPlatesError, IllConditionedFit,
                     InconsistentBoundaryCondition, TailBoundUnachievable)
from .roots import RootScanReport, ScanOptions, scan_roots
from .spectral import SpectralContext

__all__ = [
    "EnergyParams",
    "EnergyResult",
    "CurvePoint",
    "FinitePartReport",
    "omega",
    "regularized_energy",
    "energy_curve",
    "force",
    "fit_finite_part",
    "finite_part",
]

# roots are spaced ~pi/L; a cell of half that width holds at most one double root
_CELL_WEIGHT = 2
_MAX_ROOT_CELLS = 200_000


@dataclass(frozen=True)
class EnergyParams:
    L: float
    a: float
    heat_epsilon: float
    m: float = 0.0
    tail_tol: float = 1e-10
    k_max_hint: float | None = None
    n_max_hint: int | None = None
    include_n0: bool = True
    include_k0: bool = False

    def __post_init__(self):
        for name in ("L", "a", "heat_epsilon", "tail_tol"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if not (np.isfinite(self.m) and self.m >= 0):
            raise ValueError(f"mass must be non-negative, got {self.m}")
        if self.n_max_hint is not None and self.n_max_hint < 0:
            raise ValueError("n_max_hint must be non-negative")

    @property
    def q_step(self) -> float:
        return 2 * np.pi / self.a


@dataclass(frozen=True)
class EnergyResult:
    value: float
    modes_used: int
    n_max_used: int
    k_count_used: int
    tail_bound: float
    roots: RootScanReport
    k_cutoff: float = 0.0
    # (k, multiplicity, summed contribution over n) per root
    contributions: tuple = ()

    def contribution_near(self, k: float) -> float:
        """Contribution of the root closest to ``k``."""
        best = min(self.contributions, key=lambda c: abs(c[0] - k))
        return best[2]


def omega(k, n, p: EnergyParams):
    """Mode frequency ``sqrt(k**2 + (2 pi n / a)**2 + m**2)``."""
    k = np.asarray(k, dtype=float)
    n = np.asarray(n)
    if np.any(k < 0) or np.any(n < 0):
        raise ValueError("k and n must be non-negative")
    out = np.sqrt(k ** 2 + (n * p.q_step) ** 2 + p.m ** 2)
    return float(out) if out.ndim == 0 else out


def _geometric(r):
    return 1.0 / (1.0 - r), r / (1.0 - r) ** 2


def _k_tail(K, c, p: EnergyParams, L):
    beta = p.heat_epsilon / math.sqrt(2)
    s = np.pi / (2 * L)
    b = p.q_step
    r1, r2 = math.exp(-beta * s), math.exp(-beta * b)
    s1, t1 = _geometric(r1)
    s2, t2 = _geometric(r2)
    if not p.include_n0:
        s2 *= r2
    return c * math.exp(-beta * K) * ((K + s + p.m) * s1 * s2 + s * t1 * s2 + b * s1 * t2)


def _n_tail(ks, weights, N, p: EnergyParams):
    """Majorant of the n > N remainder for the given roots."""
    if len(ks) == 0:
        return 0.0
    beta = p.heat_epsilon / math.sqrt(2)
    b = p.q_step
    r = math.exp(-beta * b)
    rn = r ** (N + 1)
    geo = rn / (1 - r)
    lin = rn * ((N + 1) - N * r) / (1 - r) ** 2
    ks = np.asarray(ks, dtype=float)
    terms = weights * np.exp(-beta * ks) * ((ks + p.m) * geo + b * lin)
    return float(math.fsum(terms))


def _choose_cutoff(c, p: EnergyParams, L, budget):
    K = max(np.pi / L, p.k_max_hint or 0.0)
    while _k_tail(K, c, p, L) > budget:
        K *= 1.5
        if K * L / np.pi > _MAX_ROOT_CELLS:
            raise TailBoundUnachievable(
                f"tail budget {budget:g} needs k cutoff beyond {K:.3g} at eps={p.heat_epsilon:g}")
    return K


def _observed_cell_weight(roots, L):
    """Largest weighted root count in any half-open window of width pi/(2L)."""
    s = np.pi / (2 * L)
    ks = [r.k for r in roots]
    ws = [r.multiplicity for r in roots]
    best, j, acc = 0, 0, 0
    for i in range(len(ks)):
        acc += ws[i]
        while ks[i] - ks[j] >= s:
            acc -= ws[j]
            j += 1
        best = max(best, acc)
    return best


def _check_consistent(bc: BoundaryCondition, allow_inconsistent: bool):
    if not bc.classification.is_consistent and not allow_inconsistent:
        raise InconsistentBoundaryCondition(
            f"boundary condition '{bc.label}' is {bc.classification.kind.value}; "
            "its vacuum energy is not defined")


def _scan(ctx, K, p: EnergyParams):
    return scan_roots(ctx, K, ScanOptions(include_k0=p.include_k0))


def _sum_modes(report: RootScanReport, K, p: EnergyParams, budget):
    roots = [r for r in report.roots if r.k <= K]
    ks = np.array([r.k for r in roots], dtype=float)
    ws = np.array([r.multiplicity for r in roots], dtype=float)
    N = p.n_max_hint or 0
    while _n_tail(ks, ws, N, p) > budget:
        N = max(1, 2 * N)
        if N > 10_000_000:
            raise TailBoundUnachievable("lattice-momentum tail does not converge")
    n0 = 0 if p.include_n0 else 1
    n = np.arange(n0, N + 1)
    if len(ks) == 0:
        return 0.0, N, (), _n_tail(ks, ws, N, p)
    w = np.sqrt(ks[:, None] ** 2 + (n[None, :] * p.q_step) ** 2 + p.m ** 2)
    terms = ws[:, None] * w * np.exp(-p.heat_epsilon * w)
    per_root = tuple((float(k), int(m), math.fsum(row))
                     for k, m, row in zip(ks, ws, terms))
    value = math.fsum(terms.ravel())
    return value, N, per_root, _n_tail(ks, ws, N, p)


def regularized_energy(ctx: SpectralContext, p: EnergyParams, *,
                       allow_inconsistent: bool = False,
                       roots: RootScanReport | None = None) -> EnergyResult:
    """Heat-kernel regularized vacuum energy at separation ``ctx.L``.

    ``p.L`` is ignored in favour of ``ctx.L``. A precomputed ``roots`` report
    may be passed when it covers the chosen cutoff; otherwise roots are
    scanned here. Inconsistent boundary conditions are refused unless
    ``allow_inconsistent`` is set.
    """
    _check_consistent(ctx.bc, allow_inconsistent)
    L = ctx.L
    half = 0.5 * p.tail_tol
    c = _CELL_WEIGHT
    for _ in range(8):
        K = _choose_cutoff(c, p, L, half)
        report = roots if roots is not None and roots.k_max >= K else _scan(ctx, K, p)
        observed = _observed_cell_weight([r for r in report.roots if r.k > 0], L)
        if observed <= c:
            break
        c = observed
    else:
        raise TailBoundUnachievable("root density keeps growing with the cutoff")
    k_tail = _k_tail(K, c, p, L)
    value, N, per_root, n_tail = _sum_modes(report, K, p, half)
    n_count = N + 1 - (0 if p.include_n0 else 1)
    tail = k_tail + n_tail
    if tail > p.tail_tol:
        raise TailBoundUnachievable(f"tail bound {tail:.3g} exceeds {p.tail_tol:g}")
    return EnergyResult(
        value=value,
        modes_used=len(per_root) * n_count,
        n_max_used=N,
        k_count_used=len(per_root),
        tail_bound=tail,
        roots=report,
        k_cutoff=K,
        contributions=per_root,
    )


@dataclass(frozen=True)
class CurvePoint:
    L: float
    result: EnergyResult | None
    status: str = "ok"


def energy_curve(bc: BoundaryCondition, p: EnergyParams, L_grid, *,
                 allow_inconsistent: bool = False) -> list[CurvePoint]:
    """Energies on a grid of separations; failures are recorded per point."""
    grid = [float(x) for x in L_grid]
    if any(x <= 0 for x in grid):
        raise ValueError("separations must be positive")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("L_grid must be increasing")
    _check_consistent(bc, allow_inconsistent)
    out = []
    for L in grid:
        try:
            res = regularized_energy(SpectralContext(bc, L), replace(p, L=L),
                                     allow_inconsistent=allow_inconsistent)
            out.append(CurvePoint(L, res))
        except CasimirPlatesError as exc:
            out.append(CurvePoint(L, None, f"{type(exc).__name__}: {exc}"))
    return out


def force(bc: BoundaryCondition, p: EnergyParams, L: float, dL: float, *,
          allow_inconsistent: bool = False, return_results: bool = False):
    """Central-difference force ``-(E(L+dL) - E(L-dL)) / (2 dL)`` at fixed eps.

    Both energies are summed up to the same lattice-momentum cutoff so that
    contributions independent of ``L`` cancel exactly.
    """
    if not (0 < dL <= L / 100):
        raise ValueError("need 0 < dL <= L/100")

    def energy(sep, hint):
        return regularized_energy(SpectralContext(bc, sep),
                                  replace(p, L=sep, n_max_hint=hint),
                                  allow_inconsistent=allow_inconsistent)

    lo, hi = energy(L - dL, p.n_max_hint), energy(L + dL, p.n_max_hint)
    n_common = max(lo.n_max_used, hi.n_max_used)
    if lo.n_max_used != n_common:
        lo = energy(L - dL, n_common)
    if hi.n_max_used != n_common:
        hi = energy(L + dL, n_common)
    f = -(hi.value - lo.value) / (2 * dL)
    return (f, lo, hi) if return_results else f


@dataclass(frozen=True)
class FinitePartReport:
    """Least-squares fit of E(eps) on ``eps**-3, eps**-2, eps**-1, 1, eps``.

    HEURISTIC: no divergence structure is known, so ``a0`` is only the
    constant of this particular model. ``flagged`` is set when the residual
    says the model does not fit (for example a missing ``log(eps)`` term).
    """

    a3: float
    a2: float
    a1: float
    a0: float
    a_lin: float
    residual: float
    flagged: bool
    condition: float
    heuristic: bool = True


def fit_finite_part(eps_grid, values, *, max_condition: float = 1e10,
                    residual_tol: float = 1e-10) -> FinitePartReport:
    eps = np.asarray(eps_grid, dtype=float)
    y = np.asarray(values, dtype=float)
    if eps.ndim != 1 or eps.shape != y.shape:
        raise ValueError("eps_grid and values must be 1-d of equal length")
    if len(eps) < 6:
        raise ValueError("need at least 6 eps values")
    if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ValueError("eps_grid must be positive and strictly decreasing")
    basis = np.stack([eps ** -3, eps ** -2, eps ** -1, np.ones_like(eps), eps], axis=1)
    norms = np.linalg.norm(basis, axis=0)
    scaled = basis / norms
    cond = float(np.linalg.cond(scaled))
    if cond > max_condition:
        raise IllConditionedFit(f"fit condition number {cond:.3g} exceeds {max_condition:g}")
    coef, *_ = np.linalg.lstsq(scaled, y, rcond=None)
    coef = coef / norms
    resid = float(np.linalg.norm(basis @ coef - y))
    flagged = resid > residual_tol * max(1.0, float(np.max(np.abs(y))))
    a3, a2, a1, a0, a_lin = (float(v) for v in coef)
    return FinitePartReport(a3, a2, a1, a0, a_lin, resid, bool(flagged), cond)


def finite_part(bc: BoundaryCondition, p: EnergyParams, L: float, eps_grid, *,
                allow_inconsistent: bool = False, **fit_kw) -> FinitePartReport:
    """Heuristic finite part of the regularized energy at separation ``L``."""
    eps = [float(e) for e in eps_grid]
    if len(eps) < 6 or any(b >= a for a, b in zip(eps, eps[1:])) or eps[-1] <= 0:
        raise ValueError("eps_grid needs >= 6 strictly decreasing positive values")
    _check_consistent(bc, allow_inconsistent)
    ctx = SpectralContext(bc, L)
    # one scan at the smallest eps covers every other grid point
    base = replace(p, L=L, heat_epsilon=eps[-1])
    K = _choose_cutoff(_CELL_WEIGHT, base, L, 0.5 * p.tail_tol)
    report = _scan(ctx, K, base)
    values = [regularized_energy(ctx, replace(base, heat_epsilon=e), roots=report,
                                 allow_inconsistent=allow_inconsistent).value
              for e in eps]
    return fit_finite_part(eps, values, **fit_kw)

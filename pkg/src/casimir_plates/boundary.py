"""Boundary conditions for a scalar field between two periodic plates.

A boundary condition is a 4x4 unitary ``U`` relating the boundary data
``Psi_-`` and ``Psi_+`` of the mode amplitudes. Only unitaries whose
eigenphases all lie in ``[0, pi]`` give a non-negative field operator.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np

from .errors import (
    MissingParameter,
    NonUnitaryResult,
    SamplingBudgetExceeded,
    SpectrumContainsPlusMinusOne,
    UnknownPreset,
)
from .kernel import (
    adjugate4,
    as_cmat4,
    charpoly,
    det4,
    quartic_roots,
    unitarity_defect,
    unitarize,
)

__all__ = [
    "ClassKind",
    "Classification",
    "Eigenphases",
    "BoundaryCondition",
    "PRESETS",
    "eigenphases",
    "classify",
    "cayley",
    "inverse_cayley",
    "psd_margin",
    "preset",
    "haar_sample",
    "factor_u1_su4",
    "bc_to_json",
    "bc_from_json",
    "matrix_to_json",
    "matrix_from_json",
]

TWO_PI = 2 * np.pi
UNITARITY_TOL = 1e-10
INGEST_UNITARITY_TOL = 1e-8


class ClassKind(str, enum.Enum):
    NON_UNITARY = "NonUnitary"
    INCONSISTENT = "Inconsistent"
    BOUNDARY = "BoundaryOfMr"
    INTERIOR = "InteriorOfMrF"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Classification:
    kind: ClassKind
    witness: float | None = None

    @property
    def is_consistent(self) -> bool:
        return self.kind in (ClassKind.BOUNDARY, ClassKind.INTERIOR)


@dataclass(frozen=True)
class Eigenphases:
    """Eigenphases in ``[0, 2 pi)``, ascending, with characteristic
    polynomial residuals at the corresponding eigenvalues."""

    thetas: tuple
    residuals: tuple

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.exp(1j * np.array(self.thetas))


def eigenphases(u) -> Eigenphases:
    p = charpoly(u)
    lam = quartic_roots(p)
    thetas = np.mod(np.angle(lam), TWO_PI)
    thetas[thetas >= TWO_PI] = 0.0
    order = np.argsort(thetas, kind="stable")
    res = [abs(p(x)) for x in lam[order]]
    return Eigenphases(tuple(float(t) for t in thetas[order]),
                       tuple(float(r) for r in res))


def _phase_rule(thetas, tol: float) -> Classification:
    th = np.asarray(thetas)
    bad = (th > np.pi + tol) & (th < TWO_PI - tol)
    if np.any(bad):
        # report the phase deepest inside the forbidden band
        w = th[bad][np.argmax(np.minimum(th[bad] - np.pi, TWO_PI - th[bad]))]
        return Classification(ClassKind.INCONSISTENT, float(w))
    dist = np.minimum.reduce([np.abs(th), np.abs(th - np.pi), np.abs(TWO_PI - th)])
    if np.any(dist <= tol):
        return Classification(ClassKind.BOUNDARY, float(th[np.argmin(dist)]))
    return Classification(ClassKind.INTERIOR, float(th[np.argmin(dist)]))


def classify(u, tol: float = 1e-9, *, unitarity_tol: float = UNITARITY_TOL
             ) -> tuple[Eigenphases, Classification]:
    """Eigenphases of ``u`` and its consistency class.

    ``tan(theta/2) >= 0`` is tested as ``theta in [0, pi]`` with bands of
    width ``tol`` around 0 and pi counted as the boundary. A matrix that is
    not unitary within ``unitarity_tol`` is classified ``NonUnitary`` with
    the unitarity defect as witness.
    """
    a = as_cmat4(u)
    phases = eigenphases(a)
    defect = unitarity_defect(a)
    if defect > unitarity_tol:
        return phases, Classification(ClassKind.NON_UNITARY, defect)
    return phases, _phase_rule(phases.thetas, tol)


@dataclass(frozen=True, eq=False)
class BoundaryCondition:
    """Validated unitary boundary condition.

    ``u`` is stored read-only; ``eigenphases`` and ``classification`` are
    computed once at construction.
    """

    u: np.ndarray
    label: str = "custom"
    params: Mapping[str, Any] = field(default_factory=dict)
    unitarity_tol: float = UNITARITY_TOL
    eigenphases: Eigenphases = field(init=False, repr=False)
    classification: Classification = field(init=False)

    def __post_init__(self):
        u = as_cmat4(self.u, name="boundary matrix")
        defect = unitarity_defect(u)
        if defect > self.unitarity_tol:
            raise NonUnitaryResult(
                f"matrix is not unitary: max|U^H U - I| = {defect:.3g}")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))
        phases, cls = classify(u, unitarity_tol=self.unitarity_tol)
        object.__setattr__(self, "eigenphases", phases)
        object.__setattr__(self, "classification", cls)

    @property
    def is_consistent(self) -> bool:
        return self.classification.is_consistent

    def __eq__(self, other):
        if not isinstance(other, BoundaryCondition):
            return NotImplemented
        return (self.label == other.label and dict(self.params) == dict(other.params)
                and np.array_equal(self.u, other.u))

    __hash__ = None


# -- Cayley transform ------------------------------------------------------

def _inverse(m: np.ndarray) -> np.ndarray:
    return adjugate4(m) / det4(m)


def cayley(u, *, gap: float = 1e-8) -> np.ndarray:
    """``A = -i (I - U)(I + U)^-1``.

    Raises ``SpectrumContainsPlusMinusOne`` when an eigenvalue lies within
    ``gap`` of +1 or -1.
    """
    a = as_cmat4(u)
    lam = quartic_roots(charpoly(a))
    near = np.minimum(np.abs(lam - 1), np.abs(lam + 1))
    if np.any(near <= gap):
        raise SpectrumContainsPlusMinusOne(
            f"eigenvalue within {np.min(near):.2g} of +/-1")
    eye = np.eye(4)
    return -1j * (eye - a) @ _inverse(eye + a)


def inverse_cayley(a, *, herm_tol: float = 1e-10) -> np.ndarray:
    """The unitary ``U = (I + iA)^-1 (I - iA)`` with ``cayley(U) == A``."""
    h = as_cmat4(a)
    if np.max(np.abs(h - h.conj().T)) > herm_tol:
        raise ValueError("inverse_cayley needs a Hermitian matrix")
    eye = np.eye(4)
    return _inverse(eye + 1j * h) @ (eye - 1j * h)


def psd_margin(u) -> float:
    """Smallest eigenvalue of the Hermitian operator ``i (I - U)(I + U)^-1``.

    Non-negative exactly when the boundary condition is consistent; this is
    an independent check of the eigenphase rule.
    """
    b = -cayley(u)
    b = 0.5 * (b + b.conj().T)
    return float(np.linalg.eigvalsh(b)[0])


# -- preset catalogue ------------------------------------------------------

@dataclass(frozen=True)
class PresetSpec:
    name: str
    params: tuple
    description: str
    closed_form: str


def _phases(params, names=("theta1", "theta2", "theta3", "theta4")):
    return [np.exp(1j * float(params[n])) for n in names]


def _diagonal(p):
    return np.diag(_phases(p))


def _antidiagonal(p):
    l1, l2, l3, l4 = _phases(p)
    return np.array([[0, 0, 0, l1], [0, 0, l2, 0], [0, l3, 0, 0], [l4, 0, 0, 0]])


_PERIODIC = np.array([[0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=complex)


def _two_flux(alpha, beta):
    ea, eb = np.exp(1j * alpha), np.exp(1j * beta)
    return np.array([[0, 0, 0, np.exp(-1j * alpha)], [0, 0, ea, 0],
                     [0, eb, 0, 0], [np.exp(-1j * beta), 0, 0, 0]])


def _quasi_periodic(p):
    c, s = np.cos(float(p["alpha"])), np.sin(float(p["alpha"]))
    return np.array([[0, 0, c, s], [0, 0, s, -c], [c, -s, 0, 0], [-s, -c, 0, 0]], dtype=complex)


_BUILDERS = {
    "dirichlet": lambda p: -np.eye(4, dtype=complex),
    "neumann": lambda p: np.eye(4, dtype=complex),
    "mixed_nd": lambda p: np.diag([-1, -1, 1, 1]).astype(complex),
    "diagonal": _diagonal,
    "antidiagonal": _antidiagonal,
    "periodic": lambda p: _PERIODIC.copy(),
    "antiperiodic": lambda p: -_PERIODIC,
    "periodic_antiperiodic": lambda p: np.array(
        [[0, 0, 0, 1], [0, 0, 1, 0], [0, -1, 0, 0], [-1, 0, 0, 0]], dtype=complex),
    "pseudo_periodic": lambda p: _two_flux(float(p["alpha"]), float(p["alpha"])),
    "two_flux": lambda p: _two_flux(float(p["alpha"]), float(p["beta"])),
    "quasi_periodic": _quasi_periodic,
}

_THETAS = ("theta1", "theta2", "theta3", "theta4")

PRESETS: dict[str, PresetSpec] = {s.name: s for s in [
    PresetSpec("dirichlet", (), "U = -I; the field vanishes on both plates",
               "h(k, L) = -64 sin^2(kL)"),
    PresetSpec("neumann", (), "U = I; vanishing normal derivative on both plates",
               "h(k, L) = -64 k^4 sin^2(kL)"),
    PresetSpec("mixed_nd", (), "U = diag(-1, -1, 1, 1); Dirichlet for upward-moving, "
               "Neumann for downward-moving lattice modes",
               "h(k, L) = -64 k^2 cos^2(kL)"),
    PresetSpec("diagonal", _THETAS, "U = diag(e^{i theta1}, ..., e^{i theta4})",
               "h(k, L) = p(l1, l3; k, L) p(l2, l4; k, L) with "
               "p(x, y; k, L) = 2i(k^2+1) sin(kL)(x + y) - sqrt(D+) x y + sqrt(D-), "
               "sqrt(D+-) = 2i[2k cos(kL) -+ (k^2-1) sin(kL)], l_j = e^{i theta_j}"),
    PresetSpec("antidiagonal", _THETAS, "U anti-diagonal with entries "
               "(e^{i theta1}, e^{i theta2}, e^{i theta3}, e^{i theta4}) from the top row down",
               "h(k, L) = D- + D+ l1 l2 l3 l4 + 4(k^2+1)^2 sin^2(kL)(l2 l3 + l1 l4) "
               "+ 16 k^2 (l1 l2 + l3 l4), D+- = -4[2k cos(kL) -+ (k^2-1) sin(kL)]^2"),
    PresetSpec("periodic", (), "anti-diagonal permutation; the two plates are identified",
               "h(k, L) = 64 k^2 sin^2(kL)"),
    PresetSpec("antiperiodic", (), "minus the periodic matrix",
               "h(k, L) = 64 k^2 sin^2(kL)"),
    PresetSpec("periodic_antiperiodic", (), "periodic for upward-moving, anti-periodic "
               "for downward-moving lattice modes",
               "h(k, L) = -16 (k^2 - 1)^2 sin^2(kL)"),
    PresetSpec("pseudo_periodic", ("alpha",), "cylinder threaded by a magnetic flux alpha",
               "h(k, L) = 8(-1 + 6k^2 - k^4 + (1+k^2)^2 cos(2 alpha)) sin^2(kL)"),
    PresetSpec("two_flux", ("alpha", "beta"), "upward modes see flux alpha, downward "
               "modes flux beta",
               "h(k, L) = 8(-1 + 6k^2 - k^4 + (1+k^2)^2 cos(alpha + beta)) sin^2(kL)"),
    PresetSpec("quasi_periodic", ("alpha",), "plates identified through a delta-type "
               "junction with mixing angle alpha",
               "h(k, L) = 8(-1 + 6k^2 - k^4 + (1+k^2)^2 cos(2 alpha)) sin^2(kL)"),
]}


def normalize_params(name: str, params: Mapping[str, Any] | None) -> dict[str, float]:
    """Check ``params`` against the family's parameter names.

    A ``thetas`` list is accepted in place of ``theta1..theta4``.
    """
    if name not in PRESETS:
        raise UnknownPreset(name)
    params = dict(params or {})
    if "thetas" in params:
        thetas = list(params.pop("thetas"))
        if len(thetas) != 4:
            raise ValueError("thetas needs exactly four values")
        params.update(zip(_THETAS, thetas))
    wanted = PRESETS[name].params
    missing = [n for n in wanted if n not in params]
    if missing:
        raise MissingParameter(f"preset {name!r} needs {', '.join(missing)}")
    extra = sorted(set(params) - set(wanted))
    if extra:
        raise ValueError(f"preset {name!r} does not take {', '.join(extra)}")
    return {n: float(params[n]) for n in wanted}


def preset(name: str, params: Mapping[str, Any] | None = None) -> BoundaryCondition:
    clean = normalize_params(name, params)
    u = _BUILDERS[name](clean)
    return BoundaryCondition(u, label=name, params=clean)


# -- sampling and factorization --------------------------------------------

def _as_kind(constraint) -> ClassKind | None:
    if constraint is None:
        return None
    if isinstance(constraint, Classification):
        return constraint.kind
    return ClassKind(constraint)


def haar_sample(rng_seed: int, constraint=None, *, max_draws: int = 10_000
                ) -> BoundaryCondition:
    """Haar-distributed unitary from a seeded generator.

    With a ``constraint`` the draw is repeated (plain rejection) until the
    classification matches. Deterministic for a fixed seed.
    """
    kind = _as_kind(constraint)
    rng = np.random.default_rng(rng_seed)
    for draw in range(max_draws):
        z = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))) / np.sqrt(2)
        u = unitarize(z)
        if kind is not None:
            # cheap pre-filter; the classifier below stays authoritative
            th = np.mod(np.angle(np.linalg.eigvals(u)), TWO_PI)
            if kind is ClassKind.INTERIOR and np.any(th > np.pi):
                continue
        bc = BoundaryCondition(u, label="haar", params={"seed": rng_seed, "draw": draw})
        if kind is None or bc.classification.kind is kind:
            return bc
    raise SamplingBudgetExceeded(f"no {kind} sample in {max_draws} draws (seed {rng_seed})")


def factor_u1_su4(u) -> tuple[float, np.ndarray]:
    """Split ``u = e^{i phase} s`` with ``det(s) = 1``.

    ``phase`` is a quarter of the principal argument of ``det(u)``; the other
    three quarter-phases are equally valid and not returned.
    """
    a = as_cmat4(u)
    phase = float(np.angle(det4(a))) / 4
    return phase, np.exp(-1j * phase) * a


# -- JSON schema -----------------------------------------------------------

def matrix_to_json(u) -> list:
    a = np.asarray(u, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def matrix_from_json(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.shape != (4, 4, 2):
        raise ValueError(f"matrix must be 4x4 of [re, im] pairs, got shape {arr.shape}")
    return as_cmat4(arr[..., 0] + 1j * arr[..., 1])


def bc_to_json(bc: BoundaryCondition) -> dict:
    if bc.label in PRESETS:
        return {"preset": bc.label, "params": dict(bc.params)}
    return {"matrix": matrix_to_json(bc.u)}


def bc_from_json(obj: Mapping[str, Any], *, reunitarize: bool = False,
                 unitarity_tol: float = INGEST_UNITARITY_TOL) -> BoundaryCondition:
    """Build a boundary condition from ``{"preset", "params"}`` or
    ``{"matrix"}``; exactly one source must be given."""
    has_preset, has_matrix = "preset" in obj, "matrix" in obj
    if has_preset == has_matrix:
        raise ValueError("give exactly one of 'preset' or 'matrix'")
    if has_preset:
        return preset(obj["preset"], obj.get("params"))
    u = matrix_from_json(obj["matrix"])
    if reunitarize:
        u = unitarize(u)
    return BoundaryCondition(u, label="custom", unitarity_tol=unitarity_tol)

"""Scalar field between two one-dimensional periodic plates.

Unitary boundary conditions, the spectral function whose real zeros are the
transverse momenta, and the heat-kernel regularized vacuum energy.
"""
from .boundary import (PRESETS, BoundaryCondition, ClassKind, Classification, bc_from_json,
                       bc_to_json, cayley, classify, eigenphases, haar_sample,
                       inverse_cayley, preset)
from .energy import (EnergyParams, EnergyResult, energy_curve, finite_part, force, omega,
                     regularized_energy)
from .errors import *  # noqa: F401,F403
from .roots import Root, RootScanReport, ScanOptions, count_in_rect, multiplicity_at, scan_roots
from .spectral import (SpectralContext, closed_form, coeffs_interp, coeffs_printed, dh_dk,
                       h_direct, h_eps, minors, mode_vector)

__version__ = "0.1.0"

"""Closed magnetic geodesics on the unit sphere at large speed.

Perturbed great circles are corrected by a finite-dimensional reduction,
selected by critical points of a reduced energy on the sphere of centers,
and cross-checked by shooting for periodic orbits of the particle motion.
"""
from .errors import KMagneticError
from .field import FieldSpec, sphere_mean
from .functionals import (
    B_operator,
    J0,
    Jeps,
    area_functional,
    area_surface_oracle,
    area_unit_field,
    energy,
    kernel_basis,
    linearized_J0,
    solve_linearized,
)
from .loops import (
    FrameCoeffs,
    Loop,
    TangentLoopField,
    frame_compose,
    frame_decompose,
    geodesic_curvature,
    great_circle,
    is_embedded,
    latitude_circle,
    length_functional,
    phase_align_distance,
)
from .melnikov import (
    distinctness_check,
    find_stable_critical_points,
    melnikov_gradient,
    melnikov_value,
)
from .reduction import (
    ReductionOptions,
    ReductionState,
    critical_search,
    criticality_check,
    reduced_energy,
    solve_corrector,
)
from .shooting import PhasePoint, cross_validate, find_periodic, integrate

__version__ = "0.1.0"

"""Spatial donation game with Hawkes-process action timing."""

__version__ = "0.1.0"

from .lattice import Lattice
from .point_process import (
    CaseKind,
    KernelParams,
    StationarityError,
    branching_ratio,
    calibrate_rho,
    expected_intensity_single,
    gershgorin_bounds,
    intensity_at,
    kernel_eval,
    params_for_case,
)
from .sampler import EventTimeline, LatticeSampler, sample_lattice, sample_single

"""Numerical toolkit for observability of Schrödinger and Baouendi-Grushin heat semigroups."""

__version__ = "0.1.0"

from .potential import (Assumption, PotentialSpec, ScaledPotential, check_assumption,  # noqa: E402
                        make_power_potential, make_table_potential, scale)
from .spectral import (Grid, SpectralData, discretize, eigensolve, semigroup_apply,  # noqa: E402
                       spectral_project)
from .constants import (AssumptionParams, FreeConstants, bbl_lower_bound, build_report,  # noqa: E402
                        critical_power, exponent_table)
from .control_sets import indicator, make_distributed, make_equidistributed, thickness  # noqa: E402

__all__ = [
    "__version__",
    "Assumption",
    "PotentialSpec",
    "ScaledPotential",
    "check_assumption",
    "make_power_potential",
    "make_table_potential",
    "scale",
    "Grid",
    "SpectralData",
    "discretize",
    "eigensolve",
    "semigroup_apply",
    "spectral_project",
    "AssumptionParams",
    "FreeConstants",
    "bbl_lower_bound",
    "build_report",
    "critical_power",
    "exponent_table",
    "indicator",
    "make_distributed",
    "make_equidistributed",
    "thickness",
]

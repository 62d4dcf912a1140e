"""Numerical checks of basin-of-attraction topology against tubular neighbourhoods.

Submodules: :mod:`geometry` (charts, distances, collars), :mod:`systems`
(vector fields and catalog), :mod:`flow` (RK4 integration and checks),
:mod:`basin` (grid basins, stability estimates), :mod:`cubetopo` (cubical
Betti numbers), :mod:`scenario` and :mod:`cli` (pipelines and reports).
"""

from .basin import BasinGrid, GridSpec, Label, compute_basin
from .cubetopo import BettiProfile, betti, build_complex, compare_profiles
from .flow import IntegrationParams, integrate
from .systems import CATALOG, get_system

__all__ = [
    "BasinGrid", "BettiProfile", "CATALOG", "GridSpec", "IntegrationParams", "Label",
    "betti", "build_complex", "compare_profiles", "compute_basin", "get_system", "integrate",
]
__version__ = "0.1.0"

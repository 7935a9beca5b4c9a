"""Analysis of trajectories near robust heteroclinic networks in R^4.

Covers the Kirk-Silber, Delta-clique and tournament networks: transition
matrices, the piecewise-Mobius projected map, cycle stability and
bifurcations, and direct ODE checks of predicted itineraries.
"""

__version__ = "0.1.0"

from .network import NetworkKind, ParamError, ParamSet, load_params, validate_params
from .projmap import build_projected_map, fixed_points, iterate
from .stability import classify_all, detect_bifurcations, scan_plane
from .transition import basic_matrix, derived_scalars, full_matrix

__all__ = [
    "NetworkKind", "ParamError", "ParamSet", "load_params", "validate_params",
    "build_projected_map", "fixed_points", "iterate",
    "classify_all", "detect_bifurcations", "scan_plane",
    "basic_matrix", "derived_scalars", "full_matrix",
    "__version__",
]

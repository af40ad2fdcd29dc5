"""Iterative LMMSE detection for uplink MIMO-NOMA: achievable rates, rate
allocation, code design by EXIT analysis and coded link simulation."""
from importlib import metadata as _md

try:
    __version__ = _md.version("artifact")
except _md.PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .capacity import sum_capacity, in_region, maximal_extreme_point, project_to_dominant_face
from .rates import user_rate_closed_form, user_rate_numeric, user_rates
from .gamma_search import SearchConfig, find_gamma

__all__ = ["__version__", "sum_capacity", "in_region", "maximal_extreme_point", "project_to_dominant_face",
           "user_rate_closed_form", "user_rate_numeric", "user_rates", "SearchConfig", "find_gamma"]

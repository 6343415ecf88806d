"""Threshold calculus for the concatenated 7-qubit code, with and without locality constraints."""
from ._accel import BACKEND
from .analytic import gamma_crit, sparse_prob_lower_bound
from .catalog import DEFAULT_CATALOG, CircuitCatalog, RoutineCounts
from .errors import ConfigError, DomainError, NumericalError
from .flow import (FlowResult, Ray, bisect_threshold, find_fixed_point, iterate_flow,
                   optimize_local_tau, pseudothreshold)
from .local import GeometryParams, LocalRates, local_map
from .model import NonlocalRates, ProtocolParams, nonlocal_map

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CircuitCatalog", "ConfigError", "DEFAULT_CATALOG", "DomainError", "FlowResult",
    "GeometryParams", "LocalRates", "NonlocalRates", "NumericalError", "ProtocolParams", "Ray",
    "RoutineCounts", "bisect_threshold", "find_fixed_point", "gamma_crit", "iterate_flow",
    "local_map", "nonlocal_map", "optimize_local_tau", "pseudothreshold", "sparse_prob_lower_bound",
    "__version__",
]

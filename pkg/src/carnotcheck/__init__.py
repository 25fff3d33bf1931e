"""Exact and numerical checks for coercive inequalities on Carnot groups."""

from .diffop import DiffOp, commutator
from .group import CarnotGroup, make_group
from .poly import Poly, parse_expr, parse_poly
from .potentials import PotentialSpec, u_jet, u_jet_array
from .sampler import Estimate, GridIntegrator, GridSpec, MCIntegrator, SamplerConfig, run_chains

__version__ = "0.1.0"

__all__ = [
    "DiffOp", "commutator", "CarnotGroup", "make_group", "Poly", "parse_expr", "parse_poly",
    "PotentialSpec", "u_jet", "u_jet_array", "Estimate", "GridIntegrator", "GridSpec",
    "MCIntegrator", "SamplerConfig", "run_chains", "__version__",
]

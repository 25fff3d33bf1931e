"""Verification procedures and their report types."""

from .common import InvalidScenarioError, build_integrator, default_family, parse_family
from .examples import example_theorems
from .fitting import fit_constants
from .functionals import (eg3_star_bound, hardy_check, higher_poincare_check, inductive_bound_pipeline,
                          lsi_defect, lsi_fit, poincare_estimate, rockland_terms, statpoly_build,
                          step2_identity_check, ubound_defect)
from .identities import ad_check, biorthogonality_check, bracket_check, harmonic_check, identity_suite
from .reports import CheckReport, DefectReport, FitResult, ScanReport, jsonable
from .scans import (adams_dual_scan, adams_scan, eg2_adams_failure, hardy_weight_scan, jet_oracle)

__all__ = [
    "InvalidScenarioError", "build_integrator", "default_family", "parse_family", "example_theorems",
    "fit_constants", "eg3_star_bound", "hardy_check", "higher_poincare_check",
    "inductive_bound_pipeline", "lsi_defect", "lsi_fit", "poincare_estimate", "rockland_terms",
    "statpoly_build", "step2_identity_check", "ubound_defect", "ad_check", "biorthogonality_check",
    "bracket_check", "harmonic_check", "identity_suite", "CheckReport", "DefectReport", "FitResult",
    "ScanReport", "jsonable", "adams_dual_scan", "adams_scan", "eg2_adams_failure",
    "hardy_weight_scan", "jet_oracle",
]

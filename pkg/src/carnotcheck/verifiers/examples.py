"""Dispatcher for the worked example theorems."""

from __future__ import annotations

from typing import Sequence

from ..group import CarnotGroup
from ..poly import Poly
from ..potentials import PotentialSpec
from .common import InvalidScenarioError
from .functionals import eg3_star_bound, rockland_terms
from .scans import eg2_adams_failure

SCENARIOS = ("eg2_adams_failure", "eg3_star_bound", "rockland_terms")


def example_theorems(G: CarnotGroup, pot: PotentialSpec, scenario: str, *,
                     family: Sequence[Poly] = (), integrator=None, **params):
    """Run one example scenario; returns a ScanReport (eg2) or FitResult (eg3, rockland)."""
    if scenario == "eg2_adams_failure":
        if pot.family != "radial_cosine":
            raise InvalidScenarioError("eg2_adams_failure needs a radial_cosine interaction")
        return eg2_adams_failure(G, pot, **params)
    if integrator is None:
        raise InvalidScenarioError(f"{scenario} needs an integrator")
    if scenario == "eg3_star_bound":
        if pot.family != "quadric_power":
            raise InvalidScenarioError("eg3_star_bound needs a quadric_power interaction")
        return eg3_star_bound(G, pot, family, integrator, **params)
    if scenario == "rockland_terms":
        if pot.symbolic(G) is None:
            raise InvalidScenarioError("rockland_terms needs a polynomial interaction")
        return rockland_terms(G, pot, family, integrator=integrator, **params)
    raise InvalidScenarioError(f"unknown example scenario {scenario!r}; choose from {SCENARIOS}")

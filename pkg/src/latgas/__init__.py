"""Boundary-driven multi-velocity lattice gas laboratory.

A kinetic Monte Carlo simulator for an exclusion process with
momentum-conserving on-site collisions and particle reservoirs at the walls,
the finite-difference solver for its nonlinear parabolic scaling limit, and
brute-force oracles (generator matrices, canonical ensembles) that pin both
down at desk scale.
"""

from .velocities import (
    Velocity,
    VelocitySet,
    LocalState,
    CollisionQuadruple,
    default_velocity_set,
    load_velocity_set,
)
from .thermo import ThermoPoint, ChemicalPotential

__version__ = "0.1.0"

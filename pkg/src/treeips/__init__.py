"""Threshold-one contact and voter processes on homogeneous trees.

Ball truncations of T_d, Poisson event logs, forward and dual dynamics,
duality checks, the potential function for d = 2, survival estimators,
one-dimensional chain oracles and complete-convergence experiments.
"""
__version__ = "0.1.0"

from .tree import TreeIndex, build_ball, canonical_address  # noqa: E402,F401
from .events import EventLog, sample_contact_log, sample_voter_log  # noqa: E402,F401
from .dynamics import ModelSpec, Trajectory, evolve, gillespie_evolve, census  # noqa: E402,F401

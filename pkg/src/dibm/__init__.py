"""Budyko energy balance model with a dynamic iceline.

The temperature profile T(y) relaxes quickly toward a local equilibrium
while the iceline η drifts slowly according to the temperature at the ice
edge. The package computes the equilibria, the attracting one-dimensional
manifold of profiles indexed by η (via the graph transform), trajectories,
and bifurcations in the solar constant.
"""

from .grid import GridSpec, Profile
from .physics import Params, State, fast_field, slow_field, step
from .equilibria import (absorbed_integral, boundary_equilibria, equilibrium_profile,
                         find_interior_roots, iceline_excess)
from .manifold import certificate, fixed_point, graph_transform, preimage
from .dynamics import classify_basins, fixed_iceline_simulate, simulate
from .bifurcation import fold_locate, sweep

__version__ = "0.1.0"

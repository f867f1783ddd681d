"""Trajectory optimization for a surface vehicle escorting underwater vehicles.

The package plans energy-aware, terrain-safe, acoustically connected paths
for one surface vehicle and a pack of underwater vehicles over a known
seafloor map, using a receding-horizon scheme solved by a three-step
sequence of convex programs with consensus-graph selection in between.
"""

__version__ = "0.1.0"

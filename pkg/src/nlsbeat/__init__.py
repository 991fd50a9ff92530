"""Beating quasi-periodic solutions of the quintic NLS on the circle.

Resonance combinatorics, one Birkhoff normal form step, the reduced
pendulum on the tangential modes, Floquet reduction of the ±3/±4 blocks,
Melnikov checks, a truncated KAM iteration and a Galerkin integrator.
"""

__version__ = "0.1.0"

TANGENTIAL = (-2, -1, 1, 2)
K_STAR = (4.0, 0.0, 2.0)
XI_STAR = (0.0, 4.0, 0.0, 2.0)

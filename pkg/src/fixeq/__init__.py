"""Fixed-point and equilibrium computation toolkit.

Convex bodies behind separation oracles, a central-cut ellipsoid engine,
Sperner search on the Kuhn triangulation, and solvers for approximate
Kakutani fixed points, concave-game equilibria and Walrasian market
equilibria, plus the hardness-direction instance constructors.
"""

__version__ = "0.1.0"

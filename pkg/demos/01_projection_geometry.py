# The state space is the cone of non-decreasing step functions on a
# uniform grid of n cells, each carrying mass 1/n.  A "particle" is a
# maximal run of cells sharing exactly the same value.  This script walks
# through the cluster decomposition and the level-set projection, the two
# geometric primitives everything else is built on.

import numpy as np

from cfwd import (
    GridFunction,
    cluster_decompose,
    distinct_count,
    hs_norm_sq,
    inner_product,
    project,
)

x = GridFunction(np.array([-1.0, -1.0, 0.25, 0.25, 0.25, 2.0, 3.0, 3.0]))
part = cluster_decompose(x)

print("state          ", x.values)
print("cluster bounds ", part.bounds)      # block k occupies [bounds[k], bounds[k+1])
print("cluster masses ", part.masses)      # lengths / n
print("particle count ", distinct_count(x))
print()

# The projection associated with x averages any grid function over the
# clusters of x.  It is the discrete analogue of conditioning on the
# sigma-algebra generated by the level sets.
h = np.arange(8, dtype=float)
ph = project(x, h)
print("h              ", h)
print("projected h    ", ph)
print()

# Three laws that the simulator leans on:
#   idempotence        pr(pr h) == pr h       (exactly, same block means)
#   self-adjointness   (pr g, h) == (g, pr h)
#   trace identity     ||pr||_HS^2 == particle count
g = np.sin(h)
print("idempotence gap   ", np.max(np.abs(project(x, ph) - ph)))
print("self-adjoint gap  ", abs(inner_product(project(x, g), h) - inner_product(g, ph)))
print("HS norm squared   ", hs_norm_sq(x), " == count ", distinct_count(x))

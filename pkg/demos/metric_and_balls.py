"""
Heisenberg distance, dilations, and how lattice balls grow
==========================================================

A walk through the metric layer: check the invariances numerically,
then watch the exact ball counts climb like k^4 and the shifted-ball
overlap ratio fall off, which is the amenability story in numbers.
"""

import numpy as np

from heisgeo import dilate, generator, metric_d, multiply
from heisgeo.core import ContinuousPoint
from heisgeo.balls import ball_cardinality, doubling_table, folner_ratio

rng = np.random.default_rng(0)


def sample_point():
    z = complex(*(4.0 * rng.standard_normal(2)))
    return ContinuousPoint((z,), float(10.0 * rng.standard_normal()))


# the distance is invariant under right translation and scales linearly
# under dilation; neither survives if you get the group law backwards
p, q, g = sample_point(), sample_point(), sample_point()
d = metric_d(p, q)
print(f"d(p, q)                      = {d:.12f}")
print(f"d(pg, qg)  (right translate) = {metric_d(multiply(p, g), multiply(q, g)):.12f}")
print(f"d(gp, gq)  (left translate)  = {metric_d(multiply(g, p), multiply(g, q)):.12f}")
print(f"d(delta_3 p, delta_3 q) / 3  = {metric_d(dilate(3.0, p), dilate(3.0, q)) / 3.0:.12f}")

# exact lattice ball sizes: the homogeneous dimension is 4, so the
# counts grow like k^4 and the ratio |B_2k| / |B_k| approaches 2^4
print("\n   k     |B_k|     |B_2k|/|B_k|")
for k in (1, 2, 4, 8, 16, 32):
    card = ball_cardinality(1, k)
    print(f"  {k:2d} {card:9d}     {ball_cardinality(1, 2 * k) / card:8.3f}")

# the product set B_k * B_k is larger than B_k by a bounded factor
rows = doubling_table(1, 12)
print("\nproduct-set ratio |B_k B_k| / |B_k|:",
      ", ".join(f"{float(r.ratio):.2f}" for r in rows[-4:]), "(k = 9..12)")

# shifting by one generator moves a vanishing fraction of the ball
sigma = generator(1, 0)
print("\nshifted-overlap decay for sigma = e1:")
for k in (5, 10, 20, 40):
    print(f"  k = {k:2d}:  |B_k ^ sigma B_k| / |B_k| = {float(folner_ratio(1, k, sigma)):.4f}")

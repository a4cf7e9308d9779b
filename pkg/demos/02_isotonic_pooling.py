# After each noise + drift proposal the state can leave the monotone
# cone; the pool-adjacent-violators sweep puts it back by replacing each
# violating run with its weighted mean.  Pooling is what makes particles
# coalesce: every merge fuses two clusters into one that afterwards moves
# as a single unit.  This script shows the mechanics on small vectors.

import numpy as np

from cfwd import pava, pava_blocks

y = np.array([3.0, 1.0, 2.0])
w = np.ones(3)
out, merges = pava(y, w)
print("proposal ", y)
print("pooled   ", out, "  merges:", merges)
print()

# Weights matter: a heavy left block drags the pooled value toward it.
y = np.array([2.0, 0.0])
w = np.array([3.0, 1.0])
out, merges = pava(y, w)
print("proposal ", y, " weights ", w)
print("pooled   ", out, "  merges:", merges)
print()

# Block view: values and lengths, one entry per pooled block.  Already
# monotone inputs pass through bitwise untouched with zero merges.
y = np.array([0.0, 0.5, 0.5, 2.0, 1.0, 1.0, 1.0, 0.75])
values, lengths, merges = pava_blocks(y, np.ones_like(y))
print("proposal      ", y)
print("block values  ", values)
print("block lengths ", lengths, "  merges:", merges)
print()

# Two invariants, checked here by brute force on random inputs:
# pooling conserves the total mass and is idempotent.
rng = np.random.default_rng(0)
worst_mass, worst_fix = 0.0, 0.0
for _ in range(1000):
    y = rng.standard_normal(rng.integers(1, 50))
    out, _ = pava(y, np.ones_like(y))
    again, again_merges = pava(out, np.ones_like(out))
    worst_mass = max(worst_mass, abs(out.sum() - y.sum()))
    worst_fix = max(worst_fix, np.max(np.abs(again - out)), float(again_merges))
print("max |sum drift| over 1000 random pools:", worst_mass)
print("max re-pooling change (values + merges):", worst_fix)

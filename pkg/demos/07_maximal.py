"""Local maximal function on the disk and the mean split of Whitney cubes."""

import math

import numpy as np

from frachardy import EnergyParams, build_domain, whitney_decompose
from frachardy.analysis import (cube_means, local_maximal, maximal_boundedness_probe, mean_split,
                                random_cell_probes, smooth_probes)

params = EnergyParams(0.75, 2.0)
for h in ("1/16", "1/32", "1/64"):
    d = build_domain("disk", h)
    rep = maximal_boundedness_probe(d, params, smooth_probes(d, 20, seed=0))
    print(f"disk h={h}: max |M u|^p / |u|^p over 20 probes = {rep.max_ratio:.4f}")

d = build_domain("square", "1/32")
W = whitney_decompose(d)
u = random_cell_probes(d, 1, seed=3)[0]
low, high = mean_split(u, W)
M = local_maximal(u).values
means = cube_means(u, W)
worst = min(M[W.members[q]].min() / means[q] for q in high)
print(f"{len(low)} cubes with mean < 1/2, {len(high)} with mean >= 1/2")
print(f"smallest M u / <u>_Q over the upper cubes: {worst:.3f} (bound 1/(2 pi) = {1 / (2 * math.pi):.3f})")
print("M u >= |u| everywhere:", bool(np.all(M >= np.abs(u.values))))

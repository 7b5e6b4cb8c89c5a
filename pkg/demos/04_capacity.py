"""Capacities of interior compact sets, for p = 2 and for p != 2."""

import numpy as np

from frachardy import CompactCellSet, EnergyForm, EnergyParams, build_domain, solve_capacity
from frachardy.capacity import boundary_ramp_family, capacity_upper_bound

d = build_domain("square", "1/32")
for p in (2.0, 1.5, 3.0):
    form = EnergyForm(EnergyParams(0.5, p), d)
    for depth in (0.125, 0.25, 0.375):
        K = CompactCellSet(d, np.flatnonzero((d.dist >= depth) & d.interior), f"dist>={depth}")
        res = solve_capacity(K, form)
        print(f"p={p}  {K.label:12s} cells {len(K):4d}  cap {res.value:10.5f}  "
              f"gap {res.gap:.1e}  {res.status} via {res.meta['method']}")

# For sp < 1 explicit functions show the capacity of a fixed set creeping toward zero.
fine = build_domain("interval", "1/1024")
form = EnergyForm(EnergyParams(0.45, 2.0, n=1), fine)
K = CompactCellSet(fine, np.flatnonzero(fine.dist >= 0.25))
print("cap on (0,1), s=0.45:", solve_capacity(K, form).value)
for u in boundary_ramp_family(fine, [1 / 8, 1 / 32, 1 / 128]):
    print(f"   upper bound from ramp eps={u.meta['eps']:.5f}: {capacity_upper_bound(K, [u], form):.4f}")

"""Slit snowflake at sp = 1: quasiadditivity fails while zero extension holds.

Takes about a minute and a half on one core.
"""

import numpy as np

from frachardy import EnergyForm, EnergyParams, build_domain, whitney_decompose
from frachardy.analysis import quasiadditivity, slit_whitney_compact, zero_extension_report
from frachardy.capacity import slit_test_family
from frachardy.geometry import SlitSnowflakeSpec

spec = SlitSnowflakeSpec(level=4)
d = build_domain(spec, "1/32")
params = EnergyParams(0.5, 2.0)
form = EnergyForm(params, d)
W = whitney_decompose(d)
print(f"grid {d.mask.shape}, {d.size} cells, {len(W)} Whitney cubes")

rep = quasiadditivity([slit_whitney_compact(W, spec, m) for m in (2, 4, 8)], W, form, mode="weak")
for m, it in zip((2, 4, 8), rep.items):
    print(f"m={m}: sum over cubes {it.total:9.3f}  cap(K_m) {it.cap:8.3f}  N={it.ratio:.3f}")

family = [slit_test_family(spec, m, d) for m in (2, 4, 8, 16)]
energies = np.array([form.energy(u.values) for u in family])
zext = zero_extension_report(d, params, family)
print("energies of u_m:", energies.round(2).tolist())
print("zero-extension ratios:", np.round(zext.ratios, 3).tolist())

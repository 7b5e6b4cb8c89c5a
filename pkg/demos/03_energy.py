"""Discrete Gagliardo energy, its exact scaling, and the energy of the zero extension."""

from fractions import Fraction

import numpy as np

from frachardy import EnergyForm, EnergyParams, GridFunction, build_domain
from frachardy.energy import EXTERIOR, seminorm_zero_extended_p, weight_field

d = build_domain("square", "1/32")
params = EnergyParams(s=0.4, p=2.0)
form = EnergyForm(params, d)
x = d.centers
u = GridFunction(d, np.exp(-30 * np.sum((x - 0.5) ** 2, axis=1)))

e = form.energy(u.values)
print(f"|u|^p on the square: {e:.6f}")

# Doubling every length multiplies the energy by exactly 2^(n - sp).
e2 = form.scaled(Fraction(2)).energy(u.values)
print(f"scaled by 2: ratio {e2 / e:.15f}, expected {2 ** (2 - params.sp):.15f}")

# Zero extension adds 2 sum |u|^p omega h^n, with omega integrated in closed form.
lo, hi = seminorm_zero_extended_p(u, form, weight_field(d, params, EXTERIOR))
print(f"zero extension to the plane: [{lo:.10f}, {hi:.10f}], ratio {lo / e:.4f}")

# Energies of a function concentrated near the boundary blow up relative to the interior part.
for eps in (1 / 4, 1 / 8, 1 / 16):
    ramp = GridFunction(d, np.clip(d.dist / eps, 0, 1) * d.interior)
    lo, _ = seminorm_zero_extended_p(ramp, form)
    print(f"ramp width {eps:<7}: interior {form.energy(ramp.values):8.4f}  whole plane {lo:9.4f}")

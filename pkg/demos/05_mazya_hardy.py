"""Capacitary testing ratios, the Hardy bracket, and the level-set replay."""

from frachardy import EnergyForm, EnergyParams, build_domain, whitney_decompose
from frachardy.analysis import (concentric_family, hardy_report, mazya_replay, mazya_test,
                                random_cell_probes, smooth_probes, whitney_union_family)
from frachardy.energy import HARDY, weight_field

# Ratios over unions of Whitney cubes up to generation 3..6.  For sp < 1 on the
# square the supremum is infinite in the limit; for sp > 1 on the disk it is
# finite.  At this resolution both still grow, so read the growth factors.
for spec, s in [("square", 0.4), ("disk", 0.75)]:
    d = build_domain(spec, "1/64")
    params = EnergyParams(s, 2.0)
    W = whitney_decompose(d)
    rep = mazya_test(whitney_union_family(W, [3, 4, 5, 6]), weight_field(d, params, HARDY),
                     EnergyForm(params, d))
    growth = rep.ratios[1:] / rep.ratios[:-1]
    print(f"{spec} sp={params.sp}: ratios {rep.ratios.round(4).tolist()}  "
          f"growth {growth.round(2).tolist()}  implied C={rep.implied_constant:.1f}")

# Bracket for the Hardy constant: best probe quotient below, testing constant above.
d = build_domain("disk", "1/32")
params = EnergyParams(0.75, 2.0)
rep = hardy_report(d, params, smooth_probes(d, 6, seed=1), concentric_family(d, [0.1, 0.2, 0.3]))
print("Hardy bracket on the disk:", [round(v, 4) for v in rep.bracket()])

# Replaying the sufficiency argument on one function: its own level sets give the constant.
d = build_domain({"kind": "punctured_square"}, "1/16")
params = EnergyParams(0.5, 3.0)
u = random_cell_probes(d, 1, seed=2)[0]
res = mazya_replay(u, weight_field(d, params, HARDY), EnergyForm(params, d))
print(f"replay: weighted mass {res.lhs:.4f} <= {res.constant:.1f} x |u|^p = {res.rhs:.4f}: {res.ok}")

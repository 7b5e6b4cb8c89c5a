"""Whitney decomposition: dyadic cubes whose size matches their distance to the boundary."""

import numpy as np

from frachardy import build_domain, whitney_decompose

for spec, h in [("square", "1/128"), ("disk", "1/64"), ({"kind": "koch_minus_slit"}, "1/32")]:
    W = whitney_decompose(build_domain(spec, h))
    gens, counts = np.unique(W.generations()[W.valid], return_counts=True)
    check = W.check()
    print(f"{W.domain.kind}: {len(W)} cubes, {int((~W.valid).sum())} boundary-truncated, "
          f"overlap of 9/8-dilates {W.overlap}, validator ok={check['ok']}")
    print("   cubes per generation:", dict(zip(gens.tolist(), counts.tolist())))

# The overlap constant does not depend on resolution for the square.
print("square overlap at h=1/64 and 1/256:",
      whitney_decompose(build_domain("square", "1/64")).overlap,
      whitney_decompose(build_domain("square", "1/256")).overlap)

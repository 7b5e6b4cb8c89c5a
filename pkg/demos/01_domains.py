"""Build the four model domains and look at what the rasterizer produced.

Every domain is a set of occupied grid cells plus the exact boundary as line
segments; distances are measured to the segments, not to the pixels.
"""

from frachardy import build_domain
from frachardy.geometry import DomainError, SlitSnowflakeSpec, koch_vertices

for spec, h in [("square", "1/64"), ("disk", "1/64"),
                ({"kind": "koch", "level": 4, "side": 3.44}, "1/32"),
                ({"kind": "koch_minus_slit"}, "1/32")]:
    d = build_domain(spec, h)
    print(f"{d.kind:16s} h={d.h}  grid {d.mask.shape}  cells {d.size:6d}  "
          f"collar {int(d.collar.sum()):5d}  area {d.area:.4f}  max dist {d.dist.max():.4f}")

# The polygonal snowflake has a closed-form area to compare with.
x, y = koch_vertices(4, 3.44).T
print("level-4 snowflake polygon area", 0.5 * abs(x @ y[[*range(1, len(y)), 0]]
                                                   - y @ x[[*range(1, len(x)), 0]]))

# The slit is a cut: cells next to it stay occupied but see it in their distance.
spec = SlitSnowflakeSpec()
d = build_domain(spec, "1/32")
a, b = spec.slit
print("slit from", a, "to", b, "; nearest cell distance", spec.slit_distance(d.centers).min())

# A cell size that cannot resolve the geometry is refused with the coarsest usable h.
try:
    build_domain("square_minus_slit", "1/2")
except DomainError as exc:
    print("rejected:", exc, "| coarsest admissible h =", exc.min_h)

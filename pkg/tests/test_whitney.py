import numpy as np
import pytest

from frachardy.geometry import SlitSnowflakeSpec, build_domain
from frachardy.whitney import DOUBLE_STAR, STAR, TRUNCATED, dilate, whitney_decompose
from oracles import whitney_interval_counts


@pytest.fixture(scope="module")
def square_w():
    return whitney_decompose(build_domain("square", "1/64"))


def test_square_validator_and_partition(square_w):
    check = square_w.check()
    assert check["ok"]
    counts = np.bincount(square_w.cell_cube, minlength=len(square_w))
    assert counts.sum() == square_w.domain.size
    for q, cube in enumerate(square_w.cubes):
        assert counts[q] == cube.width ** 2


def test_cubes_are_disjoint_half_open(square_w):
    seen = set()
    for cube in square_w.cubes:
        cells = {tuple(c) for c in cube.cell_indices()}
        assert not cells & seen
        seen |= cells
    assert len(seen) == square_w.domain.size


def test_flagged_cubes_are_finest_cells(square_w):
    for cube, flag in zip(square_w.cubes, square_w.flags):
        if flag == TRUNCATED:
            assert cube.width == 1


def test_interval_counts_match_exhaustive_selection():
    W = whitney_decompose(build_domain("interval", "1/128"))
    gens = W.generations()[W.valid]
    got = {int(k): int(c) for k, c in zip(*np.unique(gens, return_counts=True))}
    assert got == whitney_interval_counts(7)


def test_no_emitted_cube_has_an_admissible_ancestor(square_w):
    d = square_w.domain
    for cube, dist in zip(square_w.cubes, square_w.dist):
        if cube.k == 0:
            continue
        parent_corner = (np.asarray(cube.corner) // (2 * cube.width)) * (2 * cube.width)
        lo = parent_corner * d.hf
        side = 2 * cube.side
        pd = min(lo.min(), (1 - lo - side).min())
        diam = np.sqrt(2) * side
        assert not (diam <= pd <= 4 * diam)


def test_dilates_nest_and_add_one_ring():
    d = build_domain("square", "1/128")
    W = whitney_decompose(d)
    big = [q for q, c in enumerate(W.cubes) if c.width == 16]
    assert big
    for q in big:
        base = set(W.members[q].tolist())
        star = set(dilate(W.cubes[q], STAR, d).tolist())
        double = set(dilate(W.cubes[q], DOUBLE_STAR, d).tolist())
        assert base <= star <= double
        # closed 17/16-dilate of a 16-cell cube reaches the next cell centers on each side
        assert len(star) == 18 * 18
    for q in range(len(W)):
        assert set(W.members[q].tolist()) <= set(dilate(W.cubes[q], STAR, d).tolist())


def test_overlap_bounds_pointwise_count(square_w):
    d = square_w.domain
    count = np.zeros(d.size, dtype=int)
    for cube in square_w.cubes:
        count[dilate(cube, DOUBLE_STAR, d)] += 1
    assert count.max() == square_w.overlap
    assert count.min() >= 1


def test_overlap_stable_under_refinement(square_w):
    finer = whitney_decompose(build_domain("square", "1/128"))
    assert finer.overlap == square_w.overlap


@pytest.mark.parametrize("spec", ["disk", {"kind": "koch", "level": 4, "side": 3.44},
                                  {"kind": "koch_minus_slit"}])
def test_validator_on_curved_and_fractal_domains(spec):
    W = whitney_decompose(build_domain(spec, "1/32"))
    assert W.check()["ok"]


def test_cubes_shrink_toward_the_slit():
    spec = SlitSnowflakeSpec()
    d = build_domain(spec, "1/32")
    W = whitney_decompose(d)
    for m in (2, 4):
        r = spec.collar_radius(m)
        touching = [q for q in W.valid_indices
                    if np.min(spec.slit_distance(d.centers[W.members[q]])) <= r]
        assert touching
        # diam(Q) <= dist(Q, boundary) <= dist(Q, L) <= r, so side <= r / sqrt 2
        biggest = max(W.cubes[q].side for q in touching)
        assert biggest <= 4 * r / np.sqrt(2)


def test_whitney_json_fields(square_w):
    doc = square_w.to_json()
    assert set(doc[0]) == {"k", "corner", "dist", "flag"}
    assert len(doc) == len(square_w)

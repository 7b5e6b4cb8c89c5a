import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frachardy.analysis import (ball_ratio, concentric_family, cube_means, cutoff_probes,
                                discrete_hardy_constant, dyadic_level, hardy_report,
                                implied_hardy_constant, level_set_compacta, level_truncation,
                                local_maximal, maximal_boundedness_probe, mazya_replay, mazya_test,
                                mean_split, nearest_cubes, pair_inequality_violations,
                                quasiadditivity, random_cell_probes, rayleigh_span, smooth_probes,
                                whitney_cap_lower_check, whitney_union, whitney_union_family,
                                zero_extension_report)
from frachardy.analysis.levels import ZERO_LEVEL
from frachardy.capacity import CompactCellSet, solve_capacity
from frachardy.energy import EXTERIOR, HARDY, EnergyForm, GridFunction, weight_field, weighted_mass
from frachardy.geometry import build_domain
from frachardy.params import EnergyParams
from frachardy.whitney import whitney_decompose
from oracles import brute_maximal


@pytest.fixture(scope="module")
def sq16():
    return build_domain("square", "1/16")


# -- levels -----------------------------------------------------------------


def test_level_examples(sq16):
    vals = np.zeros(sq16.size)
    vals[:4] = [0.0, 0.75, 1.5, 3.0]
    dec = level_truncation(GridFunction(sq16, vals))
    assert dec.level[0] == ZERO_LEVEL
    assert list(dec.level[1:4]) == [-1, 0, 1]
    assert np.flatnonzero(dec.A(-1)).tolist() == [1]
    assert np.flatnonzero(dec.A(0)).tolist() == [2]
    assert np.flatnonzero(dec.A(1)).tolist() == [3]
    assert dec.truncation(0).values[2] == 0.5
    assert dec.is_partition()


def test_exact_powers_of_two_sit_in_the_lower_annulus():
    assert dyadic_level([1.0, 2.0, 0.5, 4.0]).tolist() == [-1, 0, -2, 1]
    assert dyadic_level([np.nextafter(1.0, 2.0)]).tolist() == [0]


@settings(max_examples=40)
@given(st.integers(0, 2**31), st.floats(0.1, 50))
def test_truncation_range_and_plateaus(seed, scale):
    d = build_domain("square", "1/8")
    u = GridFunction(d, np.random.default_rng(seed).normal(scale=scale, size=d.size))
    dec = level_truncation(u)
    assert dec.is_partition()
    for k in dec.levels:
        uk = dec.truncation(k).values
        assert uk.min() >= 0.0 and uk.max() <= 1.0
        assert np.all(uk[dec.E(k + 1)] == 1.0)
        assert np.all(uk[~dec.E(k)] == 0.0)


@settings(max_examples=20)
@given(st.integers(0, 2**31))
def test_pair_inequality_exhaustive(seed):
    d = build_domain("square", "1/16")
    rng = np.random.default_rng(seed)
    u = rng.lognormal(sigma=2.0, size=d.size) * (rng.random(d.size) > 0.2)
    dec = level_truncation(GridFunction(d, u))
    for k in dec.levels:
        assert pair_inequality_violations(dec, int(k)) == 0


# -- Maz'ya testing ----------------------------------------------------------------


def test_implied_constant_arithmetic():
    assert implied_hardy_constant(1.0, 2.0) == pytest.approx(1024 / 3, rel=1e-15)


def test_mazya_ratio_bounded_by_witness_energy(sq16):
    params = EnergyParams(0.5, 2.0)
    form = EnergyForm(params, sq16)
    w = weight_field(sq16, params, HARDY)
    K = concentric_family(sq16, [0.25])[0]
    rep = mazya_test([K], w, form)
    res = solve_capacity(K, form)
    mass = weighted_mass(K.indicator(), w, 1.0)
    assert rep.c <= mass / ((1 - 1e-9) * res.value)
    assert rep.to_json()["C"] == pytest.approx(implied_hardy_constant(rep.c, 2.0))


def test_mazya_ratio_infinite_when_capacity_below_gap(sq16):
    from frachardy.analysis.mazya import MazyaItem
    item = MazyaItem("K", 1, 1.0, (1.0, 1.0), cap=1e-12, gap=1e-11, status="converged")
    assert item.ratio == math.inf


def test_square_whitney_unions_grow():
    d = build_domain("square", "1/32")
    params = EnergyParams(0.4, 2.0)
    form = EnergyForm(params, d)
    W = whitney_decompose(d)
    fam = whitney_union_family(W, [3, 4, 5])
    r = mazya_test(fam, weight_field(d, params, HARDY), form).ratios
    assert np.all(np.diff(r) > 0)


def test_disk_whitney_unions_stay_bounded():
    d = build_domain("disk", "1/64")
    params = EnergyParams(0.75, 2.0)
    W = whitney_decompose(d)
    r = mazya_test(whitney_union_family(W, [4, 5, 6]), weight_field(d, params, HARDY),
                   EnergyForm(params, d)).ratios
    assert r.max() / r.min() < 4


@pytest.mark.parametrize("p", [2.0, 1.5])
def test_replay_on_random_functions(p):
    d = build_domain({"kind": "punctured_square"}, "1/8")
    params = EnergyParams(0.5, p)
    form = EnergyForm(params, d)
    w = weight_field(d, params, HARDY)
    for u in random_cell_probes(d, 4, seed=3):
        res = mazya_replay(u, w, form)
        assert res.ok
        for row in res.levels:
            assert row["cap"] <= row["truncation_energy"]


def test_level_set_compacta_are_annuli(sq16):
    u = smooth_probes(sq16, 1, seed=1)[0]
    dec, pairs = level_set_compacta(u)
    for k, K in pairs:
        assert np.array_equal(K.cells, np.flatnonzero(dec.A(k + 1)))


# -- Hardy bracket ------------------------------------------------------------------


def test_hardy_bracket_contains_every_probe(sq16):
    params = EnergyParams(0.75, 2.0)
    probes = smooth_probes(sq16, 4, seed=0)
    rep = hardy_report(sq16, params, probes, concentric_family(sq16, [0.125, 0.25]))
    lo, hi = rep.bracket()
    assert all(q <= hi for q in rep.quotients)
    assert max(rep.quotients) <= lo <= hi
    assert rep.meta["span_quotient"] >= max(rep.quotients) * (1 - 1e-9)


def test_span_quotient_below_dense_eigenvalue(sq16):
    params = EnergyParams(0.75, 2.0)
    form = EnergyForm(params, sq16)
    w = weight_field(sq16, params, HARDY)
    span, best = rayleigh_span(smooth_probes(sq16, 5, seed=4), form, w)
    top, vec = discrete_hardy_constant(form, w)
    assert span <= top * (1 + 1e-9)
    assert weighted_mass(vec, w, 2.0) / form.energy(vec.values) == pytest.approx(top, rel=1e-8)


def test_interval_hardy_constant_grows_at_sp_one():
    params = EnergyParams(0.5, 2.0, n=1)
    vals = [discrete_hardy_constant(EnergyForm(params, build_domain("interval", h)))[0]
            for h in ("1/64", "1/128", "1/256", "1/512")]
    steps = np.array(vals[1:]) / np.array(vals[:-1])
    assert np.all(steps >= 1.1)


# -- quasiadditivity and zero extension ----------------------------------------------------


@pytest.fixture(scope="module")
def sq32():
    d = build_domain("square", "1/32")
    return d, whitney_decompose(d), EnergyForm(EnergyParams(0.4, 2.0), d)


def test_single_cube_has_unit_ratio(sq32):
    d, W, form = sq32
    q = W.valid_indices[0]
    rep = quasiadditivity(whitney_union(W, [q]), W, form, mode="weak")
    it = rep.items[0]
    assert abs(it.ratio - 1.0) <= 2 * it.gap / it.cap + 1e-12


def test_quasi_ratio_above_subadditivity_floor(sq32):
    d, W, form = sq32
    rng = np.random.default_rng(0)
    ids = W.valid_indices
    fam = [whitney_union(W, rng.choice(ids, size=4, replace=False)) for _ in range(4)]
    fam.append(CompactCellSet(d, np.flatnonzero((d.dist > 0.2) & (d.centers[:, 0] < 0.45))))
    rep = quasiadditivity(fam, W, form)
    for it in rep.items:
        assert it.ratio >= it.lower_limit


def test_weak_mode_requires_whole_cubes(sq32):
    d, W, form = sq32
    q = [i for i in W.valid_indices if W.cubes[i].width >= 2][0]
    part = CompactCellSet(d, W.members[q][:1])
    with pytest.raises(ValueError, match="whole"):
        quasiadditivity(part, W, form, mode="weak")


def test_zero_extension_ratio_at_least_one(sq16):
    params = EnergyParams(0.5, 2.0)
    rep = zero_extension_report(sq16, params, smooth_probes(sq16, 5, seed=2))
    assert all(r >= 1.0 for r in rep.ratios)
    assert all(lo <= hi for lo, hi in rep.brackets)


def test_zero_extension_cutoffs_grow_on_the_square():
    d = build_domain("square", "1/64")
    W = whitney_decompose(d)
    ids = nearest_cubes(W, [2, 3, 4])
    rep = zero_extension_report(d, EnergyParams(0.4, 2.0), cutoff_probes(W, ids))
    assert np.all(np.diff(rep.ratios) > 0)


def test_zero_extension_runs_exterior_mazya(sq16):
    params = EnergyParams(0.5, 2.0)
    rep = zero_extension_report(sq16, params, smooth_probes(sq16, 1), concentric_family(sq16, [0.25]))
    assert rep.mazya.weight_kind == EXTERIOR
    assert rep.to_json()["mazya"]["c"] > 0


# -- maximal operator and mean split ----------------------------------------------------


@pytest.mark.parametrize("spec,h", [("square", "1/16"), ("disk", "1/16")])
def test_local_maximal_matches_exhaustive_radii(spec, h):
    d = build_domain(spec, h)
    u = GridFunction(d, np.random.default_rng(8).normal(size=d.size))
    got = local_maximal(u).values
    ref = brute_maximal(u.values, d.centers, d.dist, d.hf)
    assert np.allclose(got, ref, rtol=1e-12, atol=0)
    assert np.all(got >= np.abs(u.values))


@settings(max_examples=25)
@given(st.integers(0, 2**31), st.floats(-5, 5))
def test_maximal_sublinear_and_homogeneous(seed, c):
    d = build_domain("disk", "1/16")
    rng = np.random.default_rng(seed)
    u = GridFunction(d, rng.normal(size=d.size))
    v = GridFunction(d, rng.normal(size=d.size))
    Mu, Mv = local_maximal(u).values, local_maximal(v).values
    assert np.all(local_maximal(u + v).values <= (Mu + Mv) * (1 + 1e-12))
    assert np.allclose(local_maximal(c * u).values, abs(c) * Mu, rtol=1e-12, atol=1e-300)


def test_maximal_of_constant(sq16):
    M = local_maximal(GridFunction(sq16, np.full(sq16.size, 0.3))).values
    assert np.allclose(M, 0.3, rtol=1e-15)


def test_mean_split_trivial_cases(sq32):
    d, W, _ = sq32
    w1, w2 = mean_split(GridFunction(d, np.ones(d.size)), W)
    assert len(w1) == 0 and len(w2) == len(W.valid_indices)
    w1, w2 = mean_split(GridFunction.zeros(d), W)
    assert len(w2) == 0 and len(w1) == len(W.valid_indices)
    with pytest.raises(ValueError):
        mean_split(GridFunction(d, -np.ones(d.size)), W)


def test_mean_split_tie_goes_to_upper_half(sq32):
    d, W, _ = sq32
    w1, w2 = mean_split(GridFunction(d, np.full(d.size, 0.5)), W)
    assert len(w1) == 0


@settings(max_examples=10)
@given(st.integers(0, 2**31))
def test_upper_half_cubes_see_large_maximal_function(seed):
    d = build_domain("square", "1/32")
    W = whitney_decompose(d)
    u = random_cell_probes(d, 1, seed=seed)[0]
    w1, w2 = mean_split(u, W)
    assert sorted(np.concatenate([w1, w2]).tolist()) == W.valid_indices.tolist()
    M = local_maximal(u).values
    means = cube_means(u, W)
    for q in w2:
        cells = W.members[q]
        eligible = cells[d.dist[cells] > W.cubes[q].diam]
        assert np.all(M[eligible] >= means[q] * ball_ratio(2) * (1 - 1e-12))
        assert np.all(M[eligible] >= 1 / (4 * math.pi))


def test_ball_ratios():
    assert ball_ratio(2) == pytest.approx(1 / (2 * math.pi))
    assert ball_ratio(1) == 0.5


def test_maximal_probe_skips_constants(sq16):
    params = EnergyParams(0.5, 2.0)
    rep = maximal_boundedness_probe(sq16, params, [GridFunction(sq16, np.ones(sq16.size)),
                                                   *smooth_probes(sq16, 2)])
    assert rep.skipped == 1 and len(rep.ratios) == 2


# -- Whitney lower bound -------------------------------------------------------------


def test_caplower_is_scale_invariant():
    params = EnergyParams(0.75, 2.0)
    d = build_domain("square", "1/32")
    W = whitney_decompose(d)
    base = whitney_cap_lower_check(W, EnergyForm(params, d), generations=[3], per_generation=1)
    form = EnergyForm(params, d).scaled(2)
    Ws = whitney_decompose(form.domain)
    big = whitney_cap_lower_check(Ws, form, generations=[2], per_generation=1)
    assert big.items[0]["ratio"] == pytest.approx(base.items[0]["ratio"], rel=1e-8)


def test_caplower_on_disk_is_positive_and_stable():
    d = build_domain("disk", "1/64")
    params = EnergyParams(0.75, 2.0)
    rep = whitney_cap_lower_check(whitney_decompose(d), EnergyForm(params, d),
                                  generations=[3, 4, 5], per_generation=2)
    by_gen = np.array(list(rep.by_generation().values()))
    assert len(by_gen) == 3
    assert by_gen.min() > 0 and by_gen.max() / by_gen.min() < 4

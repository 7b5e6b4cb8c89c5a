"""Acceptance criteria AC1 to AC9, each printing one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from frachardy.analysis import (cube_means, level_truncation, local_maximal,
                                maximal_boundedness_probe, mazya_replay, mazya_test, mean_split,
                                pair_inequality_violations, quasiadditivity, random_cell_probes,
                                slit_whitney_compact, smooth_probes, whitney_union_family,
                                zero_extension_report)
from frachardy.analysis.maximal import ball_ratio
from frachardy.capacity import (CompactCellSet, SolverConfig, boundary_ramp_family,
                                capacity_upper_bound, family_energies, slit_test_family,
                                solve_capacity)
from frachardy.energy import HARDY, EnergyForm, GridFunction, clamp01, seminorm_p, weight_field
from frachardy.experiments import build_compacta
from frachardy.geometry import SlitSnowflakeSpec, build_domain
from frachardy.params import EnergyParams
from frachardy.whitney import whitney_decompose
from oracles import brute_maximal, brute_seminorm_rows, dense_capacity

pytestmark = pytest.mark.acceptance


def _block(domain, lo, hi):
    x = domain.centers
    return np.flatnonzero(np.all((x > lo) & (x < hi), axis=1))


# -- AC1 ----------------------------------------------------------------------


def test_ac1_oracle_equivalence(record_acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    specs = [("square", "1/8"), ("square", "1/16"), ("square", "1/32"), ("disk", "1/16"),
             ("disk", "1/32"), ("square_minus_slit", "1/16"), ("punctured_square", "1/16"),
             ({"kind": "koch", "level": 2, "side": 1.0}, "1/32"), ("interval", "1/64"),
             ("interval", "1/512")]
    worst, cases = 0.0, 0
    for spec, h in specs * 2:
        d = build_domain(spec, h)
        s, p = rng.uniform(0.1, 0.9), rng.uniform(1.1, 3.5)
        form = EnergyForm(EnergyParams(s, p, d.n), d)
        u = rng.normal(size=d.size) * rng.uniform(0.1, 10)
        ref = brute_seminorm_rows(u, d.centers, d.hf, s, p)
        worst = max(worst, abs(form.energy(u) - ref) / ref)
        cases += 1

    cap_worst, cap_cases = 0.0, 0
    for spec, h, lo, hi in [("square", "1/8", 0.3, 0.7), ("square", "1/8", 0.2, 0.5),
                            ("disk", "1/8", 0.35, 0.65), ("interval", "1/64", 0.4, 0.6),
                            ("interval", "1/32", 0.1, 0.3)]:
        d = build_domain(spec, h)
        assert d.size <= 64
        for s in (0.25, 0.5, 0.8):
            K = _block(d, lo, hi)
            res = solve_capacity(CompactCellSet(d, K), EnergyForm(EnergyParams(s, 2.0, d.n), d))
            ref, _ = dense_capacity(d.centers, d.hf, s, K, np.flatnonzero(d.collar))
            cap_worst = max(cap_worst, abs(res.value - ref) / ref)
            cap_cases += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and cap_worst <= 1e-8 and cases >= 20 and elapsed < 60
    record_acceptance("AC1", ok, f"seminorm max rel err {worst:.2e} over {cases} cases; "
                                 f"capacity max rel err {cap_worst:.2e} over {cap_cases}; {elapsed:.1f}s")
    assert ok


# -- AC2 ------------------------------------------------------------------------


def test_ac2_exact_homogeneity(record_acceptance):
    worst = 0.0
    for spec, h, s, p in [("square", "1/16", 0.4, 2.0), ("disk", "1/32", 0.75, 1.5),
                          ({"kind": "koch", "level": 3, "side": 1.0}, "1/32", 0.5, 3.0),
                          ("interval", "1/64", 0.45, 2.0)]:
        d = build_domain(spec, h)
        params = EnergyParams(s, p, d.n)
        form = EnergyForm(params, d)
        u = np.random.default_rng(1).random(d.size) * d.interior
        K = CompactCellSet(d, np.flatnonzero(d.dist > 0.3 * d.dist.max()))
        p2 = EnergyForm(EnergyParams(s, 2.0, d.n), d)
        cap = solve_capacity(K, p2).value
        for lam in (Fraction(2), Fraction(1, 2)):
            expected = float(lam) ** (d.n - params.sp)
            worst = max(worst, abs(form.scaled(lam).energy(u) / form.energy(u) / expected - 1))
            scaled = p2.scaled(lam)
            cap_l = solve_capacity(CompactCellSet(scaled.domain, K.cells), scaled).value
            worst = max(worst, abs(cap_l / cap / float(lam) ** (d.n - s * 2) - 1))
    ok = worst <= 1e-10
    record_acceptance("AC2", ok, f"max rel err {worst:.2e} for lambda in {{2, 1/2}}")
    assert ok


# -- AC3 -------------------------------------------------------------------------


def test_ac3_mazya_replay(record_acceptance):
    t0 = time.perf_counter()
    d = build_domain({"kind": "punctured_square"}, "1/16")
    violations, total, worst = 0, 0, 0.0
    for s, p in [(0.4, 2.0), (0.6, 1.5), (0.5, 3.0)]:
        params = EnergyParams(s, p)
        form = EnergyForm(params, d)
        w = weight_field(d, params, HARDY)
        for u in random_cell_probes(d, 200, seed=int(10 * s + p)):
            res = mazya_replay(u, w, form)
            total += 1
            violations += not res.ok
            worst = max(worst, res.lhs / res.rhs)
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 300
    record_acceptance("AC3", ok, f"{violations} violations over {total} functions; "
                                 f"max lhs/rhs {worst:.3g}; {elapsed:.0f}s")
    assert ok


# -- AC4 --------------------------------------------------------------------------


def test_ac4_truncation_properties(record_acceptance):
    rng = np.random.default_rng(4)
    d = build_domain("square", "1/16")
    form = EnergyForm(EnergyParams(0.5, 2.0), d)
    forms = [form, EnergyForm(EnergyParams(0.3, 1.5), d), EnergyForm(EnergyParams(0.7, 3.0), d)]
    clamp_bad = 0
    for i in range(1000):
        f = forms[i % 3]
        u = GridFunction(d, rng.normal(0.5, rng.uniform(0.1, 3), d.size))
        clamp_bad += f.energy(clamp01(u).values) > f.energy(u.values) * (1 + 1e-13)

    pair_bad, pairs = 0, 0
    for spec in ("square", "disk"):
        dd = build_domain(spec, "1/16")
        for _ in range(100):
            u = rng.lognormal(sigma=rng.uniform(0.5, 3), size=dd.size) * (rng.random(dd.size) > 0.15)
            dec = level_truncation(GridFunction(dd, u))
            for k in dec.levels:
                pair_bad += pair_inequality_violations(dec, int(k))
                pairs += 1
    ok = clamp_bad == 0 and pair_bad == 0
    record_acceptance("AC4", ok, f"clamp01 energy increases {clamp_bad}/1000; pair-inequality "
                                 f"violations {pair_bad} over {pairs} exhaustive (u, k) scans")
    assert ok


# -- AC5 ------------------------------------------------------------------------------


def test_ac5_whitney_validator(record_acceptance):
    details, ok = [], True
    for spec, h in [("square", "1/64"), ("disk", "1/64"),
                    ({"kind": "koch", "level": 4, "side": 3.44}, "1/32"),
                    ({"kind": "koch_minus_slit"}, "1/32")]:
        W = whitney_decompose(build_domain(spec, h))
        chk = W.check()
        counts = np.bincount(W.cell_cube, minlength=len(W))
        sizes = np.array([len(m) for m in W.members])
        partition = counts.sum() == W.domain.size and np.array_equal(counts, sizes)
        ok &= chk["ok"] and partition
        details.append(f"{W.domain.kind}:{int(W.valid.sum())}/{len(W)} valid")
    o1 = whitney_decompose(build_domain("square", "1/64")).overlap
    o2 = whitney_decompose(build_domain("square", "1/128")).overlap
    ok &= o1 == o2 and np.isfinite(o1)
    record_acceptance("AC5", ok, f"{', '.join(details)}; overlap {o1} at 1/64 and {o2} at 1/128")
    assert ok


# -- AC6 ------------------------------------------------------------------------------


def _growth(values):
    v = np.asarray(values)
    return v[1:] / v[:-1] - 1


def test_ac6_cube_counterexample(record_acceptance):
    t0 = time.perf_counter()
    lines, ok = [], True

    # 2-D: (0,1)^2, s = 0.4, p = 2
    d = build_domain("square", "1/64")
    params = EnergyParams(0.4, 2.0)
    form = EnergyForm(params, d)
    W = whitney_decompose(d)
    _, fam = build_compacta({"kind": "whitney_union", "region": "octant",
                             "generations": [3, 4, 5, 6]}, d, W)
    ratios = mazya_test(fam, weight_field(d, params, HARDY), form).ratios
    N = quasiadditivity(fam, W, form, mode="weak").N
    g = _growth(ratios)
    fine = build_domain("square", "1/512")
    K = CompactCellSet(fine, np.flatnonzero(fine.dist >= 0.25))
    ramps = boundary_ramp_family(fine, [1 / 16, 1 / 32, 1 / 64, 1 / 128])
    bounds = family_energies(K, ramps, EnergyForm(params, fine), method="operator")
    ok2 = len(ratios) >= 3 and np.all(g >= 0.05) and np.all(np.diff(bounds) < 0) and N <= 10
    ok &= ok2
    lines.append(f"2D ratios {np.round(ratios, 4).tolist()} growth>={g.min():.0%}, "
                 f"ramp bounds {np.round(bounds, 3).tolist()}, N={N:.2f}")

    # 1-D: (0,1), s = 0.45, p = 2
    d = build_domain("interval", "1/1024")
    params = EnergyParams(0.45, 2.0, n=1)
    form = EnergyForm(params, d)
    W = whitney_decompose(d)
    fam = whitney_union_family(W, [2, 3, 4, 5])
    ratios = mazya_test(fam, weight_field(d, params, HARDY), form).ratios
    N = quasiadditivity(fam, W, form, mode="weak").N
    g = _growth(ratios)
    K = CompactCellSet(d, np.flatnonzero(d.dist >= 0.25))
    bounds = [capacity_upper_bound(K, [u], form)
              for u in boundary_ramp_family(d, [1 / 8, 1 / 16, 1 / 32, 1 / 64])]
    ok1 = len(ratios) >= 3 and np.all(g >= 0.05) and np.all(np.diff(bounds) < 0) and N <= 10
    ok &= ok1
    lines.append(f"1D ratios {np.round(ratios, 4).tolist()} growth>={g.min():.0%}, "
                 f"ramp bounds {np.round(bounds, 3).tolist()}, N={N:.2f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    record_acceptance("AC6", ok, "; ".join(lines) + f"; {elapsed:.0f}s")
    assert ok


# -- AC7 --------------------------------------------------------------------------------


def test_ac7_koch_slit_counterexample(record_acceptance):
    t0 = time.perf_counter()
    spec = SlitSnowflakeSpec(level=4)
    d = build_domain(spec, "1/32")
    params = EnergyParams(0.5, 2.0)
    form = EnergyForm(params, d)
    W = whitney_decompose(d)
    compacta = [slit_whitney_compact(W, spec, m) for m in (2, 4, 8)]
    N = quasiadditivity(compacta, W, form, mode="weak").ratios
    family = [slit_test_family(spec, m, d) for m in (2, 4, 8, 16)]
    energies = np.array([seminorm_p(u, form) for u in family])
    zext = np.array(zero_extension_report(d, params, family).ratios)
    elapsed = time.perf_counter() - t0
    ok = (np.all(np.diff(N) > 0) and zext.max() / zext.min() < 2
          and energies.max() / energies.min() < 2 and elapsed < 900 and max(d.mask.shape) <= 128)
    record_acceptance("AC7", ok, f"grid {d.mask.shape}, N_Km {np.round(N, 3).tolist()}; "
                                 f"zero-ext ratios {np.round(zext, 3).tolist()}; "
                                 f"|u_m|^p {np.round(energies, 2).tolist()}; {elapsed:.0f}s")
    assert ok


# -- AC8 ----------------------------------------------------------------------------------


def test_ac8_maximal_operator(record_acceptance):
    rng = np.random.default_rng(8)
    oracle_bad = pointwise_bad = 0
    for spec in ("square", "disk", "punctured_square"):
        d = build_domain({"kind": spec}, "1/16")
        for _ in range(3):
            u = GridFunction(d, rng.normal(size=d.size))
            M = local_maximal(u).values
            ref = brute_maximal(u.values, d.centers, d.dist, d.hf)
            oracle_bad += int(np.count_nonzero(~np.isclose(M, ref, rtol=1e-12, atol=0)))
            pointwise_bad += int(np.count_nonzero(M < np.abs(u.values)))

    lower_bad = checked = 0
    for spec in ("square", "disk"):
        d = build_domain(spec, "1/32")
        W = whitney_decompose(d)
        for u in random_cell_probes(d, 10, seed=5) + smooth_probes(d, 10, seed=5):
            _, w2 = mean_split(u, W)
            M = local_maximal(u).values
            means = cube_means(u, W)
            for q in w2:
                cells = W.members[q]
                cells = cells[d.dist[cells] > W.cubes[q].diam]
                checked += len(cells)
                lower_bad += int(np.count_nonzero(M[cells] < means[q] * ball_ratio(2) * (1 - 1e-12)))

    params = EnergyParams(0.75, 2.0)
    maxima = []
    for h in ("1/32", "1/64"):
        d = build_domain("disk", h)
        maxima.append(maximal_boundedness_probe(d, params, smooth_probes(d, 50, seed=0)).max_ratio)
    change = abs(maxima[1] - maxima[0]) / maxima[0]
    ok = oracle_bad == 0 and pointwise_bad == 0 and lower_bad == 0 and checked > 0 and change < 0.5
    record_acceptance("AC8", ok, f"oracle mismatches {oracle_bad}, M<|u| {pointwise_bad}, "
                                 f"W2 lower-bound violations {lower_bad}/{checked} cells; "
                                 f"disk max ratio {maxima[0]:.4f} -> {maxima[1]:.4f} ({change:.1%})")
    assert ok


# -- AC9 -----------------------------------------------------------------------------------


def _random_compact(rng, d, W, eligible):
    """Random rectangle of cells around a random eligible cell, kept inside unflagged cubes."""
    side = d.mask.shape[0]
    i0, j0 = d.cells[rng.choice(eligible)]
    a, b = rng.integers(0, 3, 2), rng.integers(1, 4, 2)
    box = np.all((d.cells >= [i0 - a[0], j0 - a[1]]) & (d.cells < [i0 + b[0], j0 + b[1]]), axis=1)
    cells = np.flatnonzero(box & np.isin(np.arange(d.size), eligible))
    return CompactCellSet(d, cells if len(cells) else [eligible[0]])


def test_ac9_capacity_set_functions(record_acceptance):
    rng = np.random.default_rng(9)
    bad_mono = bad_sub = bad_quasi = pairs = 0
    min_margin = np.inf
    for p, n_pairs in [(2.0, 80), (1.5, 20)]:
        d = build_domain("square", "1/16")
        W = whitney_decompose(d)
        form = EnergyForm(EnergyParams(0.5, p), d)
        eligible = np.flatnonzero(W.valid[W.cell_cube] & d.interior)
        cfg = SolverConfig()
        cache = {}

        def cap(K):
            key = K.cells.tobytes()
            if key not in cache:
                cache[key] = solve_capacity(K, form, cfg)
            return cache[key]

        for _ in range(n_pairs):
            A = _random_compact(rng, d, W, eligible)
            B = _random_compact(rng, d, W, eligible)
            U = A | B
            ra, rb, ru = cap(A), cap(B), cap(U)
            gap = max(ra.gap, rb.gap, ru.gap)
            bad_mono += ra.value > ru.value + 2 * gap
            bad_mono += rb.value > ru.value + 2 * gap
            joint = np.maximum(ra.witness.values, rb.witness.values)
            bad_sub += form.energy(joint) > ra.value + rb.value + 4 * gap
            bad_sub += ru.value > ra.value + rb.value + 4 * gap
            rep = quasiadditivity([A, B, U], W, form, mode="general")
            for it in rep.items:
                bad_quasi += it.ratio < it.lower_limit
                min_margin = min(min_margin, it.ratio - it.lower_limit)
            pairs += 1
    ok = bad_mono == 0 and bad_sub == 0 and bad_quasi == 0 and pairs >= 100
    record_acceptance("AC9", ok, f"{pairs} pairs: monotonicity {bad_mono}, subadditivity {bad_sub}, "
                                 f"quasi floor {bad_quasi} violations (min margin {min_margin:.3g})")
    assert ok

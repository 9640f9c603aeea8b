"""Exit criteria. Each test enforces its tolerance and its runtime limit."""

import itertools
import json
import time
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from emxkit.cli import main
from emxkit.emx import (
    FiniteSupportDistribution,
    eval_exact,
    eval_mc,
    learner_from_scheme,
    random_distribution,
    rank_learner,
    scheme_from_learner,
)
from emxkit.errors import ImageDrift
from emxkit.fiberprobe import (
    epsilon_gap,
    fiber_sampler,
    gallery,
    local_constancy_probe,
    parity,
    parity_boundary_point,
    random_increasing,
)
from emxkit.ground import OrderedGround
from emxkit.kuratowski import base_decomposition, build_decomposition, check_decomposition, scheme_from_decomposition
from emxkit.schemes import fiber_growth_audit, max_scheme, reduce_scheme, reduced_max_family, verify_scheme
from oracles import bullet_parts, emx_failure, learner_scheme_fibers

THIRD = Fraction(1, 3)
U5 = FiniteSupportDistribution.uniform(range(5))


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


@pytest.mark.acceptance(1, "max scheme verifies on n=100, fiber over {y} has size y")
def test_max_scheme_verification(tmp_path):
    out = tmp_path / "r.json"
    with Clock() as clock:
        status = main(["scheme", "verify", "--scheme", "max", "--ground-n", "100", "--fibers", "--out", str(out)])
    report = json.loads(out.read_text())["result"]["report"]
    assert status == 0 and report["monotone_ok"] and report["cover_ok"]
    oracle = Counter(max(a, b) for a in range(100) for b in range(a + 1, 100))
    fibers = {y[0]: c for y, c in report["fibers"]}
    assert all(fibers.get(y, 0) == oracle[y] == y for y in range(100))
    assert clock.elapsed < 1.0


@pytest.mark.acceptance(2, "base decomposition of 50^2: partition, direction-0 fibers c+1")
def test_kuratowski_base_case():
    with Clock() as clock:
        D = base_decomposition(50)
        report = check_decomposition(D)
        column_counts = [sum(1 for m in range(50) if D.part_of((m, c)) == 0) for c in range(50)]
    assert report.partition_ok and sum(report.part_sizes) == 2500
    assert column_counts == [c + 1 for c in range(50)]
    assert clock.elapsed < 1.0


@pytest.mark.acceptance(3, "k=1 and k=2 decompositions, induced schemes, bullet conformance")
def test_kuratowski_k1_k2():
    with Clock() as clock:
        r1 = check_decomposition(build_decomposition(1, 12), 20)
        r2 = check_decomposition(build_decomposition(2, 6), 8)
        v1 = verify_scheme(scheme_from_decomposition(build_decomposition(1, 12)), OrderedGround.naturals(12))
        v2 = verify_scheme(scheme_from_decomposition(build_decomposition(2, 6)), OrderedGround.naturals(6))
        D10 = build_decomposition(1, 10)
        mismatches = [p for p in itertools.product(range(10), repeat=3) if bullet_parts(p) != {D10.part_of(p)}]
    assert r1.partition_ok and r1.truncation_stable and r1.compared_n == 20
    assert r2.partition_ok and r2.truncation_stable and r2.compared_n == 8
    assert v1.monotone_ok and v1.cover_ok and v2.monotone_ok and v2.cover_ok
    assert mismatches == []
    assert clock.elapsed < 30.0


@pytest.mark.acceptance(4, "rank learner, uniform on 5, d=3, eps=1/3: failure exactly 27/125")
def test_emx_exact_value():
    with Clock() as clock:
        report = eval_exact(rank_learner(), U5, 3, THIRD)
    tuples = list(itertools.product(U5.support, repeat=3))
    assert len(tuples) == 125
    assert emx_failure(rank_learner(), U5.atoms, 3, THIRD) == Fraction(27, 125)
    assert report.failure_probability == Fraction(27, 125)
    assert clock.elapsed < 1.0


@pytest.mark.acceptance(5, "200 random distributions: failure <= 8/27, (1/3,1/3)-EMX satisfied")
def test_emx_analytic_bound():
    rng = np.random.default_rng(2026)
    with Clock() as clock:
        dists = [random_distribution(rng, max_support=8) for _ in range(200)]
        reports = [eval_exact(rank_learner(), P, 3, THIRD, delta=THIRD) for P in dists]
    assert all(len(P.atoms) <= 8 for P in dists)
    assert all(r.failure_probability <= Fraction(8, 27) for r in reports)
    assert all(r.satisfied for r in reports)
    assert clock.elapsed < 30.0


@pytest.mark.acceptance(6, "Monte Carlo: 10^5 trials within 95% half-width in >= 19 of 20 seeds")
def test_monte_carlo_consistency():
    exact = 27 / 125
    with Clock() as clock:
        reports = [eval_mc(rank_learner(), U5, 3, THIRD, 100_000, seed) for seed in range(20)]
    hits = sum(abs(r.failure_probability - exact) <= r.half_width for r in reports)
    assert hits >= 19
    assert clock.elapsed < 30.0


@pytest.mark.acceptance(7, "learner -> 6->5 scheme verifies on n=30, fibers match brute force")
def test_learner_to_scheme():
    with Clock() as clock:
        scheme = scheme_from_learner(rank_learner(), 3)
        report = verify_scheme(scheme, OrderedGround.naturals(30))
        oracle = learner_scheme_fibers(rank_learner(), 3, 5, 30)
    assert (scheme.m, scheme.d) == (6, 5)
    assert report.monotone_ok and report.cover_ok
    assert report.fibers == dict(oracle)
    # the chosen subset drops the second largest element of A
    assert all(c == B[4] - B[3] - 1 for B, c in report.fibers.items())
    assert clock.elapsed < 60.0


@pytest.mark.acceptance(8, "learner from max scheme equals rank learner (n <= 10, d <= 3)")
def test_scheme_to_learner_round_trip():
    with Clock() as clock:
        mismatches = []
        for n in range(1, 11):
            G = learner_from_scheme(max_scheme(), OrderedGround.naturals(n))
            for d in range(1, 4):
                for S in itertools.product(range(n), repeat=d):
                    if set(G(S)) != set(rank_learner()(S)):
                        mismatches.append(S)
    assert mismatches == []
    assert clock.elapsed < 10.0


@pytest.mark.acceptance(9, "reduction of the max scheme and linear fiber growth 10/20/40")
def test_reduction_and_k0_absurdity():
    with Clock() as clock:
        red = reduce_scheme(max_scheme(), 50, 10)
        images = [red.scheme.sigma(x) for x in itertools.combinations(range(red.delta), 1)]
        rows = fiber_growth_audit(reduced_max_family, [10, 20, 40])
    assert red.delta == 10 and images == [()] * 10
    assert [r.max_fiber for r in rows] == [10, 20, 40]
    assert clock.elapsed < 5.0


@pytest.mark.acceptance(10, "continuous selectors: local constancy + 10^3 witnesses; parity drifts")
def test_continuity_negative_result():
    m = 2
    with Clock() as clock:
        points = random_increasing(m, 1000, np.random.default_rng(10))
        for sel in gallery(m):
            if not sel.claimed_continuous:
                continue
            for i, x in enumerate(points):
                assert local_constancy_probe(sel, x, epsilon_gap(x) / 2, 1000, seed=i), (sel.name, x)
                witnesses = fiber_sampler(sel, x, 1000)
                assert len(np.unique(witnesses, axis=0)) == 1000
        x = parity_boundary_point(m, seed=0)
        assert not local_constancy_probe(parity(m), x, epsilon_gap(x) / 2, 1000, seed=0)
        with pytest.raises(ImageDrift):
            fiber_sampler(parity(m), x, 1000)
    assert clock.elapsed < 30.0

import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emxkit.errors import CoverFailure, GroundExhausted, KTooLarge, NotInDomain, NotMonotone
from emxkit.ground import OrderedGround
from emxkit.kuratowski import build_decomposition, scheme_from_decomposition
from emxkit.schemes import (
    CompressionScheme,
    eta_from_sigma,
    fiber_growth_audit,
    fiber_sizes,
    max_family,
    max_scheme,
    reduce_scheme,
    reduced_max_family,
    scheme_from_table,
    tabulate,
    unbounded_growth,
    verify_scheme,
)


def brute_fiber(sigma, n, m, y):
    return [x for x in itertools.combinations(range(n), m) if tuple(sigma(x)) == tuple(y)]


def min_sigma(x):
    return (x[0],)


def initial_segment(y):
    return tuple(range(y[0] + 1))


def test_max_scheme_values():
    s = max_scheme()
    assert (s.m, s.d) == (2, 1)
    assert s.sigma((2, 4)) == (4,)
    assert s.eta((4,)) == (0, 1, 2, 3, 4)


@pytest.mark.parametrize("n", [5, 8, 20])
def test_max_scheme_fiber_over_four(n):
    assert brute_fiber(max_scheme().sigma, n, 2, (4,)) == [(0, 4), (1, 4), (2, 4), (3, 4)]
    assert fiber_sizes(max_scheme(), OrderedGround.naturals(n))[(4,)] == 4


def test_eta_from_sigma():
    derived = eta_from_sigma(CompressionScheme(2, 1, max_scheme().sigma), OrderedGround.naturals(5))
    assert derived.eta((3,)) == (0, 1, 2, 3)
    assert derived.eta((0,)) == ()  # nothing maps to {0}
    assert verify_scheme(derived, OrderedGround.naturals(5)).cover_ok


def test_verify_max_scheme_n20():
    report = verify_scheme(max_scheme(), OrderedGround.naturals(20))
    assert report.monotone_ok and report.cover_ok and report.finite_to_one
    assert report.max_fiber == 19
    assert report.fiber_histogram == {y: 1 for y in range(1, 20)}
    assert report.max_fiber == max(report.fiber_histogram)


def test_cover_failure_for_min_sigma():
    bad = CompressionScheme(2, 1, min_sigma, initial_segment, name="min")
    assert 5 not in bad.eta(bad.sigma((0, 5)))
    with pytest.raises(CoverFailure) as exc:
        verify_scheme(bad, OrderedGround.naturals(8))
    x, y, cover = exc.value.witness
    assert not set(x) <= set(cover)
    report = verify_scheme(bad, OrderedGround.naturals(8), raise_on_failure=False)
    assert report.monotone_ok and not report.cover_ok


def test_not_monotone():
    bad = CompressionScheme(2, 1, lambda x: (x[0] + x[1],))
    with pytest.raises(NotMonotone) as exc:
        verify_scheme(bad, OrderedGround.naturals(5))
    x, y = exc.value.witness
    assert x == [1, 2] and y == [3]


def test_ground_equal_to_m_has_one_point():
    assert verify_scheme(max_scheme(), OrderedGround.naturals(2)).fiber_histogram == {1: 1}
    with pytest.raises(KTooLarge):
        verify_scheme(max_scheme(), OrderedGround.naturals(1))


def test_max_scheme_valid_up_to_200():
    for n in range(2, 201):
        report = verify_scheme(max_scheme(), OrderedGround.naturals(n))
        assert report.monotone_ok and report.cover_ok
        assert report.max_fiber == n - 1


def _fiber_bound_holds(scheme, n):
    fibers = fiber_sizes(scheme, OrderedGround.naturals(n))
    return all(c <= math.comb(len(scheme.eta(y)), scheme.m) for y, c in fibers.items())


@pytest.mark.parametrize("n", [2, 10, 25])
def test_fiber_counting_bound(n):
    assert _fiber_bound_holds(max_scheme(), n)
    for k in (0, 1):
        if n >= k + 2:
            assert _fiber_bound_holds(scheme_from_decomposition(build_decomposition(k, n)), n)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2**32 - 1), st.data())
def test_random_sigma_with_derived_eta_always_covers(n, seed, data):
    m = data.draw(st.integers(1, min(n, 4)))
    d = data.draw(st.integers(0, m - 1))
    rng = random.Random(seed)
    table = {x: tuple(sorted(rng.sample(x, d))) for x in itertools.combinations(range(n), m)}
    scheme = eta_from_sigma(CompressionScheme(m, d, table.__getitem__), OrderedGround.naturals(n))
    report = verify_scheme(scheme, OrderedGround.naturals(n))
    assert report.cover_ok and report.finite_to_one
    assert sum(c * size for size, c in report.fiber_histogram.items()) == math.comb(n, m)


def test_table_round_trip():
    ground = OrderedGround.naturals(9)
    doc = tabulate(max_scheme(), ground)
    assert doc["m"] == 2 and doc["ground_n"] == 9 and doc["sigma"][0] == [[0, 1], [1]]
    loaded = scheme_from_table(doc)
    assert verify_scheme(loaded, ground).to_dict() == verify_scheme(max_scheme(), ground).to_dict()
    with pytest.raises(NotInDomain):
        loaded.sigma((0, 20))
    with pytest.raises(ValueError):
        scheme_from_table({"m": 2, "sigma": [[1]]})


def test_parallel_partition_matches_sequential():
    scheme = scheme_from_decomposition(build_decomposition(1, 10))
    ground = OrderedGround.naturals(10)
    seq = verify_scheme(scheme, ground)
    par = verify_scheme(scheme, ground, jobs=2)
    assert seq.fibers == par.fibers
    assert seq.to_dict() == par.to_dict()


def test_reduce_max_scheme():
    red = reduce_scheme(max_scheme(), 50, 10)
    assert red.chain == (10,)
    assert (red.scheme.m, red.scheme.d, red.ground.size) == (1, 0, 10)
    assert all(red.scheme.sigma((a,)) == () for a in range(10))
    assert fiber_sizes(red.scheme, red.ground) == {(): 10}


def _stepping_sigma(x):
    a, b = x
    return (a,) if b == a + 1 and a < 12 else (b,)


def test_reduce_chain_climbs_to_fixpoint():
    scheme = CompressionScheme(2, 1, _stepping_sigma)
    red = reduce_scheme(scheme, 40, 10)
    assert red.chain == (10, 11, 12, 13)
    assert all(a <= b for a, b in zip(red.chain, red.chain[1:]))
    assert len(red.chain) <= 40
    # closure: every x whose image lies below delta lies below delta
    for x in itertools.combinations(range(40), 2):
        if max(_stepping_sigma(x)) < red.delta:
            assert max(x) < red.delta


def test_reduce_exhausts_ground_for_min_sigma():
    with pytest.raises(GroundExhausted):
        reduce_scheme(CompressionScheme(2, 1, min_sigma), 30, 5)


def test_reduce_kuratowski_scheme_drops_a_dimension():
    scheme = scheme_from_decomposition(build_decomposition(1, 20))
    red = reduce_scheme(scheme, 20, 8)
    assert red.delta == 8
    assert (red.scheme.m, red.scheme.d) == (2, 1)
    report = verify_scheme(red.scheme, red.ground)
    assert report.monotone_ok
    assert all(red.scheme.sigma(x) == (x[1],) for x in itertools.combinations(range(8), 2))


def test_fiber_growth_audit_examples():
    reduced = fiber_growth_audit(reduced_max_family, [10, 20, 40])
    assert [r.max_fiber for r in reduced] == [10, 20, 40]
    assert unbounded_growth(reduced)
    plain = fiber_growth_audit(max_family, [10, 20, 40])
    assert [r.max_fiber for r in plain] == [9, 19, 39]
    assert [r.truncation_stable for r in plain] == [None, True, True]
    constant = fiber_growth_audit(lambda n: (max_scheme(), OrderedGround.naturals(10)), [1, 2, 3])
    assert [r.max_fiber for r in constant] == [9, 9, 9]
    assert not unbounded_growth(constant)
    with pytest.raises(ValueError):
        fiber_growth_audit(max_family, [20, 10])

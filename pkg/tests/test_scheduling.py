import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adhoc_capacity.scheduling import (Schedule, ScheduleParams, build_pi1, build_pi2, conflict_degrees,
                                       exclusion_factor, exclusion_radius, greedy_coloring, max_degree_bound,
                                       required_sinr, verify_schedule, worst_case_interference_bound)
from adhoc_capacity.sphere import GeometryDomainError

E = math.e
# oracle values from a 30-digit evaluation of 20 (1 + 4 sqrt(128)) and 8 (1 + 4 sqrt(128))^2
R_ALPHA4_LN1 = 925.096679918780831233080783494
V_ALPHA4_LN1 = 17116.0773439350246649864646268


def test_exclusion_radius_example():
    assert exclusion_radius(E, 4.0) == pytest.approx(R_ALPHA4_LN1, rel=1e-14)


def test_max_degree_example():
    assert max_degree_bound(E, 4.0) == pytest.approx(V_ALPHA4_LN1, rel=1e-14)


def test_exclusion_radius_large_alpha_limit():
    n = 5000.0
    assert exclusion_radius(n, 1e9) == pytest.approx(100 * math.sqrt(math.log(n)), rel=1e-6)


def test_printed_form_drops_the_one():
    for n, a in [(1e3, 3.0), (1e5, 10.0)]:
        assert exclusion_factor(n, a, form="printed") == pytest.approx(exclusion_factor(n, a) - 1, rel=1e-15)
        assert exclusion_radius(n, a, 2.0, form="printed") < exclusion_radius(n, a, 2.0)


def test_formula_domain_errors():
    for f in (lambda: exclusion_radius(100, 2.0), lambda: max_degree_bound(100, 1.5),
              lambda: worst_case_interference_bound(10.0, 2.0, 1.0, 1.0)):
        with pytest.raises(GeometryDomainError):
            f()
    with pytest.raises(ValueError):
        exclusion_factor(100, 4.0, form="typo")


def test_required_sinr_examples():
    assert required_sinr(math.exp(10)) == pytest.approx(10.0, rel=1e-15)
    assert required_sinr(1e4) == pytest.approx(9.21034037197618273607196581874, rel=1e-15)


def test_interference_bound_scaling():
    for a in (3.0, 4.0, 7.5):
        b1 = worst_case_interference_bound(10.0, a, 1.0, 2.0)
        assert worst_case_interference_bound(20.0, a, 1.0, 2.0) == pytest.approx(b1 * 2 ** (2 - a), rel=1e-13)
    # with rho_n^2 = 100 ln n the bound reads P R^(2 - alpha) / (25 ln n (alpha - 2))
    n, R, a = 1e4, 300.0, 4.0
    rho = 10 * math.sqrt(math.log(n))
    assert worst_case_interference_bound(R, a, 1.0, rho) == pytest.approx(
        R ** (2 - a) / (25 * math.log(n) * (a - 2)), rel=1e-13)
    near = [worst_case_interference_bound(5.0, 2 + h, 1.0, 1.0) for h in (1e-1, 1e-3, 1e-6)]
    assert near[0] < near[1] < near[2] and near[2] > 1e5


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 60), st.floats(0.0, 1.0), st.integers(0, 2**32 - 1))
def test_greedy_coloring_proper(nv, density, seed):
    rng = np.random.default_rng(seed)
    i, j = np.triu_indices(nv, k=1)
    keep = rng.random(i.size) < density
    edges = np.stack([i[keep], j[keep]], axis=1)
    col = greedy_coloring(nv, edges)
    assert np.all(col >= 0)
    assert np.all(col[edges[:, 0]] != col[edges[:, 1]])
    deg = np.bincount(edges.ravel(), minlength=nv)
    assert col.max() + 1 <= (deg.max() if nv else 0) + 1


def test_pi1_adjacency_only(small):
    s = build_pi1(small.t, ScheduleParams(0.0))
    assert verify_schedule(s, small.t, 0.0) == []
    assert s.num_colors <= int(np.diff(small.t.nbr_ptr).max()) + 1
    assert s.c1 == s.num_colors - 1


def test_pi1_colour_budget_enforced(small):
    with pytest.raises(ValueError):
        build_pi1(small.t, ScheduleParams(0.0, c1=0))


def test_pi2_proper_and_within_degree_bound(medium):
    s = build_pi2(medium.t, medium.n, 10.0)
    R = exclusion_radius(medium.n, 10.0, medium.rho)
    assert not s.fallback
    assert s.exclusion_radius == pytest.approx(R)
    assert verify_schedule(s, medium.t, R) == []
    assert s.num_colors <= max_degree_bound(medium.n, 10.0) + 1
    assert s.num_colors <= conflict_degrees(medium.t, R).max() + 1


def test_recolouring_creates_one_violation(medium):
    t = medium.t
    s = build_pi2(t, medium.n, 10.0)
    pairs = t.pairs_within(s.exclusion_radius)
    partners = {c: set() for c in range(t.n_cells)}
    for a, b in pairs:
        partners[a].add(b)
        partners[b].add(a)
    for c in range(t.n_cells):
        cols = [int(s.color_of[j]) for j in partners[c]]
        unique = [k for k in set(cols) if cols.count(k) == 1]
        if unique:
            bad = s.recolored(c, unique[0])
            assert len(verify_schedule(bad, t, s.exclusion_radius)) == 1
            return
    pytest.fail("no cell has a conflict colour used by a single partner")


def test_pi1_not_proper_at_pi2_radius(medium):
    s1 = build_pi1(medium.t, ScheduleParams(0.0))
    R = exclusion_radius(medium.n, 10.0, medium.rho)
    assert verify_schedule(s1, medium.t, s1.exclusion_radius) == []
    assert len(verify_schedule(s1, medium.t, R)) > 0


def test_fallback_when_radius_exceeds_sphere(small):
    s = build_pi2(small.t, small.n, 4.0)
    assert exclusion_radius(small.n, 4.0, small.rho) >= small.sp.half_circumference
    assert s.fallback
    assert s.num_colors == small.t.n_cells
    assert verify_schedule(s, small.t, small.sp.half_circumference) == []


def test_schedule_round_trip(small):
    s = build_pi1(small.t, ScheduleParams(0.0))
    back = Schedule.from_dict(s.to_dict())
    assert np.array_equal(back.color_of, s.color_of)
    assert back.num_colors == s.num_colors and back.policy == "pi1"
    d = s.to_dict()
    d["num_colors"] += 1
    with pytest.raises(ValueError):
        Schedule.from_dict(d)


def test_colour_classes_partition(medium):
    s = build_pi2(medium.t, medium.n, 10.0)
    ptr, cells = s.color_classes()
    assert ptr[-1] == medium.t.n_cells
    assert sorted(cells.tolist()) == list(range(medium.t.n_cells))
    for k in range(s.num_colors):
        assert np.all(s.color_of[cells[ptr[k]:ptr[k + 1]]] == k)

import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from conftest import TINY_FAMILY, make_csp, random_tiny_csp
from llltool.csp import (
    AlwaysViolated,
    Constraint,
    Csp,
    assignment_rows,
    build_dependency_graph,
    closed_neighborhood,
    csp_stats,
    dump_problem,
    is_solution,
    lll_condition,
    load_problem,
    materialize_bad,
    prob_bad,
    quotient_csp,
    uniform_weights,
    violates,
)
from llltool.errors import (
    CapExceededError,
    InvalidInputError,
    InvalidParameterError,
    MissingVariableError,
)


def test_weights_must_sum_to_one():
    with pytest.raises(InvalidInputError):
        Csp((0,), 2, (Fraction(1, 2), Fraction(1, 3)), ())


def test_constraint_ids_must_be_dense():
    c = Constraint(1, (0,), frozenset())
    with pytest.raises(InvalidInputError):
        Csp((0,), 2, uniform_weights(2), (c,))


def test_bad_rows_must_match_domain_arity():
    with pytest.raises(InvalidInputError):
        Constraint(0, (0, 1), frozenset({(0,)}))


def test_bad_labels_must_be_in_range():
    c = Constraint(0, (0,), frozenset({(5,)}))
    with pytest.raises(InvalidInputError):
        Csp((0,), 2, uniform_weights(2), (c,))


def test_domain_must_be_sorted_unique():
    with pytest.raises(InvalidInputError):
        Constraint(0, (1, 0), frozenset())
    with pytest.raises(InvalidInputError):
        Constraint(0, (0, 0), frozenset())


def test_violates_reads_only_the_domain():
    csp = make_csp(3, [((0, 1), [(1, 0)])])
    assert violates(csp, 0, {0: 1, 1: 0})
    assert not violates(csp, 0, {0: 1, 1: 1})


def test_violates_requires_domain_coverage():
    csp = make_csp(2, [((0, 1), [(0, 0)])])
    with pytest.raises(MissingVariableError):
        violates(csp, 0, {0: 0})


def test_empty_domain_constraint_two_states():
    hit = make_csp(1, [((), [()])])
    miss = make_csp(1, [((), [])])
    assert violates(hit, 0, {})
    assert not violates(miss, 0, {})
    assert prob_bad(hit, 0) == 1
    assert prob_bad(miss, 0) == 0


def test_is_solution_checks_every_constraint():
    csp = make_csp(2, [((0,), [(0,)]), ((1,), [(1,)])])
    assert is_solution(csp, {0: 1, 1: 0})
    assert not is_solution(csp, {0: 0, 1: 0})


def test_prob_bad_explicit_rows():
    csp = make_csp(2, [((0, 1), [(0, 0), (1, 1)])])
    assert prob_bad(csp, 0) == Fraction(1, 2)
    skew = make_csp(2, [((0, 1), [(0, 0), (1, 1)])],
                    weights=(Fraction(1, 4), Fraction(3, 4)))
    assert prob_bad(skew, 0) == Fraction(1, 16) + Fraction(9, 16)


def test_prob_bad_always_violated_short_circuits():
    csp = make_csp(2, [((0, 1), AlwaysViolated())])
    # no materialization needed even when the cap forbids enumeration
    assert prob_bad(csp, 0, cap=1) == 1


def test_materialize_predicate_respects_cap():
    csp = make_csp(2, [((0, 1), AlwaysViolated())])
    assert materialize_bad(csp, 0) == frozenset(
        assignment_rows(2, 2)
    )
    big = make_csp(4, [(tuple(range(4)), AlwaysViolated())])
    with pytest.raises(CapExceededError):
        materialize_bad(big, 0, cap=3)


def test_dependency_graph_links_shared_variables():
    csp = make_csp(3, [((0, 1), []), ((1, 2), []), ((2,), [])])
    dep = build_dependency_graph(csp)
    assert dep.adjacency == ((1,), (0, 2), (1,))
    assert closed_neighborhood(dep, 1) == frozenset({0, 1, 2})


def test_empty_domain_is_isolated_in_dependency_graph():
    csp = make_csp(1, [((), [()]), ((0,), [(0,)])])
    dep = build_dependency_graph(csp)
    assert dep.adjacency[0] == ()


def test_csp_stats_fields():
    csp = make_csp(3, [((0, 1), [(0, 0)]), ((1, 2), [(1, 1), (0, 0)])])
    stats = csp_stats(csp)
    assert stats.order == 2
    assert stats.vdeg == 2
    assert stats.max_dep_degree == 1
    assert stats.p_max == Fraction(1, 2)


def test_lll_condition_classic():
    assert lll_condition(Fraction(1, 16), 4, "classic").holds
    assert not lll_condition(Fraction(1, 4), 2, "classic").holds


def test_lll_condition_double_exp():
    assert lll_condition(Fraction(1, 32), 1, "double_exp").holds
    assert not lll_condition(Fraction(1, 4), 2, "double_exp").holds


def test_lll_condition_exponent():
    rep = lll_condition(Fraction(1, 1024), 3, "exponent", s=Fraction(6, 5))
    assert rep.holds
    assert not lll_condition(
        Fraction(1, 2), 3, "exponent", s=Fraction(6, 5)
    ).holds
    with pytest.raises(InvalidParameterError):
        lll_condition(Fraction(1, 8), 1, "exponent")
    with pytest.raises(InvalidParameterError):
        lll_condition(Fraction(1, 8), 1, "exponent", s=Fraction(1))


def test_lll_condition_rejects_nonsense():
    with pytest.raises(InvalidParameterError):
        lll_condition(Fraction(3, 2), 1, "classic")
    with pytest.raises(InvalidParameterError):
        lll_condition(Fraction(1, 8), 1, "triple_exp")


def test_quotient_shrinks_domains_and_conditions_bads():
    csp = make_csp(3, [((0, 1), [(0, 0), (1, 1)]), ((1, 2), [(0, 1)])])
    q = quotient_csp(csp, {1: 0})
    assert q.remaining() == (0, 2)
    c0 = q.csp.constraint(0)
    assert c0.domain == (0,)
    assert materialize_bad(q.csp, 0) == frozenset({(0,)})
    assert materialize_bad(q.csp, 1) == frozenset({(1,)})


def test_quotient_fully_fixed_constraint_keeps_verdict():
    csp = make_csp(2, [((0, 1), [(1, 0)])])
    violated = quotient_csp(csp, {0: 1, 1: 0})
    fine = quotient_csp(csp, {0: 0, 1: 0})
    assert prob_bad(violated.csp, 0) == 1
    assert prob_bad(fine.csp, 0) == 0


def test_quotient_rejects_unknown_variable():
    csp = make_csp(1, [((0,), [(0,)])])
    with pytest.raises(InvalidInputError):
        quotient_csp(csp, {4: 0})
    with pytest.raises(InvalidInputError):
        quotient_csp(csp, {0: 9})


def conditional_mass_by_enumeration(csp, cid, fixed):
    """Direct sum over completions of the constraint's free variables."""
    c = csp.constraint(cid)
    free = [v for v in c.domain if v not in fixed]
    total = Fraction(0)
    for row in assignment_rows(csp.label_count, len(free)):
        f = dict(fixed)
        f.update(zip(free, row))
        if violates(csp, cid, f):
            mass = Fraction(1)
            for v, lab in zip(free, row):
                mass *= csp.weights[lab]
            total += mass
    return total


def test_quotient_masses_match_enumeration():
    rng = random.Random(101)
    for _ in range(40):
        csp = random_tiny_csp(rng)
        fixed = {
            v: rng.randint(0, 1)
            for v in csp.variables
            if rng.random() < 0.5
        }
        q = quotient_csp(csp, fixed)
        for c in csp.constraints:
            assert prob_bad(q.csp, c.id) == conditional_mass_by_enumeration(
                csp, c.id, fixed
            )


def test_quotients_compose():
    csp = make_csp(3, [((0, 1), [(0, 0)]), ((1, 2), [(1, 1)])])
    one = quotient_csp(quotient_csp(csp, {0: 0}).csp, {1: 0})
    both = quotient_csp(csp, {0: 0, 1: 0})
    for cid in (0, 1):
        assert materialize_bad(one.csp, cid) == materialize_bad(both.csp, cid)


def test_problem_json_round_trip_family():
    for csp in TINY_FAMILY:
        again = load_problem(json.dumps(dump_problem(csp)))
        assert again == csp


def test_problem_json_always_tag():
    csp = make_csp(2, [((0, 1), AlwaysViolated())])
    obj = dump_problem(csp)
    assert obj["constraints"][0]["bad"] == "always"
    again = load_problem(json.dumps(obj))
    assert isinstance(again.constraint(0).bad, AlwaysViolated)


def test_problem_json_defaults_to_uniform_weights():
    obj = {
        "variables": 2,
        "labels": {"count": 3},
        "constraints": [{"id": 0, "domain": [0], "bad": [[2]]}],
    }
    csp = load_problem(json.dumps(obj))
    assert csp.weights == uniform_weights(3)


def test_problem_json_rejects_garbage():
    with pytest.raises(InvalidInputError):
        load_problem("{not json")
    with pytest.raises(InvalidInputError):
        load_problem(json.dumps({"labels": {"count": 2}}))


@settings(max_examples=40)
@given(st.integers(0, 3), st.integers(1, 3))
def test_assignment_rows_cover_exactly_the_cube(length, k):
    rows = list(assignment_rows(k, length))
    assert len(rows) == k**length
    assert len(set(rows)) == len(rows)
    assert rows == sorted(rows)  # lexicographic, stable for greedy scans

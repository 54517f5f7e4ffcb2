import random
from fractions import Fraction

import pytest

from conftest import (
    TINY_FAMILY,
    enumerate_all_witnesses,
    make_csp,
    realizable_by_sequence,
    some_tables,
)
from llltool.csp import AlwaysViolated
from llltool.errors import (
    CapExceededError,
    DepthExceededError,
    HypothesisError,
    InvalidInputError,
    InvalidParameterError,
)
from llltool.moser_tardos import MtSequence
from llltool.tables import table_from_rows
from llltool.witness import (
    WitnessDigraph,
    canonical_form,
    compatibility_check,
    enumerate_sink_star,
    full_witness_digraph,
    in_level_counts,
    is_isomorphic,
    required_cells,
    validate_witness,
    verify_mt1,
    verify_mt1_exact,
    verify_mt1_monte_carlo,
    verify_mt2_partial_sums,
    witness_from_json,
    witness_from_levels,
)

CHAIN = make_csp(1, [((0,), [(0,)])])
PAIR = make_csp(3, [((0, 1), [(0, 0)]), ((1, 2), [(1, 1)])])
DISJOINT = make_csp(2, [((0,), [(0,)]), ((1,), [(1,)])])


def test_digraph_validation():
    with pytest.raises(InvalidInputError):
        WitnessDigraph((0,), frozenset({(0, 0)}))
    with pytest.raises(InvalidInputError):
        WitnessDigraph((0,), frozenset({(0, 3)}))


def test_digraph_json_round_trip():
    g = WitnessDigraph((0, 0, 1), frozenset({(0, 1), (1, 2)}))
    assert witness_from_json(g.to_json()) == g


def test_digraph_json_requires_dense_ids():
    with pytest.raises(InvalidInputError):
        witness_from_json({"vertices": [{"id": 1, "constraint": 0}], "edges": []})


def test_repeats_of_one_constraint_chain_up():
    seq = MtSequence.from_lists([[0], [0], [0]])
    g = full_witness_digraph(seq, CHAIN)
    assert g.decorations == (0, 0, 0)
    assert g.edges == frozenset({(0, 1), (0, 2), (1, 2)})
    assert g.sinks() == [2]


def test_disjoint_firings_stay_unlinked():
    seq = MtSequence.from_lists([[0, 1]])
    g = full_witness_digraph(seq, DISJOINT)
    assert g.edges == frozenset()
    assert sorted(g.sinks()) == [0, 1]


def test_edges_need_shared_variables():
    seq = MtSequence.from_lists([[0], [1]])
    g = full_witness_digraph(seq, PAIR)
    assert g.edges == frozenset({(0, 1)})


def test_validate_witness_accepts_full_outputs():
    for csp, seq in [
        (CHAIN, MtSequence.from_lists([[0], [0]])),
        (PAIR, MtSequence.from_lists([[0], [1], [0]])),
        (DISJOINT, MtSequence.from_lists([[0, 1], [0]])),
    ]:
        assert validate_witness(full_witness_digraph(seq, csp), csp)


def test_validate_witness_rejects_cycles_and_gaps():
    two_cycle = WitnessDigraph((0, 0), frozenset({(0, 1), (1, 0)}))
    assert not validate_witness(two_cycle, CHAIN)
    missing_edge = WitnessDigraph((0, 0), frozenset())
    assert not validate_witness(missing_edge, CHAIN)
    spurious = WitnessDigraph((0, 1), frozenset({(0, 1)}))
    assert not validate_witness(spurious, DISJOINT)


def test_canonical_form_ignores_vertex_order():
    a = witness_from_levels([{0}, {1}, {0}], PAIR)
    # same digraph with vertices listed top, bottom, middle
    flat = [(0, ()), (0, (2, 0)), (1, (0,))]
    b = WitnessDigraph(
        tuple(dec for dec, _ in flat),
        frozenset((i, j) for i, (_, outs) in enumerate(flat) for j in outs),
    )
    assert canonical_form(a) == canonical_form(b)
    assert is_isomorphic(a, b)
    assert canonical_form(a) != canonical_form(
        witness_from_levels([{0}, {1}], PAIR)
    )


def test_canonical_form_rejects_cyclic_input():
    with pytest.raises(InvalidInputError):
        canonical_form(WitnessDigraph((0, 0), frozenset({(0, 1), (1, 0)})))


def test_in_level_counts_and_cells():
    g = witness_from_levels([{0}, {1}, {0}], PAIR)
    # vertex 2 (top, constraint 0 on vars 0,1) has in-neighbors 0 and 1;
    # var 0 is hit by the level-0 copy of constraint 0 only
    assert in_level_counts(g, PAIR, 2) == {0: 1, 1: 2}
    assert (1, 2) in required_cells(g, PAIR)
    assert required_cells(g, PAIR) == sorted(set(required_cells(g, PAIR)))


def test_compatibility_reads_chained_rows():
    g = witness_from_levels([{0}, {0}], CHAIN)
    assert compatibility_check(g, CHAIN, table_from_rows([[0], [0]]))
    assert not compatibility_check(g, CHAIN, table_from_rows([[0], [1]]))
    with pytest.raises(DepthExceededError):
        compatibility_check(g, CHAIN, table_from_rows([[0]]))


def test_mt1_exact_frozen_values():
    one = verify_mt1_exact(witness_from_levels([{0}], CHAIN), CHAIN, depth=3)
    assert one["pass"] and one["lhs_exact"] == "1/2"
    two = verify_mt1_exact(witness_from_levels([{0}, {0}], CHAIN), CHAIN, depth=3)
    assert two["pass"] and two["lhs_exact"] == "1/4"
    empty = verify_mt1_exact(witness_from_levels([], CHAIN), CHAIN, depth=3)
    assert empty["pass"] and empty["lhs_exact"] == "1"


def test_mt1_exact_skewed_weights():
    skew = make_csp(1, [((0,), [(0,)])],
                    weights=(Fraction(1, 4), Fraction(3, 4)))
    rep = verify_mt1_exact(witness_from_levels([{0}, {0}], skew), skew, depth=2)
    assert rep["pass"]
    assert rep["rhs_exact"] == "1/16"


def test_mt1_exact_refuses_rows_past_depth():
    deep = witness_from_levels([{0}, {0}, {0}, {0}], CHAIN)
    with pytest.raises(DepthExceededError):
        verify_mt1_exact(deep, CHAIN, depth=3)


def test_mt1_exact_cell_cap():
    g = witness_from_levels([{0, 1}], PAIR)
    with pytest.raises(CapExceededError):
        verify_mt1_exact(g, PAIR, depth=3, cap=7)


def test_mt1_monte_carlo_within_band():
    g = witness_from_levels([{0}], CHAIN)
    rep = verify_mt1_monte_carlo(g, CHAIN, trials=2000, seed=4, depth=3)
    assert rep["pass"]
    assert rep["rhs_exact"] == "1/2"
    again = verify_mt1_monte_carlo(g, CHAIN, trials=2000, seed=4, depth=3)
    assert rep == again


def test_mt1_dispatcher_modes():
    g = witness_from_levels([{0}], CHAIN)
    assert verify_mt1(g, CHAIN, "exact", depth=2)["mode"] == "exact"
    with pytest.raises(InvalidParameterError):
        verify_mt1(g, CHAIN, "guess", depth=2)


def test_sink_star_chains_for_isolated_constraint():
    reps = enumerate_sink_star(0, CHAIN, max_vertices=3)
    assert [g.n for g in reps] == [1, 2, 3]
    for g in reps:
        assert g.sinks() == [g.n - 1]
        assert validate_witness(g, CHAIN)


def test_sink_star_count_on_a_ring():
    from llltool.generators import sinkless_orientation
    from llltool.graphs import graph_from_edges

    ring = graph_from_edges(4, [(i, (i + 1) % 4) for i in range(4)])
    csp = sinkless_orientation(ring)
    reps = enumerate_sink_star(0, csp, max_vertices=3)
    assert len(reps) == 14  # 1 single + 4 two-level + 9 three-level stacks


def test_sink_star_matches_naive_enumeration():
    for csp in TINY_FAMILY[:6]:
        cid = 0
        naive = [
            g
            for g in enumerate_all_witnesses(csp, 3)
            if g.n >= 1
            and len(g.sinks()) == 1
            and g.decorations[g.sinks()[0]] == cid
        ]
        reps = enumerate_sink_star(cid, csp, max_vertices=3)
        assert len(reps) == len(naive)
        forms = {canonical_form(g) for g in reps}
        assert forms == {canonical_form(g) for g in naive}


def test_sink_star_cap_fires():
    with pytest.raises(CapExceededError):
        enumerate_sink_star(0, CHAIN, max_vertices=5, cap=2)


def test_mt2_rejects_alpha_over_the_slack():
    alpha = {0: Fraction(1, 2)}
    beta = {0: Fraction(1, 4)}
    csp = CHAIN
    with pytest.raises(HypothesisError):
        verify_mt2_partial_sums(0, csp, alpha, beta, max_vertices=3)


def test_mt2_range_check():
    with pytest.raises(InvalidParameterError):
        verify_mt2_partial_sums(
            0, CHAIN, {0: Fraction(1)}, {0: Fraction(1, 4)}, max_vertices=2
        )


def test_mt2_zero_alpha_sums_to_zero():
    rep = verify_mt2_partial_sums(
        0, CHAIN, {0: Fraction(0)}, {0: Fraction(1, 4)}, max_vertices=4
    )
    assert rep["pass"]
    assert rep["partial_sum_exact"] == "0"


def test_compatibility_equals_existential_definition_sample():
    # small pre-run of the exhaustive acceptance sweep
    rng = random.Random(31)
    checked = 0
    for csp in TINY_FAMILY[2:5]:
        digraphs = [
            g
            for g in enumerate_all_witnesses(csp, 3)
            if all(r < 3 for _, r in required_cells(g, csp))
        ]
        for g in rng.sample(digraphs, min(8, len(digraphs))):
            for table in some_tables(csp, 3, 2, seed=rng.randint(0, 99)):
                assert compatibility_check(g, csp, table) == \
                    realizable_by_sequence(g, csp, table)
                checked += 1
    assert checked >= 40


def test_always_violated_vertices_are_always_compatible():
    csp = make_csp(2, [((0, 1), AlwaysViolated())])
    g = witness_from_levels([{0}, {0}], csp)
    for table in some_tables(csp, 3, 3, seed=8):
        assert compatibility_check(g, csp, table)
    rep = verify_mt1_exact(g, csp, depth=3)
    assert rep["pass"] and rep["lhs_exact"] == "1"

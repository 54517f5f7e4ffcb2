"""Witness digraphs for resampling runs, and checks of the two product bounds.

A witness digraph records which constraints fired and in what dependency
order: vertices carry constraint decorations, and between any two vertices
whose decorations share a variable (or coincide) there is exactly one edge.
Every such digraph is determined up to decorated isomorphism by its
(level, decoration) multiset, where level is longest-path depth: equal
decorations force an edge, so they sit at distinct levels, and every edge
points from lower to higher level. That fact drives both canonical forms
and the single-sink enumerator below.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .csp import (
    Csp,
    build_dependency_graph,
    closed_neighborhood,
    materialize_cap_default,
    prob_bad,
)
from .errors import (
    CapExceededError,
    DepthExceededError,
    HypothesisError,
    InvalidInputError,
    InvalidParameterError,
)
from .exact import binomial_sigma, float_of, format_rational
from .moser_tardos import MtSequence, _check_step_disjoint
from .tables import Table, derive_u64, sample_label, weight_thresholds


@dataclass(frozen=True)
class WitnessDigraph:
    decorations: tuple[int, ...]
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        n = len(self.decorations)
        for a, b in self.edges:
            if not (0 <= a < n and 0 <= b < n):
                raise InvalidInputError(f"edge ({a},{b}) references missing vertex")
            if a == b:
                raise InvalidInputError(f"self-loop at vertex {a}")

    @property
    def n(self) -> int:
        return len(self.decorations)

    def in_neighbors(self, x: int) -> list[int]:
        return [a for a, b in self.edges if b == x]

    def out_neighbors(self, x: int) -> list[int]:
        return [b for a, b in self.edges if a == x]

    def sinks(self) -> list[int]:
        heads = {a for a, _ in self.edges}
        return [x for x in range(self.n) if x not in heads]

    def to_json(self) -> dict:
        return {
            "vertices": [
                {"id": i, "constraint": c} for i, c in enumerate(self.decorations)
            ],
            "edges": [[a, b] for a, b in sorted(self.edges)],
        }


def witness_from_json(obj) -> WitnessDigraph:
    try:
        verts = sorted(obj["vertices"], key=lambda r: int(r["id"]))
        if [int(r["id"]) for r in verts] != list(range(len(verts))):
            raise InvalidInputError("vertex ids must be 0..n-1")
        decorations = tuple(int(r["constraint"]) for r in verts)
        edges = frozenset((int(a), int(b)) for a, b in obj["edges"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed witness JSON: {exc}") from exc
    return WitnessDigraph(decorations, edges)


def _topological_levels(g: WitnessDigraph) -> list[int] | None:
    """Longest-path level per vertex, or None if the digraph has a cycle."""
    indeg = [0] * g.n
    for _, b in g.edges:
        indeg[b] += 1
    level = [0] * g.n
    queue = [x for x in range(g.n) if indeg[x] == 0]
    seen = 0
    while queue:
        x = queue.pop()
        seen += 1
        for a, b in g.edges:
            if a == x:
                level[b] = max(level[b], level[x] + 1)
                indeg[b] -= 1
                if indeg[b] == 0:
                    queue.append(b)
    return level if seen == g.n else None


def full_witness_digraph(seq: MtSequence, csp: Csp) -> WitnessDigraph:
    """Digraph on (step, constraint) firings, edges along shared variables.

    Vertices are ordered lexicographically by (step, constraint id).
    Raises InvalidInputError if some step repeats a variable.
    """
    dep = build_dependency_graph(csp)
    tags: list[tuple[int, int]] = []
    for n, step in enumerate(seq.steps):
        if not _check_step_disjoint(csp, step):
            raise InvalidInputError(f"step {n} is not domain-disjoint")
        tags.extend((n, cid) for cid in sorted(step))
    edges = set()
    for i, (n1, c1) in enumerate(tags):
        for j, (n2, c2) in enumerate(tags):
            if n1 < n2 and c1 in closed_neighborhood(dep, c2):
                edges.add((i, j))
    return WitnessDigraph(tuple(c for _, c in tags), frozenset(edges))


def validate_witness(g: WitnessDigraph, csp: Csp) -> bool:
    """Acyclic, and an edge joins x,y exactly when decorations interact."""
    if _topological_levels(g) is None:
        return False
    dep = build_dependency_graph(csp)
    for x in range(g.n):
        for y in range(x + 1, g.n):
            forward = (x, y) in g.edges
            backward = (y, x) in g.edges
            adjacent = g.decorations[x] in closed_neighborhood(dep, g.decorations[y])
            if adjacent != (forward != backward) or (forward and backward):
                return False
    return True


def canonical_form(g: WitnessDigraph) -> tuple[tuple[int, int], ...]:
    """Sorted (level, decoration) pairs; equal forms mean isomorphic.

    Valid for witness digraphs only, where the pair list pins the digraph
    down completely (see the module docstring).
    """
    levels = _topological_levels(g)
    if levels is None:
        raise InvalidInputError("digraph has a directed cycle")
    return tuple(sorted(zip(levels, g.decorations)))


def witness_from_levels(level_sets, csp: Csp) -> WitnessDigraph:
    """Build the unique witness digraph whose level sets are as given."""
    dep = build_dependency_graph(csp)
    tags = [
        (lvl, cid) for lvl, group in enumerate(level_sets) for cid in sorted(group)
    ]
    edges = set()
    for i, (l1, c1) in enumerate(tags):
        for j, (l2, c2) in enumerate(tags):
            if l1 < l2 and c1 in closed_neighborhood(dep, c2):
                edges.add((i, j))
    return WitnessDigraph(tuple(c for _, c in tags), frozenset(edges))


def is_isomorphic(g1: WitnessDigraph, g2: WitnessDigraph) -> bool:
    """Decoration-preserving digraph isomorphism by backtracking.

    Exponential in general; intended for cross-checks at tiny sizes.
    """
    if g1.n != g2.n or sorted(g1.decorations) != sorted(g2.decorations):
        return False

    def extend(mapping: dict[int, int], used: set[int]) -> bool:
        if len(mapping) == g1.n:
            return True
        x = len(mapping)
        for y in range(g2.n):
            if y in used or g2.decorations[y] != g1.decorations[x]:
                continue
            ok = True
            for a, fa in mapping.items():
                if ((a, x) in g1.edges) != ((fa, y) in g2.edges):
                    ok = False
                    break
                if ((x, a) in g1.edges) != ((y, fa) in g2.edges):
                    ok = False
                    break
            if ok and extend({**mapping, x: y}, used | {y}):
                return True
        return False

    return extend({}, set())


def in_level_counts(g: WitnessDigraph, csp: Csp, x: int) -> dict[int, int]:
    """For each variable of x's constraint: in-neighbors whose domain has it."""
    counts = {v: 0 for v in csp.constraint(g.decorations[x]).domain}
    for y in g.in_neighbors(x):
        for v in csp.constraint(g.decorations[y]).domain:
            if v in counts:
                counts[v] += 1
    return counts


def required_cells(g: WitnessDigraph, csp: Csp) -> list[tuple[int, int]]:
    """Table cells the compatibility criterion reads; disjoint across vertices."""
    cells = set()
    for x in range(g.n):
        for v, k in in_level_counts(g, csp, x).items():
            cells.add((v, k))
    return sorted(cells)


def _compatible_on_cells(g: WitnessDigraph, csp: Csp, cell) -> bool:
    for x in range(g.n):
        constraint = csp.constraint(g.decorations[x])
        counts = in_level_counts(g, csp, x)
        row = tuple(cell(v, counts[v]) for v in constraint.domain)
        if not constraint.bad_contains(row):
            return False
    return True


def compatibility_check(g: WitnessDigraph, csp: Csp, table: Table) -> bool:
    """Whether some consistent run realizes g, decided by level counting.

    Vertex x needs row k(x,v) of variable v, where k(x,v) counts x's
    in-neighbors whose constraint contains v; g is realizable over the
    table iff every vertex's looked-up row lands in its bad set.
    Raises DepthExceededError when a needed row is past the table depth.
    """
    return _compatible_on_cells(g, csp, table.get)


def verify_mt1_exact(
    g: WitnessDigraph, csp: Csp, depth: int, cap: int | None = None
) -> dict:
    """Exact compatibility probability versus the product of bad masses."""
    if cap is None:
        cap = materialize_cap_default()
    cells = required_cells(g, csp)
    for _, row in cells:
        if row >= depth:
            raise DepthExceededError(f"needed row {row} is past depth {depth}")
    k = csp.label_count
    if k ** len(cells) > cap:
        raise CapExceededError(
            f"{k}**{len(cells)} cell assignments exceed cap {cap}"
        )
    lhs = Fraction(0)
    assignment = {}

    def fill(i: int, mass: Fraction):
        nonlocal lhs
        if i == len(cells):
            if _compatible_on_cells(g, csp, lambda v, r: assignment[(v, r)]):
                lhs += mass
            return
        for label in range(k):
            assignment[cells[i]] = label
            fill(i + 1, mass * csp.weights[label])
        del assignment[cells[i]]

    fill(0, Fraction(1))
    rhs = Fraction(1)
    for cid in g.decorations:
        rhs *= prob_bad(csp, cid, cap)
    return {
        "mode": "exact",
        "lhs": float_of(lhs),
        "rhs": float_of(rhs),
        "lhs_exact": format_rational(lhs),
        "rhs_exact": format_rational(rhs),
        "cells": len(cells),
        "pass": lhs == rhs,
    }


def verify_mt1_monte_carlo(
    g: WitnessDigraph, csp: Csp, trials: int, seed: int, depth: int
) -> dict:
    """Empirical compatibility frequency, pass band 4 binomial sigmas."""
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    cells = required_cells(g, csp)
    for _, row in cells:
        if row >= depth:
            raise DepthExceededError(f"needed row {row} is past depth {depth}")
    thresholds = weight_thresholds(csp.weights)
    hits = 0
    for trial in range(trials):
        def cell(v, r, t=trial):
            return sample_label(thresholds, derive_u64(seed, t, v, r))

        if _compatible_on_cells(g, csp, cell):
            hits += 1
    rhs = Fraction(1)
    for cid in g.decorations:
        rhs *= prob_bad(csp, cid, materialize_cap_default())
    lhs = hits / trials
    tolerance = 4 * binomial_sigma(rhs, trials)
    return {
        "mode": "monte_carlo",
        "trials": trials,
        "seed": seed,
        "lhs": lhs,
        "rhs": float_of(rhs),
        "rhs_exact": format_rational(rhs),
        "tolerance": tolerance,
        "pass": abs(lhs - float_of(rhs)) <= tolerance,
    }


def verify_mt1(g: WitnessDigraph, csp: Csp, mode: str, **kw) -> dict:
    if mode == "exact":
        return verify_mt1_exact(g, csp, kw["depth"], kw.get("cap"))
    if mode == "monte_carlo":
        return verify_mt1_monte_carlo(g, csp, kw["trials"], kw["seed"], kw["depth"])
    raise InvalidParameterError(f"unknown mode {mode!r}")


def enumerate_sink_star(
    c: int, csp: Csp, max_vertices: int, cap: int = 100_000
) -> list[WitnessDigraph]:
    """All single-sink witness digraphs with sink decoration c, up to iso.

    Grows level stacks downward from the top level {c}. A stack is valid
    when each level is domain-disjoint, each non-bottom vertex has a
    neighbor directly below (so levels are longest-path levels) and each
    non-top vertex has a neighbor somewhere above (so the sink is unique).
    Distinct stacks are automatically non-isomorphic.
    Raises CapExceededError past `cap` representatives.
    """
    if max_vertices < 1:
        raise InvalidParameterError("max_vertices must be >= 1")
    dep = build_dependency_graph(csp)
    neighborhoods = {
        a.id: closed_neighborhood(dep, a.id) for a in csp.constraints
    }
    results: list[tuple[tuple[int, ...], ...]] = []

    def independent_subsets(pool: list[int]):
        """Nonempty subsets of pool with pairwise non-adjacent members."""
        subsets: list[tuple[int, ...]] = []

        def grow(start: int, chosen: tuple[int, ...]):
            for i in range(start, len(pool)):
                cid = pool[i]
                if any(cid in neighborhoods[other] for other in chosen):
                    continue
                picked = chosen + (cid,)
                subsets.append(picked)
                grow(i + 1, picked)

        grow(0, ())
        return subsets

    def extend_down(stack: tuple[tuple[int, ...], ...], size: int):
        results.append(stack)
        if len(results) > cap:
            raise CapExceededError(f"more than {cap} representatives")
        room = max_vertices - size
        if room == 0:
            return
        above = {cid for level in stack for cid in level}
        pool = sorted(
            a.id
            for a in csp.constraints
            if neighborhoods[a.id].intersection(above)
        )
        bottom = stack[0]
        for new_level in independent_subsets(pool):
            if len(new_level) > room:
                continue
            if all(
                any(a in neighborhoods[b] for a in new_level) for b in bottom
            ):
                extend_down((new_level,) + stack, size + len(new_level))

    extend_down(((c,),), 1)
    results.sort(key=lambda stack: (sum(len(s) for s in stack), stack))
    return [witness_from_levels(stack, csp) for stack in results]


def verify_mt2_partial_sums(
    c: int,
    csp: Csp,
    alpha: dict[int, Fraction],
    beta: dict[int, Fraction],
    max_vertices: int,
    cap: int = 100_000,
) -> dict:
    """Partial sums of the single-sink series against beta/(1-beta).

    Requires alpha, beta in [0,1) and, for every constraint a,
    alpha(a) <= beta(a) * prod over neighbors a' of (1 - beta(a')).
    The series is monotone, so every partial sum must already obey the
    bound; raises HypothesisError listing constraints that break the
    premise.
    """
    dep = build_dependency_graph(csp)
    offenders = []
    for a in csp.constraints:
        av, bv = Fraction(alpha[a.id]), Fraction(beta[a.id])
        if not (0 <= av < 1 and 0 <= bv < 1):
            raise InvalidParameterError(
                f"alpha/beta of constraint {a.id} outside [0,1)"
            )
        allowed = bv
        for other in sorted(dep.adjacency[a.id]):
            allowed *= 1 - Fraction(beta[other])
        if av > allowed:
            offenders.append(a.id)
    if offenders:
        raise HypothesisError(
            "alpha exceeds beta times the neighbor slack", failed=offenders
        )
    digraphs = enumerate_sink_star(c, csp, max_vertices, cap)
    partial = Fraction(0)
    for g in digraphs:
        term = Fraction(1)
        for cid in g.decorations:
            term *= Fraction(alpha[cid])
        partial += term
    bc = Fraction(beta[c])
    bound = bc / (1 - bc)
    return {
        "constraint": c,
        "max_vertices": max_vertices,
        "digraphs": len(digraphs),
        "partial_sum": float_of(partial),
        "partial_sum_exact": format_rational(partial),
        "bound": float_of(bound),
        "bound_exact": format_rational(bound),
        "pass": partial <= bound,
    }

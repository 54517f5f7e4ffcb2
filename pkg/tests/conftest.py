"""Shared builders and brute-force oracles.

Everything in here is deliberately naive. The oracles re-derive answers
straight from the definitions (enumerate sequences, enumerate ordered
partitions, walk every branch) so the clever implementations have
something independent to disagree with. Keep them slow and obvious; do
not "fix" them by importing the code under test beyond plain data types
and the replay primitives they are checking against.
"""

from __future__ import annotations

import random
from collections import Counter
from fractions import Fraction

from llltool.errors import DepthExceededError
from llltool.csp import (
    BadPredicate,
    Constraint,
    Csp,
    build_dependency_graph,
    uniform_weights,
    violates,
)
from llltool.graphs import ball
from llltool.local_goodness import local_csp
from llltool.moser_tardos import MtSequence, check_consistency
from llltool.tables import Table, sample_table
from llltool.witness import full_witness_digraph, is_isomorphic, witness_from_levels


def make_csp(n_vars, specs, k=2, weights=None):
    """Build a problem from (domain, bad) pairs.

    `bad` may be an iterable of label rows or a BadPredicate instance.
    """
    constraints = []
    for cid, (domain, bad) in enumerate(specs):
        if not isinstance(bad, BadPredicate):
            bad = frozenset(tuple(row) for row in bad)
        constraints.append(Constraint(cid, tuple(domain), bad))
    if weights is None:
        weights = uniform_weights(k)
    return Csp(tuple(range(n_vars)), k, tuple(weights), tuple(constraints))


# A fixed family of tiny problems: at most 3 constraints, 2 labels,
# domains of size <= 2. Exhaustive checks quantify over all of these.
TINY_FAMILY = [
    make_csp(1, [((0,), [(1,)])]),
    make_csp(2, [((0, 1), [(0, 0), (1, 1)])]),
    make_csp(3, [((0, 1), [(0, 0)]), ((1, 2), [(1, 1)])]),
    make_csp(2, [((0,), [(0,)]), ((1,), [(1,)])]),
    make_csp(4, [((0, 1), [(0, 0)]), ((1, 2), [(1, 0)]),
                 ((2, 3), [(0, 0), (1, 1)])]),
    make_csp(3, [((0, 1), [(1, 1)]), ((1, 2), []), ((0, 2), [(0, 1)])]),
    make_csp(3, [((0, 1), [(0, 1)]), ((1, 2), [(0, 0), (1, 1)])],
             weights=(Fraction(1, 4), Fraction(3, 4))),
    make_csp(1, [((0,), [(0,), (1,)])]),
    make_csp(1, [((), [()]), ((0,), [(1,)])]),
]


def all_tables(csp, depth):
    """Every table over the problem's variables, all label combinations."""
    n = len(csp.variables)
    k = csp.label_count
    cells = n * depth
    for code in range(k ** cells):
        columns = {}
        rest = code
        for v in csp.variables:
            col = []
            for _ in range(depth):
                col.append(rest % k)
                rest //= k
            columns[v] = tuple(col)
        yield Table(depth, columns)


def some_tables(csp, depth, count, seed):
    return [
        sample_table(csp.weights, csp.variables, depth, seed, trial)
        for trial in range(count)
    ]


def independent_subsets(dep, pool, nonempty=True):
    """All pairwise non-adjacent subsets of pool (ids, any iterable)."""
    items = sorted(pool)
    found = []

    def extend(i, current):
        if i == len(items):
            if current or not nonempty:
                found.append(frozenset(current))
            return
        extend(i + 1, current)
        a = items[i]
        if all(a not in dep.adjacency[b] for b in current):
            current.append(a)
            extend(i + 1, current)
            current.pop()

    extend(0, [])
    return found


def maximal_independent_subsets(dep, pool):
    pool_set = set(pool)
    result = []
    for s in independent_subsets(dep, pool):
        if all(
            any(a in dep.adjacency[b] for b in s)
            for a in pool_set - s
        ):
            result.append(s)
    return result


def enumerate_all_witnesses(csp, max_vertices):
    """Every witness digraph with at most max_vertices, one per iso class.

    Works level by level: each level is a non-adjacent set of constraint
    ids, and every vertex above level 0 must interact with something on
    the level directly below (that is what makes the level numbers the
    longest-path levels). Distinct level sequences give non-isomorphic
    digraphs, so no dedup pass is needed.
    """
    dep = build_dependency_graph(csp)
    closed = {
        c.id: {c.id} | set(dep.adjacency[c.id]) for c in csp.constraints
    }
    pool = independent_subsets(dep, [c.id for c in csp.constraints])
    out = [witness_from_levels([], csp)]

    def extend(levels, total):
        if levels:
            out.append(witness_from_levels(levels, csp))
        for s in pool:
            if total + len(s) > max_vertices:
                continue
            if levels and not all(
                any(y in closed[x] for y in levels[-1]) for x in s
            ):
                continue
            extend(levels + [s], total + len(s))

    extend([], 0)
    return out


def realizable_by_sequence(g, csp, table):
    """Does some consistent run realize g? Decided by raw enumeration.

    Tries every ordered partition of g's decoration multiset into
    non-adjacent steps, replays each against the table, and compares the
    resulting digraph up to isomorphism. Exponential, fine at <= 4
    vertices.
    """
    dep = build_dependency_graph(csp)
    remaining = Counter(g.decorations)

    def attempt(steps):
        if not +remaining:
            seq = MtSequence(tuple(steps))
            try:
                consistent = check_consistency(csp, table, seq)
            except DepthExceededError:
                return False
            if consistent:
                return is_isomorphic(full_witness_digraph(seq, csp), g)
            return False
        for step in independent_subsets(dep, [c for c in remaining if remaining[c] > 0]):
            for cid in step:
                remaining[cid] -= 1
            if attempt(steps + [step]):
                for cid in step:
                    remaining[cid] += 1
                return True
            for cid in step:
                remaining[cid] += 1
        return False

    return attempt([])


def naive_locally_bad(csp, table, c, R, N, eps):
    """Existence of a Folner run near c, straight from the definition.

    For each radius r below R, explores every firing-count vector
    reachable by steps that are arbitrary non-adjacent sets of violated
    constraints of the radius-r localization, anywhere in the problem.
    No singleton serialization, no ball restriction on the search.
    """
    dep = build_dependency_graph(csp)
    for r in range(R):
        if _folner_reachable(local_csp(csp, c, r), table,
                             ball(dep, c, r), N, eps, dep):
            return True
    return False


def _folner_reachable(local, table, inside, N, eps, dep):
    ids = [a.id for a in local.constraints]
    depth = table.depth
    # Firing an always-violated constraint with no variables outside the
    # ball only inflates the outside count, so such firings are capped
    # away; inside the ball they are capped at N, past which the Folner
    # test cannot improve.
    caps = {}
    for a in local.constraints:
        if a.domain:
            caps[a.id] = depth * len(a.domain)
        else:
            caps[a.id] = N if a.id in inside else 0
    start = tuple(0 for _ in ids)
    seen = {start}
    stack = [start]
    while stack:
        counts = stack.pop()
        by_id = dict(zip(ids, counts))
        in_total = sum(k for a, k in by_id.items() if a in inside)
        out_total = sum(k for a, k in by_id.items() if a not in inside)
        if in_total >= N and out_total < eps * (in_total + out_total):
            return True
        levels = {v: 0 for v in local.variables}
        for a, k in by_id.items():
            for v in local.constraint(a).domain:
                levels[v] += k
        fireable = []
        for a in ids:
            if by_id[a] >= caps[a]:
                continue
            dom = local.constraint(a).domain
            if any(levels[v] >= depth for v in dom):
                continue
            row = tuple(table.get(v, levels[v]) for v in dom)
            if local.constraint(a).bad_contains(row):
                fireable.append(a)
        for step in independent_subsets(dep, fireable):
            nxt = tuple(
                by_id[a] + (1 if a in step else 0) for a in ids
            )
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def all_maximal_run_statuses(csp, table):
    """Each status some maximal-choice resampling run can end with.

    Branches over every inclusion-maximal non-adjacent subset of the
    violated constraints at every step, mirroring the depth bookkeeping
    of the real runner. Recursion is memoized on the level vector, which
    fixes all future behavior.
    """
    dep = build_dependency_graph(csp)
    order = list(csp.variables)
    statuses = set()
    visited = set()

    def walk(levels):
        key = tuple(levels[v] for v in order)
        if key in visited:
            return
        visited.add(key)
        labeling = {v: table.get(v, levels[v]) for v in order}
        viol = [a.id for a in csp.constraints if violates(csp, a.id, labeling)]
        if not viol:
            statuses.add("completed")
            return
        for m in maximal_independent_subsets(dep, viol):
            touched = [v for cid in m for v in csp.constraint(cid).domain]
            if any(levels[v] + 1 >= table.depth for v in touched):
                statuses.add("depth_exhausted")
                continue
            nxt = dict(levels)
            for v in touched:
                nxt[v] += 1
            walk(nxt)

    walk({v: 0 for v in order})
    return statuses


def random_tiny_csp(rng: random.Random, max_bad_rows=2, allow_empty_bad=True):
    """A small random problem: <= 3 constraints, 2 labels, domains <= 2."""
    n_vars = rng.randint(2, 4)
    n_cons = rng.randint(1, 3)
    specs = []
    for _ in range(n_cons):
        size = rng.randint(1, 2)
        domain = tuple(sorted(rng.sample(range(n_vars), size)))
        rows = [
            tuple(rng.randint(0, 1) for _ in domain)
            for _ in range(rng.randint(0 if allow_empty_bad else 1, max_bad_rows))
        ]
        specs.append((domain, set(rows)))
    return make_csp(n_vars, specs)


def sequences_upto(csp, max_total):
    """All step sequences with nonempty non-adjacent steps, any validity.

    Quantifies over candidate scripts, not over consistent ones; the
    point is to feed both consistent and inconsistent inputs to the
    replay equivalence checks.
    """
    dep = build_dependency_graph(csp)
    steps = independent_subsets(dep, [c.id for c in csp.constraints])
    out = []

    def extend(prefix, total):
        out.append(MtSequence(tuple(prefix)))
        for s in steps:
            if total + len(s) <= max_total:
                extend(prefix + [s], total + len(s))

    extend([], 0)
    return out

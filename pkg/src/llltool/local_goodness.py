"""Localized problems, Folner firing patterns, and locally-good tables.

The localized problem keeps a constraint's bad set only inside a radius-r
dependency ball around a center c; everything farther away becomes
always-violated. A table is locally good at c when, for every radius
r < R, no consistent firing sequence concentrates at least N firings
inside the r-ball while keeping strictly less than an eps fraction of all
firings outside it.

The search for such a sequence only needs sequences confined to the
R-ball: stripping out-of-ball firings preserves consistency (their
domains cannot touch the r-ball) and only improves the outside fraction.
Within the ball it is enough to fire one constraint per step, since a
domain-disjoint step can be serialized without changing any counts, and
both the consistency guard and the accept test depend only on per-
constraint firing counts. That turns the search into reachability over
count vectors, which is finite: a constraint with a nonempty domain can
fire at most table-depth times.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .csp import (
    AlwaysViolated,
    BadPredicate,
    Constraint,
    Csp,
    build_dependency_graph,
    materialize_cap_default,
    prob_bad,
)
from .errors import (
    CapExceededError,
    HypothesisError,
    InvalidParameterError,
    SearchBudgetError,
)
from .exact import (
    binomial_sigma,
    e_interval,
    float_of,
    format_rational,
    rational_pow_leq,
)
from .graphs import FiniteGraph, ball, graph_from_edges
from .moser_tardos import MtSequence
from .tables import Table, sample_table

DEFAULT_SEARCH_BUDGET = 200_000


@dataclass(frozen=True)
class LocalParams:
    c: int
    R: int
    N: int
    eps: Fraction
    eta: Fraction = Fraction(1, 2)

    def __post_init__(self):
        if self.R < 0:
            raise InvalidParameterError("R must be >= 0")
        if self.N < 1:
            raise InvalidParameterError("N must be >= 1")
        if not 0 < self.eps < 1:
            raise InvalidParameterError("eps must lie in (0,1)")
        if not 0 < self.eta < 1:
            raise InvalidParameterError("eta must lie in (0,1)")


@dataclass
class FolnerSearchState:
    """Bookkeeping for one node of the count-vector search."""

    prefix: tuple[int, ...]
    counts: dict[int, int]
    in_total: int
    out_total: int
    levels: dict[int, int]


def local_csp(csp: Csp, c: int, r: int) -> Csp:
    """Replace bad sets outside the radius-r ball around c with everything."""
    dep = build_dependency_graph(csp)
    keep = ball(dep, c, r)
    constraints = []
    for a in csp.constraints:
        if a.id in keep:
            constraints.append(a)
        else:
            constraints.append(Constraint(a.id, a.domain, AlwaysViolated()))
    return Csp(csp.variables, csp.label_count, csp.weights, tuple(constraints))


def folner_totals(
    seq: MtSequence, csp: Csp, c: int, r: int
) -> tuple[int, int]:
    dep = build_dependency_graph(csp)
    inside = ball(dep, c, r)
    in_total = sum(len(step & inside) for step in seq.steps)
    out_total = sum(len(step - inside) for step in seq.steps)
    return in_total, out_total


def is_folner(
    seq: MtSequence, csp: Csp, c: int, r: int, N: int, eps: Fraction
) -> bool:
    """At least N firings in the r-ball, outside share strictly below eps."""
    in_total, out_total = folner_totals(seq, csp, c, r)
    return in_total >= N and out_total < eps * (in_total + out_total)


def _folner_search(
    csp: Csp,
    table: Table,
    c: int,
    r: int,
    R: int,
    N: int,
    eps: Fraction,
    budget: int,
) -> tuple[MtSequence | None, int]:
    """First Folner count vector reachable by consistent singleton firings.

    Returns (witness, nodes visited); witness None when none exists.
    Raises SearchBudgetError past `budget` visited count vectors.
    """
    dep = build_dependency_graph(csp)
    ball_r = ball(dep, c, r)
    ball_R = ball(dep, c, R)
    # In-ball constraints first, ids ascending, then the outer shell.
    order = sorted(ball_r) + sorted(ball_R - ball_r)
    depth = table.depth
    center = csp.constraint(c)
    if not center.domain:
        if center.bad_contains(()):
            return MtSequence(tuple(frozenset({c}) for _ in range(N))), 1
        return None, 1

    visited: set[tuple[int, ...]] = set()
    state = FolnerSearchState(
        prefix=(),
        counts={a: 0 for a in order},
        in_total=0,
        out_total=0,
        levels={v: 0 for a in order for v in csp.constraint(a).domain},
    )

    def key() -> tuple[int, ...]:
        return tuple(state.counts[a] for a in order)

    def accepted() -> bool:
        total = state.in_total + state.out_total
        return state.in_total >= N and state.out_total < eps * total

    def fire_ok(a: int) -> bool:
        dom = csp.constraint(a).domain
        if any(state.levels[v] >= depth for v in dom):
            return False
        if a not in ball_r:
            return True  # localized bad set is everything
        row = tuple(table.get(v, state.levels[v]) for v in dom)
        return csp.constraint(a).bad_contains(row)

    def dfs() -> MtSequence | None:
        k = key()
        if k in visited:
            return None
        visited.add(k)
        if len(visited) > budget:
            raise SearchBudgetError(
                f"search exceeded {budget} count vectors at c={c}, r={r}"
            )
        if accepted():
            return MtSequence(tuple(frozenset({a}) for a in state.prefix))
        for a in order:
            if not fire_ok(a):
                continue
            dom = csp.constraint(a).domain
            state.prefix += (a,)
            state.counts[a] += 1
            if a in ball_r:
                state.in_total += 1
            else:
                state.out_total += 1
            for v in dom:
                state.levels[v] += 1
            found = dfs()
            if found is not None:
                return found
            state.prefix = state.prefix[:-1]
            state.counts[a] -= 1
            if a in ball_r:
                state.in_total -= 1
            else:
                state.out_total -= 1
            for v in dom:
                state.levels[v] -= 1
        return None

    return dfs(), len(visited)


def is_locally_good(
    csp: Csp,
    table: Table,
    params: LocalParams,
    budget: int = DEFAULT_SEARCH_BUDGET,
) -> tuple[bool, MtSequence | None]:
    """Whether no radius below R admits a consistent Folner sequence.

    Returns (True, None) or (False, witness); the witness fires one
    constraint per step and is consistent with the localized problem at
    its radius. Raises SearchBudgetError instead of guessing when the
    search is cut off.
    """
    csp.constraint(params.c)
    for r in range(params.R):
        witness, _ = _folner_search(
            csp, table, params.c, r, params.R, params.N, params.eps, budget
        )
        if witness is not None:
            return False, witness
    return True, None


def extended_domain(csp: Csp, dep: FiniteGraph, c: int, radius: int) -> tuple[int, ...]:
    out: set[int] = set()
    for a in ball(dep, c, radius):
        out.update(csp.constraint(a).domain)
    return tuple(sorted(out))


def encode_column(column, k: int) -> int:
    """Pack a label column into one integer, row 0 least significant."""
    code = 0
    for row, lab in enumerate(column):
        if not 0 <= lab < k:
            raise InvalidParameterError(f"label {lab} out of range")
        code += lab * k**row
    return code


def decode_column(code: int, k: int, depth: int) -> tuple[int, ...]:
    if code < 0 or code >= k**depth:
        raise InvalidParameterError(f"column code {code} out of range")
    out = []
    for _ in range(depth):
        out.append(code % k)
        code //= k
    return tuple(out)


class LBadPredicate(BadPredicate):
    """Column assignments on dom_R(c) under which c is not locally good.

    Membership rebuilds a depth-deep table on exactly dom_R(c); by
    locality no other column can influence the verdict, so the zero
    columns a caller might imagine elsewhere never need representing.
    """

    tag = "lbad"

    def __init__(self, base: Csp, params: LocalParams, depth: int, domain, budget: int):
        self.base = base
        self.params = params
        self.depth = depth
        self.domain = tuple(domain)
        self.budget = budget

    def contains(self, row: tuple[int, ...]) -> bool:
        columns = {
            v: decode_column(code, self.base.label_count, self.depth)
            for v, code in zip(self.domain, row)
        }
        good, _ = is_locally_good(
            self.base, Table(self.depth, columns), self.params, self.budget
        )
        return not good


def column_weights(weights: tuple[Fraction, ...], depth: int) -> tuple[Fraction, ...]:
    """Product measure over columns, indexed by encode_column order."""
    k = len(weights)
    out = []
    for code in range(k**depth):
        mass = Fraction(1)
        for lab in decode_column(code, k, depth):
            mass *= weights[lab]
        out.append(mass)
    return tuple(out)


def build_lg_csp(
    csp: Csp,
    R: int,
    N: int,
    eps: Fraction,
    depth: int,
    budget: int = DEFAULT_SEARCH_BUDGET,
    cap: int | None = None,
) -> Csp:
    """Meta-problem over depth-deep columns: solutions are the good tables.

    Constraint c watches dom_R(c), the union of domains across the R-ball,
    and forbids exactly the column assignments failing is_locally_good at
    c. Bad sets stay predicate-backed; materializing them is the caller's
    (capped) choice.
    """
    if depth < 1:
        raise InvalidParameterError("depth must be >= 1")
    cap = materialize_cap_default() if cap is None else cap
    if csp.label_count**depth > cap:
        raise CapExceededError(
            f"{csp.label_count}**{depth} column labels exceed cap {cap}"
        )
    dep = build_dependency_graph(csp)
    constraints = []
    for a in csp.constraints:
        dom_r = extended_domain(csp, dep, a.id, R)
        params = LocalParams(a.id, R, N, eps)
        constraints.append(
            Constraint(a.id, dom_r, LBadPredicate(csp, params, depth, dom_r, budget))
        )
    return Csp(
        csp.variables,
        csp.label_count**depth,
        column_weights(csp.weights, depth),
        tuple(constraints),
    )


def gamma_at_radius(dep: FiniteGraph, radius: int) -> int:
    """Largest dependency ball at the given radius (1 on empty graphs)."""
    if dep.n == 0:
        return 1
    return max(len(ball(dep, v, radius)) for v in range(dep.n))


def lg_degree_check(csp: Csp, R: int) -> dict:
    """Meta-dependency degree versus the growth margins at 2R and 2R+1.

    `bound` and `pass` use gamma(2R) - 1. That margin can be exceeded:
    two R-balls may be disjoint while domains of their boundary
    constraints still share a variable, which stretches the interaction
    range to 2R+1. The report therefore also carries the safe margin
    gamma(2R+1) - 1 (`safe_bound`, `safe_pass`).
    """
    dep = build_dependency_graph(csp)
    domains = {
        a.id: set(extended_domain(csp, dep, a.id, R)) for a in csp.constraints
    }
    m = len(csp.constraints)
    edges = [
        (i, j)
        for i in range(m)
        for j in range(i + 1, m)
        if domains[i] & domains[j]
    ]
    meta = graph_from_edges(m, edges)
    max_degree = meta.max_degree() if m else 0
    bound = gamma_at_radius(dep, 2 * R) - 1
    safe_bound = gamma_at_radius(dep, 2 * R + 1) - 1
    return {
        "R": R,
        "max_degree": max_degree,
        "bound": bound,
        "pass": max_degree <= bound,
        "safe_bound": safe_bound,
        "safe_pass": max_degree <= safe_bound,
    }


def lbad_bound(d: int, eta: Fraction, R: int, gammaR: int, N: int) -> Fraction:
    """Rational upper bound R*eta / (xi*(1-eta)*(1+eta)**N).

    Here xi = eta*(1-zeta)**gammaR with zeta = 1/(d+1) for d > 0. For
    d = 0 the reference value zeta = 1/e is irrational; substituting a
    certified rational lower endpoint of 1 - 1/e only enlarges the
    result, keeping it a valid upper bound.
    """
    if not 0 < eta < 1:
        raise InvalidParameterError("eta must lie in (0,1)")
    if d < 0 or R < 0 or N < 0 or gammaR < 1:
        raise InvalidParameterError("d, R, N must be >= 0 and gammaR >= 1")
    if d > 0:
        one_minus_zeta = 1 - Fraction(1, d + 1)
    else:
        e_low, _ = e_interval(24)
        one_minus_zeta = 1 - 1 / e_low
    xi = eta * one_minus_zeta**gammaR
    return (R * eta) / (xi * (1 - eta) * (1 + eta) ** N)


def check_lbad_hypotheses(
    p: Fraction, s: Fraction, eps: Fraction, eta: Fraction
) -> None:
    """Validate eps + 1/s < 1 and p**(1-eps-1/s) <= (1-eta)/(1+eta)."""
    if s <= 1:
        raise InvalidParameterError("s must exceed 1")
    if not 0 < eps < 1 or not 0 < eta < 1:
        raise InvalidParameterError("eps and eta must lie in (0,1)")
    gap = 1 - eps - Fraction(1) / s
    failed = []
    if gap <= 0:
        failed.append("eps + 1/s < 1")
    else:
        rhs = (1 - eta) / (1 + eta)
        if p > 0 and not rational_pow_leq(p, gap, rhs):
            failed.append("p**(1 - eps - 1/s) <= (1-eta)/(1+eta)")
    if failed:
        raise HypothesisError("probability-bound hypotheses fail", failed=failed)


def estimate_lbad_prob(
    csp: Csp,
    params: LocalParams,
    depth: int,
    trials: int,
    seed: int,
    s: Fraction,
    budget: int = DEFAULT_SEARCH_BUDGET,
) -> dict:
    """Monte Carlo frequency of bad locality at c versus the proved bound.

    Unknown verdicts (budget exhaustion) are reported and counted as bad,
    so they can only hurt the pass, never hide a failure.
    """
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    dep = build_dependency_graph(csp)
    d = dep.max_degree()
    p = max((prob_bad(csp, a.id) for a in csp.constraints), default=Fraction(0))
    check_lbad_hypotheses(p, s, params.eps, params.eta)
    gamma_r = gamma_at_radius(dep, params.R)
    bound = lbad_bound(d, params.eta, params.R, gamma_r, params.N)
    bad = 0
    unknown = 0
    for trial in range(trials):
        table = sample_table(csp.weights, csp.variables, depth, seed, trial)
        try:
            good, _ = is_locally_good(csp, table, params, budget)
        except SearchBudgetError:
            unknown += 1
            continue
        if not good:
            bad += 1
    frequency = Fraction(bad + unknown, trials)
    p_eff = min(bound, Fraction(1))
    tolerance = 4 * binomial_sigma(p_eff, trials)
    return {
        "constraint": params.c,
        "trials": trials,
        "depth": depth,
        "seed": seed,
        "bad": bad,
        "unknown": unknown,
        "frequency": float_of(frequency),
        "bound": float_of(bound),
        "bound_exact": format_rational(bound),
        "tolerance": tolerance,
        "pass": float_of(frequency) <= float_of(bound) + tolerance,
        "d": d,
        "p": format_rational(p),
        "gammaR": gamma_r,
    }


def augment_with_always_violated(csp: Csp, c: int, R: int) -> Csp:
    """Append an always-violated constraint watching dom_{R-1}(c).

    Verification scaffolding for the probability-bound argument; the new
    constraint gets the next free id.
    """
    if R < 1:
        raise InvalidParameterError("R must be >= 1")
    dep = build_dependency_graph(csp)
    dom = extended_domain(csp, dep, c, R - 1)
    extra = Constraint(len(csp.constraints), dom, AlwaysViolated())
    return Csp(
        csp.variables,
        csp.label_count,
        csp.weights,
        csp.constraints + (extra,),
    )

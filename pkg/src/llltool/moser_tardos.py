"""Depth-truncated (maximal) Moser-Tardos execution over a fixed table.

The resampling loop never draws fresh randomness: variable v read at level n
always yields table row n. A run therefore is a pure function of
(csp, table, strategy), and any run is summarized by the sequence of fired
constraint sets, which `check_consistency` can replay against the table.
"""

from __future__ import annotations

import random
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .csp import Csp, build_dependency_graph, violates
from .errors import InvalidInputError, InvalidParameterError, ScriptError
from .graphs import maximal_independent_set
from .tables import Table, derive_u64, sample_table

COMPLETED = "completed"
DEPTH_EXHAUSTED = "depth_exhausted"
ITERATION_CAP = "iteration_cap"


@dataclass(frozen=True)
class MtSequence:
    """Finite list of constraint-id sets, one per resampling step."""

    steps: tuple[frozenset[int], ...]

    @staticmethod
    def from_lists(lists) -> "MtSequence":
        return MtSequence(tuple(frozenset(int(c) for c in step) for step in lists))

    def total_size(self) -> int:
        return sum(len(s) for s in self.steps)

    def to_json(self) -> list[list[int]]:
        return [sorted(s) for s in self.steps]


def _check_step_disjoint(csp: Csp, step: frozenset[int]) -> bool:
    seen: set[int] = set()
    for cid in step:
        dom = csp.constraint(cid).domain
        if seen.intersection(dom):
            return False
        seen.update(dom)
    return True


@dataclass(frozen=True)
class Strategy:
    kind: str
    seed: int = 0
    script: MtSequence | None = None


MAXIMAL_GREEDY = Strategy("maximal_greedy")
FIRST_SINGLETON = Strategy("first_singleton")


def random_strategy(seed: int) -> Strategy:
    return Strategy("random", seed=seed)


def scripted_strategy(seq: MtSequence) -> Strategy:
    return Strategy("scripted", script=seq)


@dataclass(frozen=True)
class IterationRecord:
    levels: dict[int, int]
    labeling: dict[int, int]
    violated: tuple[int, ...]
    fired: frozenset[int]


@dataclass
class RunTrace:
    status: str
    iterations: list[IterationRecord]
    final_labeling: dict[int, int]
    final_levels: dict[int, int]

    def sequence(self) -> MtSequence:
        return MtSequence(
            tuple(rec.fired for rec in self.iterations if rec.fired)
        )

    def total_resamples(self) -> int:
        return sum(len(rec.fired) for rec in self.iterations)

    def firing_counts(self) -> Counter:
        counts: Counter = Counter()
        for rec in self.iterations:
            counts.update(rec.fired)
        return counts


def _choose(strategy: Strategy, violated, dep, rng, step_index: int):
    if strategy.kind == "first_singleton":
        return frozenset({violated[0]})
    if strategy.kind == "maximal_greedy":
        return frozenset(maximal_independent_set(dep, violated))
    if strategy.kind == "random":
        # Random permutation, then greedy: a random maximal independent set.
        order = list(violated)
        rng.shuffle(order)
        chosen: list[int] = []
        taken: set[int] = set()
        for cid in order:
            if taken.isdisjoint(dep.adjacency[cid]) and cid not in taken:
                chosen.append(cid)
                taken.add(cid)
        return frozenset(chosen)
    if strategy.kind == "scripted":
        assert strategy.script is not None
        if step_index >= len(strategy.script.steps):
            return None
        return strategy.script.steps[step_index]
    raise InvalidParameterError(f"unknown strategy kind {strategy.kind!r}")


def mta_run(
    csp: Csp,
    table: Table,
    strategy: Strategy = MAXIMAL_GREEDY,
    max_iters: int | None = None,
) -> RunTrace:
    """Run the table-driven resampling loop until it settles or gives up.

    Statuses: `completed` when nothing is violated (the labeling is then
    total, and a solution whenever every constraint has bad-probability
    < 1); `depth_exhausted` when a fired constraint would push some
    variable past the last table row; `iteration_cap` after `max_iters`
    steps, or when a script runs out while violations remain.

    Raises ScriptError when a scripted step fires a constraint that is not
    currently violated, or is not pairwise domain-disjoint.
    """
    if max_iters is None:
        max_iters = len(csp.constraints) * table.depth
    dep = build_dependency_graph(csp)
    rng = random.Random(strategy.seed) if strategy.kind == "random" else None
    levels = {v: 0 for v in csp.variables}
    iterations: list[IterationRecord] = []
    step_index = 0
    while True:
        labeling = {v: table.get(v, levels[v]) for v in csp.variables}
        violated = tuple(
            c.id for c in csp.constraints if violates(csp, c.id, labeling)
        )
        if not violated:
            iterations.append(
                IterationRecord(dict(levels), labeling, violated, frozenset())
            )
            return RunTrace(COMPLETED, iterations, labeling, dict(levels))
        if step_index >= max_iters:
            iterations.append(
                IterationRecord(dict(levels), labeling, violated, frozenset())
            )
            return RunTrace(ITERATION_CAP, iterations, labeling, dict(levels))
        fired = _choose(strategy, violated, dep, rng, step_index)
        if fired is None:
            # Script ended with violations left: treat as hitting the cap.
            iterations.append(
                IterationRecord(dict(levels), labeling, violated, frozenset())
            )
            return RunTrace(ITERATION_CAP, iterations, labeling, dict(levels))
        if strategy.kind == "scripted":
            if not fired.issubset(violated):
                raise ScriptError(
                    f"step {step_index} fires non-violated constraints "
                    f"{sorted(fired.difference(violated))}"
                )
            if not _check_step_disjoint(csp, fired):
                raise ScriptError(f"step {step_index} is not domain-disjoint")
        iterations.append(IterationRecord(dict(levels), labeling, violated, fired))
        touched = [v for cid in fired for v in csp.constraint(cid).domain]
        if any(levels[v] + 1 >= table.depth for v in touched):
            return RunTrace(DEPTH_EXHAUSTED, iterations, labeling, dict(levels))
        for v in touched:
            levels[v] += 1
        step_index += 1


def check_consistency(csp: Csp, table: Table, seq: MtSequence) -> bool:
    """Replay a step sequence: true iff every fired constraint was violated.

    Levels are pure bookkeeping here: variable v sits at row
    sum over constraints containing v of how often they fired so far.
    Raises DepthExceededError if a replayed level runs off the table and
    InvalidInputError if a step repeats a variable across its constraints.
    """
    levels = {v: 0 for v in csp.variables}
    for n, step in enumerate(seq.steps):
        if not _check_step_disjoint(csp, step):
            raise InvalidInputError(f"step {n} is not domain-disjoint")
        for cid in step:
            dom = csp.constraint(cid).domain
            row = {v: table.get(v, levels[v]) for v in dom}
            if not violates(csp, cid, row):
                return False
        for cid in step:
            for v in csp.constraint(cid).domain:
                levels[v] += 1
    return True


def _run_trial(args):
    csp, trials_slice, depth, seed, strategy, max_iters = args
    out = []
    for trial in trials_slice:
        table = sample_table(csp.weights, csp.variables, depth, seed, trial)
        trial_strategy = strategy
        if strategy.kind == "random":
            trial_strategy = Strategy("random", seed=derive_u64(strategy.seed, trial))
        trace = mta_run(csp, table, trial_strategy, max_iters)
        out.append((trace.status, trace.total_resamples()))
    return out


def mt_monte_carlo(
    csp: Csp,
    trials: int,
    depth: int,
    seed: int,
    strategy: Strategy = MAXIMAL_GREEDY,
    max_iters: int | None = None,
    jobs: int = 1,
) -> dict:
    """Sample fresh tables and tally run outcomes.

    Table cells are drawn independently per (seed, trial, variable, row),
    so trial partitioning across workers cannot change any result.
    """
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    if jobs < 1:
        raise InvalidParameterError("jobs must be >= 1")
    all_trials = list(range(trials))
    if jobs == 1:
        batches = [_run_trial((csp, all_trials, depth, seed, strategy, max_iters))]
    else:
        chunks = [all_trials[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(
                pool.map(
                    _run_trial,
                    [(csp, chunk, depth, seed, strategy, max_iters) for chunk in chunks],
                )
            )
    statuses: Counter = Counter()
    histogram: Counter = Counter()
    for batch in batches:
        for status, resamples in batch:
            statuses[status] += 1
            histogram[resamples] += 1
    successes = statuses[COMPLETED]
    return {
        "trials": trials,
        "depth": depth,
        "seed": seed,
        "strategy": strategy.kind,
        "successes": successes,
        "success_rate": successes / trials,
        "statuses": {k: statuses[k] for k in sorted(statuses)},
        "resample_histogram": {str(k): histogram[k] for k in sorted(histogram)},
    }

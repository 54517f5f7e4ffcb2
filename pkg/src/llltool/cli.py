"""Command-line entry point: every operation as a subcommand with JSON I/O.

Exit codes: 0 success/pass, 1 checked failure (a verification answered
"no"), 2 usage or malformed input, 3 cap or search budget exhausted.
Reports carry the command, sha256 digests of input files, all parameters,
and any seed, so a report alone suffices to re-run the command. Timing is
the only non-reproducible field.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from fractions import Fraction

from . import derand, generators, local_goodness, moser_tardos, witness
from .csp import csp_stats, dump_problem, lll_condition, load_problem, prob_bad
from .csp import build_dependency_graph
from .errors import (
    CapExceededError,
    DepthExceededError,
    HypothesisError,
    InvalidInputError,
    InvalidParameterError,
    LllToolError,
    MissingVariableError,
    ScriptError,
    SearchBudgetError,
    UnsatisfiableConstraintError,
)
from .exact import format_rational, parse_rational
from .graphs import growth_profile, load_graph_json, load_graph_text
from .moser_tardos import (
    FIRST_SINGLETON,
    MAXIMAL_GREEDY,
    MtSequence,
    check_consistency,
    mt_monte_carlo,
    mta_run,
    random_strategy,
    scripted_strategy,
)
from .tables import table_from_json

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_CAP = 3

DEFAULT_SEED = 20140613


def _digest(text: str) -> str:
    return "sha256:" + hashlib.sha256(text.encode()).hexdigest()


class _Inputs:
    """Tracks file reads so every report can list its input digests."""

    def __init__(self):
        self.digests: dict[str, str] = {}

    def read(self, path: str) -> str:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InvalidInputError(f"cannot read {path}: {exc}") from exc
        self.digests[path] = _digest(text)
        return text

    def problem(self, path: str):
        return load_problem(self.read(path))

    def graph(self, path: str):
        text = self.read(path)
        try:
            return load_graph_json(text)
        except InvalidInputError:
            return load_graph_text(text)

    def json(self, path: str):
        text = self.read(path)
        try:
            return json.loads(text)
        except ValueError as exc:
            raise InvalidInputError(f"{path} is not valid JSON: {exc}") from exc


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _report(command: str, inputs: _Inputs, parameters: dict, results: dict,
            started: float, seed: int | None = None) -> dict:
    return {
        "command": command,
        "inputs": inputs.digests,
        "parameters": parameters,
        "results": results,
        "seed": seed,
        "timing_seconds": time.perf_counter() - started,
    }


def _rational_map(text: str, ids) -> dict[int, Fraction]:
    """One rational for all ids, or a comma list in id order."""
    parts = [p.strip() for p in text.split(",")]
    values = [parse_rational(p) for p in parts]
    ids = list(ids)
    if len(values) == 1:
        return {i: values[0] for i in ids}
    if len(values) != len(ids):
        raise InvalidParameterError(
            f"expected 1 or {len(ids)} comma-separated rationals, got {len(values)}"
        )
    return dict(zip(ids, values))


def _strategy(name: str, seed: int):
    if name == "mmta":
        return MAXIMAL_GREEDY
    if name == "first":
        return FIRST_SINGLETON
    if name == "random":
        return random_strategy(seed)
    raise InvalidParameterError(f"unknown strategy {name!r}")


def _sequence_from_file(inputs: _Inputs, path: str) -> MtSequence:
    obj = inputs.json(path)
    if not isinstance(obj, list):
        raise InvalidInputError("script must be a JSON list of constraint-id lists")
    return MtSequence.from_lists(obj)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="llltool",
        description="Constraint resampling toolkit: generators, exact "
        "verification, locality search, and derandomized solving.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="emit a problem built from a graph")
    g.add_argument("--kind", required=True,
                   choices=["coloring", "sinkless", "hyp2color"])
    g.add_argument("--graph", required=True)
    g.add_argument("--colors", type=int, default=3)

    st = sub.add_parser("stats", help="order, degrees, max bad mass, conditions")
    st.add_argument("--problem", required=True)
    st.add_argument("--s", default=None, help="rational exponent > 1")

    gr = sub.add_parser("growth", help="ball-growth profile of a graph")
    gr.add_argument("--graph", required=True)
    gr.add_argument("--r-max", type=int, default=8)

    m = sub.add_parser("mta", help="resampling runs over sampled tables")
    m.add_argument("--problem", required=True)
    m.add_argument("--depth", type=int, required=True)
    m.add_argument("--trials", type=int, default=100)
    m.add_argument("--seed", type=int, default=DEFAULT_SEED)
    m.add_argument("--strategy", default="mmta",
                   choices=["mmta", "random", "first"])
    m.add_argument("--table", default=None,
                   help="row-matrix JSON: run once on this table instead")
    m.add_argument("--script", default=None,
                   help="with --table: replay this step sequence")
    m.add_argument("--max-iters", type=int, default=None)
    m.add_argument("--jobs", type=int, default=1)

    co = sub.add_parser("consistency", help="replay a step sequence on a table")
    co.add_argument("--problem", required=True)
    co.add_argument("--table", required=True)
    co.add_argument("--script", required=True)

    w = sub.add_parser("witness", help="build, validate, or enumerate digraphs")
    w.add_argument("--problem", required=True)
    group = w.add_mutually_exclusive_group(required=True)
    group.add_argument("--script", help="build from a step-sequence file")
    group.add_argument("--witness", help="validate a digraph file")
    group.add_argument("--sink", type=int, help="enumerate single-sink digraphs")
    w.add_argument("--max-vertices", type=int, default=4)
    w.add_argument("--cap", type=int, default=100_000)

    v1 = sub.add_parser("verify-mt1", help="compatibility probability product law")
    v1.add_argument("--problem", required=True)
    v1.add_argument("--witness", required=True)
    v1.add_argument("--mode", default="exact", choices=["exact", "monte_carlo"])
    v1.add_argument("--depth", type=int, required=True)
    v1.add_argument("--trials", type=int, default=10_000)
    v1.add_argument("--seed", type=int, default=DEFAULT_SEED)
    v1.add_argument("--cap", type=int, default=None)

    v2 = sub.add_parser("verify-mt2", help="single-sink series partial sums")
    v2.add_argument("--problem", required=True)
    v2.add_argument("--c", type=int, required=True)
    v2.add_argument("--alpha", required=True)
    v2.add_argument("--beta", required=True)
    v2.add_argument("--max-vertices", type=int, required=True)
    v2.add_argument("--cap", type=int, default=100_000)

    lg = sub.add_parser("locally-good", help="search for a concentrated firing pattern")
    lg.add_argument("--problem", required=True)
    lg.add_argument("--table", required=True)
    lg.add_argument("--c", type=int, required=True)
    lg.add_argument("--R", type=int, required=True)
    lg.add_argument("--N", type=int, required=True)
    lg.add_argument("--eps", required=True)
    lg.add_argument("--budget", type=int,
                    default=local_goodness.DEFAULT_SEARCH_BUDGET)

    lb = sub.add_parser("lbad", help="bad-locality frequency vs the proved bound")
    lb.add_argument("--problem", required=True)
    lb.add_argument("--c", type=int, required=True)
    lb.add_argument("--R", type=int, required=True)
    lb.add_argument("--N", type=int, required=True)
    lb.add_argument("--eps", required=True)
    lb.add_argument("--eta", required=True)
    lb.add_argument("--s", required=True)
    lb.add_argument("--depth", type=int, required=True)
    lb.add_argument("--trials", type=int, default=1000)
    lb.add_argument("--seed", type=int, default=DEFAULT_SEED)
    lb.add_argument("--budget", type=int,
                    default=local_goodness.DEFAULT_SEARCH_BUDGET)

    so = sub.add_parser("solve", help="deterministic or pipeline solving")
    so.add_argument("--problem", required=True)
    so.add_argument("--method", required=True, choices=["double-exp", "pipeline"])
    so.add_argument("--params", default=None)
    so.add_argument("--mode", default="rand", choices=["det", "rand"])
    so.add_argument("--seed", type=int, default=DEFAULT_SEED)
    so.add_argument("--trials", type=int, default=100)
    so.add_argument("--ledger", action="store_true")

    ad = sub.add_parser("advisor", help="derive pipeline parameters from growth")
    ad.add_argument("--problem", required=True)
    ad.add_argument("--s", required=True)
    ad.add_argument("--r-max", type=int, default=8)

    pi = sub.add_parser("pipeline", help="good-table search plus resampling")
    pi.add_argument("--problem", required=True)
    pi.add_argument("--params", required=True)
    pi.add_argument("--mode", default="rand", choices=["det", "rand"])
    pi.add_argument("--seed", type=int, default=DEFAULT_SEED)
    pi.add_argument("--trials", type=int, default=100)
    pi.add_argument("--budget", type=int,
                    default=local_goodness.DEFAULT_SEARCH_BUDGET)
    return parser


def _cmd_generate(args, inputs: _Inputs) -> int:
    if args.kind == "hyp2color":
        hyp = generators.hypergraph_from_obj(inputs.json(args.graph))
        csp = generators.hypergraph_2coloring(hyp)
    elif args.kind == "coloring":
        csp = generators.proper_coloring(inputs.graph(args.graph), args.colors)
    else:
        csp = generators.sinkless_orientation(inputs.graph(args.graph))
    _emit(dump_problem(csp))
    return EXIT_OK


def _cmd_stats(args, inputs: _Inputs, started: float) -> int:
    csp = inputs.problem(args.problem)
    stats = csp_stats(csp)
    results = {"stats": stats.to_json()}
    conditions = {
        "classic": lll_condition(stats.p_max, stats.max_dep_degree, "classic").to_json(),
        "double_exp": lll_condition(
            stats.p_max, stats.max_dep_degree, "double_exp"
        ).to_json(),
    }
    if args.s is not None:
        conditions["exponent"] = lll_condition(
            stats.p_max, stats.max_dep_degree, "exponent", parse_rational(args.s)
        ).to_json()
    results["conditions"] = conditions
    _emit(_report("stats", inputs, {"problem": args.problem, "s": args.s},
                  results, started))
    return EXIT_OK


def _cmd_growth(args, inputs: _Inputs, started: float) -> int:
    profile = growth_profile(inputs.graph(args.graph), args.r_max)
    _emit(_report("growth", inputs,
                  {"graph": args.graph, "r_max": args.r_max},
                  profile.to_json(), started))
    return EXIT_OK


def _cmd_mta(args, inputs: _Inputs, started: float) -> int:
    csp = inputs.problem(args.problem)
    params = {
        "problem": args.problem, "depth": args.depth, "trials": args.trials,
        "strategy": args.strategy, "jobs": args.jobs,
    }
    if args.table is not None:
        table = table_from_json(inputs.json(args.table))
        if args.script is not None:
            strategy = scripted_strategy(_sequence_from_file(inputs, args.script))
        else:
            strategy = _strategy(args.strategy, args.seed)
        trace = mta_run(csp, table, strategy, args.max_iters)
        results = {
            "status": trace.status,
            "sequence": trace.sequence().to_json(),
            "resamples": trace.total_resamples(),
            "final_labeling": [trace.final_labeling[v] for v in csp.variables],
        }
    else:
        results = mt_monte_carlo(
            csp, args.trials, args.depth, args.seed,
            _strategy(args.strategy, args.seed), args.max_iters, args.jobs,
        )
    _emit(_report("mta", inputs, params, results, started, args.seed))
    return EXIT_OK


def _cmd_consistency(args, inputs: _Inputs, started: float) -> int:
    csp = inputs.problem(args.problem)
    table = table_from_json(inputs.json(args.table))
    seq = _sequence_from_file(inputs, args.script)
    ok = check_consistency(csp, table, seq)
    _emit(_report("consistency", inputs,
                  {"problem": args.problem, "table": args.table,
                   "script": args.script},
                  {"consistent": ok}, started))
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _cmd_witness(args, inputs: _Inputs, started: float) -> int:
    csp = inputs.problem(args.problem)
    params = {"problem": args.problem, "max_vertices": args.max_vertices}
    if args.script is not None:
        seq = _sequence_from_file(inputs, args.script)
        g = witness.full_witness_digraph(seq, csp)
        results = {"digraph": g.to_json(), "valid": witness.validate_witness(g, csp)}
        code = EXIT_OK
    elif args.witness is not None:
        g = witness.witness_from_json(inputs.json(args.witness))
        ok = witness.validate_witness(g, csp)
        results = {"valid": ok}
        code = EXIT_OK if ok else EXIT_CHECK_FAILED
    else:
        reps = witness.enumerate_sink_star(args.sink, csp, args.max_vertices, args.cap)
        results = {"count": len(reps), "digraphs": [r.to_json() for r in reps]}
        code = EXIT_OK
    _emit(_report("witness", inputs, params, results, started))
    return code


def _cmd_verify_mt1(args, inputs: _Inputs, started: float) -> int:
    csp = inputs.problem(args.problem)
    g = witness.witness_from_json(inputs.json(args.witness))
    if args.mode == "exact":
        results = witness.verify_mt1_exact(g, csp, args.depth, args.cap)
    else:
        results = witness.verify_mt1_monte_carlo(
            g, csp, args.trials, args.seed, args.depth
        )
    params = {"problem": args.problem, "witness": args.witness,
              "mode": args.mode, "depth": args.depth, "trials": args.trials}
    _emit(_report("verify-mt1", inputs, params, results, started, args.seed))
    return EXIT_OK if results["pass"] else EXIT_CHECK_FAILED


def _cmd_verify_mt2(args, inputs: _Inputs, started: float) -> int:
    csp = inputs.problem(args.problem)
    ids = [c.id for c in csp.constraints]
    results = witness.verify_mt2_partial_sums(
        args.c, csp,
        _rational_map(args.alpha, ids), _rational_map(args.beta, ids),
        args.max_vertices, args.cap,
    )
    params = {"problem": args.problem, "c": args.c, "alpha": args.alpha,
              "beta": args.beta, "max_vertices": args.max_vertices}
    _emit(_report("verify-mt2", inputs, params, results, started))
    return EXIT_OK if results["pass"] else EXIT_CHECK_FAILED


def _cmd_locally_good(args, inputs: _Inputs, started: float) -> int:
    csp = inputs.problem(args.problem)
    table = table_from_json(inputs.json(args.table))
    params = local_goodness.LocalParams(
        args.c, args.R, args.N, parse_rational(args.eps)
    )
    good, found = local_goodness.is_locally_good(csp, table, params, args.budget)
    results = {
        "locally_good": good,
        "witness": None if found is None else found.to_json(),
    }
    flag_params = {"problem": args.problem, "table": args.table, "c": args.c,
                   "R": args.R, "N": args.N, "eps": args.eps,
                   "budget": args.budget}
    _emit(_report("locally-good", inputs, flag_params, results, started))
    return EXIT_OK if good else EXIT_CHECK_FAILED


def _cmd_lbad(args, inputs: _Inputs, started: float) -> int:
    csp = inputs.problem(args.problem)
    params = local_goodness.LocalParams(
        args.c, args.R, args.N, parse_rational(args.eps), parse_rational(args.eta)
    )
    results = local_goodness.estimate_lbad_prob(
        csp, params, args.depth, args.trials, args.seed,
        parse_rational(args.s), args.budget,
    )
    flag_params = {"problem": args.problem, "c": args.c, "R": args.R,
                   "N": args.N, "eps": args.eps, "eta": args.eta, "s": args.s,
                   "depth": args.depth, "trials": args.trials}
    _emit(_report("lbad", inputs, flag_params, results, started, args.seed))
    return EXIT_OK if results["pass"] else EXIT_CHECK_FAILED


def _serialize_ledger(entries: list) -> list:
    out = []
    for entry in entries:
        row = dict(entry)
        row["mass"] = format_rational(row["mass"])
        row["bound"] = format_rational(row["bound"])
        out.append(row)
    return out


def _run_pipeline(args, inputs: _Inputs, started: float, command: str) -> int:
    csp = inputs.problem(args.problem)
    params = derand.params_from_json(inputs.json(args.params))
    mode = "deterministic" if args.mode == "det" else "randomized"
    budget = getattr(args, "budget", local_goodness.DEFAULT_SEARCH_BUDGET)
    results = derand.pipeline(csp, params, mode, args.seed, args.trials, budget)
    flag_params = {"problem": args.problem, "params": args.params,
                   "mode": args.mode, "trials": args.trials}
    _emit(_report(command, inputs, flag_params, results, started, args.seed))
    if results["status"] == "solved":
        return EXIT_OK
    if results["status"] == "infeasible":
        return EXIT_CAP
    return EXIT_CHECK_FAILED


def _cmd_solve(args, inputs: _Inputs, started: float) -> int:
    if args.method == "pipeline":
        if args.params is None:
            raise InvalidParameterError("--method pipeline requires --params")
        return _run_pipeline(args, inputs, started, "solve")
    csp = inputs.problem(args.problem)
    ledger: list | None = [] if args.ledger else None
    labeling = derand.solve_double_exp(csp, ledger)
    results = {"assignment": [labeling[v] for v in csp.variables],
               "is_solution": True}
    if ledger is not None:
        results["ledger"] = _serialize_ledger(ledger)
    _emit(_report("solve", inputs,
                  {"problem": args.problem, "method": args.method,
                   "ledger": args.ledger},
                  results, started))
    return EXIT_OK


def _cmd_advisor(args, inputs: _Inputs, started: float) -> int:
    csp = inputs.problem(args.problem)
    dep = build_dependency_graph(csp)
    p = max((prob_bad(csp, c.id) for c in csp.constraints), default=Fraction(0))
    profile = growth_profile(dep, args.r_max)
    params, report = derand.parameter_advisor(
        p, dep.max_degree(), parse_rational(args.s), profile
    )
    results = {"params": params.to_json(), "analysis": report,
               "growth": profile.to_json()}
    _emit(_report("advisor", inputs,
                  {"problem": args.problem, "s": args.s, "r_max": args.r_max},
                  results, started))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    inputs = _Inputs()
    started = time.perf_counter()
    try:
        if args.command == "generate":
            return _cmd_generate(args, inputs)
        if args.command == "stats":
            return _cmd_stats(args, inputs, started)
        if args.command == "growth":
            return _cmd_growth(args, inputs, started)
        if args.command == "mta":
            return _cmd_mta(args, inputs, started)
        if args.command == "consistency":
            return _cmd_consistency(args, inputs, started)
        if args.command == "witness":
            return _cmd_witness(args, inputs, started)
        if args.command == "verify-mt1":
            return _cmd_verify_mt1(args, inputs, started)
        if args.command == "verify-mt2":
            return _cmd_verify_mt2(args, inputs, started)
        if args.command == "locally-good":
            return _cmd_locally_good(args, inputs, started)
        if args.command == "lbad":
            return _cmd_lbad(args, inputs, started)
        if args.command == "solve":
            return _cmd_solve(args, inputs, started)
        if args.command == "advisor":
            return _cmd_advisor(args, inputs, started)
        if args.command == "pipeline":
            return _run_pipeline(args, inputs, started, "pipeline")
        raise InvalidParameterError(f"unknown command {args.command!r}")
    except (CapExceededError, SearchBudgetError) as exc:
        print(f"llltool: budget: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (
        InvalidInputError,
        InvalidParameterError,
        MissingVariableError,
        DepthExceededError,
        ScriptError,
    ) as exc:
        print(f"llltool: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HypothesisError, UnsatisfiableConstraintError) as exc:
        print(f"llltool: check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except LllToolError as exc:
        print(f"llltool: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())

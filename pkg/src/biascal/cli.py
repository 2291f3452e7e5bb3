"""Command line entry point: ``biascal {analyze,calibrate,simulate,oracle}``.

Exit codes: 0 success / converged, 2 invalid input, 3 iteration limit
reached (results still written), 4 oracle budget exceeded.
"""
from __future__ import annotations

import argparse
import sys

from . import io
from .constraints import ConstraintSet, build_margin_constraints, indicator_counts, row_value
from .decoder import DenseCorpus
from .errors import BudgetExceeded, ConfigInvalid, CorpusInvalid, MismatchedDomains
from .metrics import bias_table, count_cooccurrences, mean_bias_amplification
from .oracle import OracleBudget, solve_exact, unconstrained_max
from .report import (HEADER, breakdown, check_same_space, format_breakdown, report_row,
                     write_scatter_csv)
from .schema import Family, assignment_score
from .solver import SolverConfig, Status, calibrate, write_trace_csv
from .synth import SynthConfig, bias_range, generate

EXIT_OK, EXIT_INVALID, EXIT_LIMIT, EXIT_BUDGET = 0, 2, 3, 4


class _Invalid(Exception):
    pass


def _training_bias(path):
    """Bias table from a labelled training file (corpus gold or prediction assignments)."""
    doc = io.load(path)
    if isinstance(doc, dict) and "assignments" in doc:
        preds = io.predictions_from_json(doc)
        schema, labels = preds.schema, preds.assignments
    else:
        corpus = io.corpus_from_json(doc)
        if corpus.gold is None:
            raise _Invalid(f"{path}: training file has no gold labels")
        schema, labels = corpus.schema, corpus.gold
    return schema, bias_table(count_cooccurrences(labels, schema))


def _predictions(path, workers=1):
    """(schema, assignments, gold, ranking) from a predictions or corpus file.

    A corpus with score tables is decoded without constraints; a gold-only
    corpus is taken at face value.
    """
    doc = io.load(path)
    if isinstance(doc, dict) and "assignments" in doc:
        p = io.predictions_from_json(doc)
        return p.schema, p.assignments, p.gold, p.object_ranking
    corpus = io.corpus_from_json(doc)
    if corpus.instances:
        dense = DenseCorpus(corpus)
        decoded = dense.decode(None, workers)
        ranking = dense.object_ranking(decoded) if corpus.schema.family is Family.MLC else None
        return corpus.schema, dense.assignments(decoded), corpus.gold, ranking
    if corpus.gold is None:
        raise _Invalid(f"{path}: file has neither assignments, instances nor gold")
    return corpus.schema, list(corpus.gold), corpus.gold, None


def _print_rows(rows, out):
    print(HEADER, file=out)
    for r in rows:
        print(r.format(), file=out)


def cmd_analyze(args, out=None) -> int:
    out = out if out is not None else sys.stdout
    train_schema, train = _training_bias(args.train)
    schema, assignments, gold, ranking = _predictions(args.pred, args.workers)
    check_same_space(train_schema, schema)
    rows = breakdown(schema, train, assignments, args.margin)
    print(format_breakdown(rows), file=out)
    print(file=out)
    _print_rows([report_row("predictions", schema, train, assignments, args.margin, gold, ranking)], out)
    if args.scatter:
        write_scatter_csv(rows, args.scatter)
    return EXIT_OK


def cmd_calibrate(args, out=None) -> int:
    out = out if out is not None else sys.stdout
    config = SolverConfig(eta=args.eta, max_iters=args.max_iters, margin=args.margin,
                          tolerance=args.tolerance, workers=args.workers)
    config.validate()
    corpus = io.load_corpus(args.corpus)
    train_schema, train = _training_bias(args.train)
    check_same_space(train_schema, corpus.schema)
    if not corpus.instances:
        raise _Invalid(f"{args.corpus}: corpus has no score tables")
    constraints = build_margin_constraints(corpus.schema, train, args.margin)

    dense = DenseCorpus(corpus)
    decoded = dense.decode(None, args.workers)
    before = dense.assignments(decoded)
    before_rank = dense.object_ranking(decoded) if corpus.schema.family is Family.MLC else None
    result = calibrate(corpus, constraints, config)

    print(f"constraints: {len(constraints)}  margin: {args.margin}  eta: {args.eta}", file=out)
    print(f"status: {result.status.value} after {result.dual.iteration} iteration(s)", file=out)
    _print_rows([
        report_row("uncalibrated", corpus.schema, train, before, args.margin, corpus.gold, before_rank),
        report_row("calibrated", corpus.schema, train, result.assignments, args.margin, corpus.gold, result.ranking),
    ], out)
    if result.residual:
        print("residual (constraint, slack):", file=out)
        for cid, s in result.residual:
            print(f"  {cid} {s!r}", file=out)

    io.dump(io.predictions_to_json(corpus.schema, result.assignments, corpus.gold, constraints, result.ranking),
            args.out)
    if args.trace:
        write_trace_csv(result.dual, args.trace)
    return EXIT_OK if result.status is Status.CONVERGED else EXIT_LIMIT


def _synth_config(args) -> SynthConfig:
    if args.bias_range is not None:
        bias = bias_range(args.bias_range[0], args.bias_range[1], args.verbs)
    else:
        bias = args.bias
    return SynthConfig(seed=args.seed, n_instances=args.n, n_verbs=args.verbs, roles_per_verb=args.roles,
                       nouns_per_role=args.nouns, train_bias=bias, amplification=args.amplification,
                       noise_sigma=args.noise, family=Family(args.family), n_train=args.n_train,
                       score_scale=args.score_scale)


def cmd_simulate(args, out=None) -> int:
    out = out if out is not None else sys.stdout
    config = _synth_config(args)
    train, ev = generate(config)
    io.dump(io.corpus_to_json(train), args.out_train)
    io.dump(io.corpus_to_json(ev), args.out_eval)

    schema = ev.schema
    g_ref = schema.genders[0]
    b_train = bias_table(count_cooccurrences(train.gold, schema))
    b_gold = bias_table(count_cooccurrences(ev.gold, schema))
    dense = DenseCorpus(ev)
    b_map = bias_table(count_cooccurrences(dense.assignments(dense.decode()), schema))

    def fmt(x):
        return "undef" if x is None else f"{x:.4f}"

    print(f"{'output':<16} {'target':>8} {'train':>8} {'eval':>8} {'map':>8}", file=out)
    for o, target in zip(schema.outputs, config.biases):
        print(f"{o:<16} {target:>8.4f} {fmt(b_train.get(o, g_ref)):>8} {fmt(b_gold.get(o, g_ref)):>8} "
              f"{fmt(b_map.get(o, g_ref)):>8}", file=out)
    print(f"measured amplification (MAP vs eval gold): {mean_bias_amplification(b_gold, b_map):.4f}", file=out)
    print(f"measured amplification (MAP vs train gold): {mean_bias_amplification(b_train, b_map):.4f}", file=out)
    return EXIT_OK


def cmd_oracle(args, out=None) -> int:
    out = out if out is not None else sys.stdout
    corpus = io.load_corpus(args.corpus)
    if args.no_constraints:
        constraints = ConstraintSet()
    else:
        if not args.train:
            raise _Invalid("--train is required unless --no-constraints is given")
        train_schema, train = _training_bias(args.train)
        check_same_space(train_schema, corpus.schema)
        constraints = build_margin_constraints(corpus.schema, train, args.margin)
    budget = OracleBudget(args.budget)
    best_free = unconstrained_max(corpus, budget)
    solution = solve_exact(corpus, constraints, budget)
    print(f"constraints: {len(constraints)}", file=out)
    print(f"unconstrained optimum: {best_free!r}", file=out)
    if not solution.feasible:
        print("constrained optimum: Infeasible", file=out)
    else:
        print(f"constrained optimum: {solution.objective!r}", file=out)
    if args.result:
        preds = io.load_predictions(args.result)
        by_id = {a.instance_id: a for a in preds.assignments}
        if sorted(by_id) != sorted(t.instance_id for t in corpus.instances):
            raise _Invalid(f"{args.result}: assignments do not cover the corpus instances")
        objective = 0.0
        chosen = []
        for t in corpus.instances:
            a = by_id[t.instance_id]
            chosen.append(a)
            objective = objective + assignment_score(corpus.schema, t, a)
        counts = indicator_counts(chosen)
        feasible = all(row_value(row, counts) <= 0.0 for row in constraints)
        print(f"result objective: {objective!r} ({'feasible' if feasible else 'infeasible'})", file=out)
        if solution.feasible:
            print(f"gap: {solution.objective - objective!r}", file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="biascal",
                                description="Bias audit and corpus-level calibration of structured predictions.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="bias and bias amplification of predictions")
    a.add_argument("--train", required=True, help="labelled training corpus (JSON)")
    a.add_argument("--pred", required=True, help="predictions file or corpus to decode (JSON)")
    a.add_argument("--margin", type=float, default=0.05)
    a.add_argument("--scatter", help="write (output, b_train, b_pred) CSV here")
    a.add_argument("--workers", type=int, default=1)
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("calibrate", help="calibrate predictions under corpus-level ratio constraints")
    c.add_argument("--corpus", required=True, help="corpus with score tables (JSON)")
    c.add_argument("--train", required=True, help="labelled training corpus (JSON)")
    c.add_argument("--margin", type=float, default=0.05)
    c.add_argument("--eta", type=float, default=0.1)
    c.add_argument("--max-iters", type=int, default=100)
    c.add_argument("--tolerance", type=float, default=0.0)
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--out", required=True, help="calibrated predictions (JSON)")
    c.add_argument("--trace", help="per-iteration trace (CSV)")
    c.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("simulate", help="write a synthetic training and eval corpus")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--n", type=int, default=2000, help="eval instances")
    s.add_argument("--n-train", type=int, default=None)
    s.add_argument("--verbs", type=int, default=20, help="verbs (VSRL) or objects (MLC)")
    s.add_argument("--roles", type=int, default=3)
    s.add_argument("--nouns", type=int, default=4)
    bias = s.add_mutually_exclusive_group()
    bias.add_argument("--bias", type=float, default=0.75, help="training bias toward the first gender")
    bias.add_argument("--bias-range", type=float, nargs=2, metavar=("LO", "HI"))
    s.add_argument("--amplification", type=float, default=1.0)
    s.add_argument("--noise", type=float, default=0.5)
    s.add_argument("--score-scale", type=float, default=10.0)
    s.add_argument("--family", choices=[f.value for f in Family], default="VSRL")
    s.add_argument("--out-train", required=True)
    s.add_argument("--out-eval", required=True)
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("oracle", help="exact constrained optimum by exhaustive search")
    o.add_argument("--corpus", required=True)
    o.add_argument("--train")
    o.add_argument("--margin", type=float, default=0.05)
    o.add_argument("--no-constraints", action="store_true")
    o.add_argument("--result", help="predictions file to compare against the optimum")
    o.add_argument("--budget", type=int, default=10**6)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CorpusInvalid, MismatchedDomains, ConfigInvalid, _Invalid, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())

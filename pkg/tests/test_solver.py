import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biascal.constraints import ConstraintSet
from biascal.decoder import decode_corpus
from biascal.errors import ConfigInvalid
from biascal.metrics import bias_table, count_cooccurrences, count_margin_violations
from biascal.oracle import solve_exact, unconstrained_max
from biascal.schema import Corpus, Family
from biascal.solver import SolverConfig, Status, calibrate, dual_objective, dual_update, write_trace_csv
from biascal.synth import SynthConfig, generate
from biascal.constraints import build_margin_constraints

from _factories import (agent_markers, planted_agent_corpus, random_corpus, random_margin_constraints,
                        reference_constraints, vsrl_schema, vsrl_table)


def _two_instance():
    schema = vsrl_schema({"act": [("agent", ["man", "woman"])]}, agent_markers(["act"]))
    tables = (vsrl_table("i1", {"act": 0.0}, {"act": {"agent": {"man": 1.0, "woman": 0.0}}}),
              vsrl_table("i2", {"act": 0.0}, {"act": {"agent": {"man": 1.0, "woman": 0.5}}}))
    return Corpus(schema, tables)


def _three_instance():
    schema = vsrl_schema({"act": [("agent", ["man", "woman"])]}, agent_markers(["act"]))
    tables = tuple(vsrl_table(f"i{k}", {"act": 0.0}, {"act": {"agent": {"man": 1.0, "woman": 0.2 * k}}})
                   for k in range(3))
    return Corpus(schema, tables)


def test_dual_update_examples():
    assert dual_update([0.0], [-1.0], 0.1).tolist() == [0.0]
    assert dual_update([0.0], [0.62], 0.1)[0] == pytest.approx(0.062, abs=1e-15)
    assert dual_update([0.05], [-1.0], 0.1).tolist() == [0.0]
    lam = np.array([0.3])
    dual_update(lam, [1.0], 0.1)
    assert lam.tolist() == [0.3]


def test_config_validation():
    SolverConfig().validate()
    for bad in (dict(eta=0.0), dict(eta=float("nan")), dict(max_iters=0), dict(margin=-0.1),
                dict(tolerance=-1.0), dict(workers=0)):
        with pytest.raises(ConfigInvalid):
            SolverConfig(**bad).validate()


def test_already_satisfied_converges_at_first_iteration():
    corpus = _two_instance()
    result = calibrate(corpus, reference_constraints(corpus.schema, 1.0, 0.05))
    assert result.status is Status.CONVERGED and result.dual.iteration == 1
    assert result.assignments == decode_corpus(corpus)
    assert result.residual == []
    assert result.dual.lam.tolist() == [0.0]


def test_planted_two_instance_corpus():
    corpus = _two_instance()
    cs = reference_constraints(corpus.schema, 0.5, 0.05)
    assert [a.role_fills["agent"] for a in decode_corpus(corpus)] == ["man", "man"]
    result = calibrate(corpus, cs)
    assert result.status is Status.CONVERGED
    assert [a.role_fills["agent"] for a in result.assignments] == ["man", "woman"]
    exact = solve_exact(corpus, cs)
    assert exact.feasible
    assert result.objective == pytest.approx(exact.objective, abs=1e-9) == 1.5
    assert list(exact.assignments) == result.assignments


def test_parity_infeasible_hits_iteration_limit():
    corpus = _three_instance()
    cs = reference_constraints(corpus.schema, 0.5, 0.0)
    result = calibrate(corpus, cs, SolverConfig(max_iters=25))
    assert result.status is Status.ITERATION_LIMIT
    assert result.dual.iteration == 25 and len(result.dual.trace) == 25
    assert result.residual and all(s > 0 for _, s in result.residual)
    assert not solve_exact(corpus, cs).feasible


def test_trace_records_every_iteration_and_writes_csv():
    corpus = _three_instance()
    result = calibrate(corpus, reference_constraints(corpus.schema, 0.5, 0.0), SolverConfig(max_iters=7))
    buf = io.StringIO()
    write_trace_csv(result.dual, buf)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert rows[0] == ["iteration", "dual_objective", "num_violations", "max_slack", "l2_lambda"]
    assert [int(r[0]) for r in rows[1:]] == list(range(1, 8))
    assert float(rows[1][4]) == 0.0
    for rec, row in zip(result.dual.trace, rows[1:]):
        assert float(row[1]) == rec.dual_objective
        assert float(row[4]) == pytest.approx(float(np.linalg.norm(rec.lam)), abs=1e-15)


def test_residual_empty_iff_converged():
    rng = np.random.default_rng(2)
    for _ in range(20):
        corpus = random_corpus(rng, 5)
        cs = random_margin_constraints(rng, corpus.schema)
        result = calibrate(corpus, cs, SolverConfig(max_iters=30))
        assert (result.residual == []) == (result.status is Status.CONVERGED)


def test_dual_objective_at_zero_is_sum_of_map_scores():
    rng = np.random.default_rng(6)
    for _ in range(10):
        corpus = random_corpus(rng, 3)
        cs = random_margin_constraints(rng, corpus.schema)
        at_zero = dual_objective(corpus, cs, np.zeros(len(cs)))
        assert at_zero == pytest.approx(unconstrained_max(corpus), abs=1e-9)
        assert dual_objective(corpus, ConstraintSet(), []) == at_zero


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_weak_duality_and_nonnegative_multipliers(seed):
    rng = np.random.default_rng(seed)
    corpus = random_corpus(rng, 3, max_verbs=2, max_roles=2, max_nouns=2)
    cs = random_margin_constraints(rng, corpus.schema)
    exact = solve_exact(corpus, cs)
    result = calibrate(corpus, cs, SolverConfig(eta=float(rng.uniform(0.01, 1.0)), max_iters=20))
    for rec in result.dual.trace:
        assert min(rec.lam, default=0.0) >= 0.0
        if exact.feasible:
            assert rec.dual_objective >= exact.objective - 1e-9
    if exact.feasible:
        for _ in range(5):
            lam = rng.exponential(1.0, len(cs))
            assert dual_objective(corpus, cs, lam) >= exact.objective - 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_converged_results_meet_the_certificate_bound(seed):
    rng = np.random.default_rng(seed)
    corpus = planted_agent_corpus(rng, int(rng.integers(2, 7)))
    cs = reference_constraints(corpus.schema, float(rng.choice([0.25, 0.5, 0.75])), float(rng.choice([0.0, 0.125])))
    result = calibrate(corpus, cs, SolverConfig(max_iters=200))
    if result.status is not Status.CONVERGED:
        return
    exact = solve_exact(corpus, cs)
    assert exact.feasible
    assert all(s <= 0 for s in result.final_slacks)
    lam = result.dual.lam.tolist()
    gap = sum(l * abs(s) for l, s in zip(lam, result.final_slacks))
    assert result.objective >= exact.objective - gap - 1e-9
    if result.certified():
        assert result.objective == pytest.approx(exact.objective, abs=1e-9)


def test_violations_do_not_grow_on_synthetic_fixtures():
    for seed, family in [(1, Family.VSRL), (2, Family.VSRL), (3, Family.MLC)]:
        train, ev = generate(SynthConfig(seed=seed, n_instances=300, n_verbs=6, roles_per_verb=2,
                                         nouns_per_role=3, train_bias=(0.6, 0.7, 0.8, 0.9, 0.75, 0.65),
                                         family=family))
        b_train = bias_table(count_cooccurrences(train.gold, ev.schema))
        cs = build_margin_constraints(ev.schema, b_train, 0.05)
        result = calibrate(ev, cs, SolverConfig(max_iters=40))
        trace = result.dual.trace
        assert trace[-1].num_violations <= trace[0].num_violations
        before = count_margin_violations(b_train, bias_table(count_cooccurrences(decode_corpus(ev), ev.schema)),
                                         0.05)[0]
        after = count_margin_violations(b_train, bias_table(count_cooccurrences(result.assignments, ev.schema)),
                                        0.05)[0]
        assert after <= before


def test_calibration_is_deterministic_across_runs_and_workers():
    rng = np.random.default_rng(12)
    corpus = random_corpus(rng, 60, family=Family.VSRL)
    cs = random_margin_constraints(rng, corpus.schema)
    runs = [calibrate(corpus, cs, SolverConfig(max_iters=15, workers=w)) for w in (1, 1, 4)]
    for r in runs[1:]:
        assert r.assignments == runs[0].assignments
        assert r.dual.trace == runs[0].dual.trace

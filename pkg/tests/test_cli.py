import numpy as np
import pytest

from biascal import io
from biascal.cli import main
from biascal.schema import Corpus

from _factories import agent_markers, vsrl_assignment, vsrl_schema, vsrl_table

SYNTH = ["--seed", "3", "--n", "300", "--verbs", "6", "--roles", "2", "--nouns", "3", "--bias-range", "0.6", "0.9"]


def _gold_file(path, ratios, n=100):
    """Gold-only corpus; ``ratios`` maps verb -> share of man agents."""
    schema = vsrl_schema({v: [("agent", ["man", "woman"])] for v in ratios}, agent_markers(ratios))
    gold = []
    for v, r in ratios.items():
        m = round(r * n)
        gold += [vsrl_assignment(f"{v}-{k}", v, agent="man" if k < m else "woman") for k in range(n)]
    io.dump(io.corpus_to_json(Corpus(schema, (), tuple(gold))), path)
    return path


def _agent_corpus(path, woman_scores):
    schema = vsrl_schema({"act": [("agent", ["man", "woman"])]}, agent_markers(["act"]))
    tables = tuple(vsrl_table(f"i{k}", {"act": 0.0}, {"act": {"agent": {"man": 1.0, "woman": w}}})
                   for k, w in enumerate(woman_scores))
    io.dump(io.corpus_to_json(Corpus(schema, tables)), path)
    return path


def _rows(text):
    lines = text.splitlines()
    start = next(k for k, line in enumerate(lines) if line.startswith("Method"))
    return [line.split() for line in lines[start + 1:] if line and not line.startswith(" ") and
            not line.startswith("residual")]


def test_analyze_worked_example(tmp_path, capsys):
    train = _gold_file(tmp_path / "train.json", {"cooking": 0.34})
    pred = _gold_file(tmp_path / "pred.json", {"cooking": 0.16})
    assert main(["analyze", "--train", str(train), "--pred", str(pred)]) == 0
    out = capsys.readouterr().out
    assert _rows(out)[0][1:3] == ["1", "0.1800"]


def test_analyze_identity_and_scatter(tmp_path, capsys):
    train = _gold_file(tmp_path / "train.json", {"a": 0.3, "b": 0.8})
    scatter = tmp_path / "scatter.csv"
    assert main(["analyze", "--train", str(train), "--pred", str(train), "--scatter", str(scatter)]) == 0
    assert _rows(capsys.readouterr().out)[0][1:3] == ["0", "0.0000"]
    lines = scatter.read_text().splitlines()
    assert lines[0] == "output,b_train,b_pred"
    assert lines[1] == "a,0.3,0.3"


def test_analyze_lists_planted_violations(tmp_path, capsys):
    train_ratios = {f"v{k}": 0.5 for k in range(10)}
    pred_ratios = dict(train_ratios, v2=0.6, v5=0.3, v8=0.9)
    train = _gold_file(tmp_path / "train.json", train_ratios)
    pred = _gold_file(tmp_path / "pred.json", pred_ratios)
    assert main(["analyze", "--train", str(train), "--pred", str(pred)]) == 0
    out = capsys.readouterr().out
    flagged = [line.split()[0] for line in out.splitlines() if line.rstrip().endswith("*")]
    assert flagged == ["v2", "v5", "v8"]
    assert _rows(out)[0][1] == "3"


def test_invalid_input_exits_2_with_path(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": {"family": "VSRL"}}', encoding="utf-8")
    assert main(["analyze", "--train", str(bad), "--pred", str(bad)]) == 2
    assert "schema" in capsys.readouterr().err
    good = _gold_file(tmp_path / "t.json", {"a": 0.5})
    assert main(["calibrate", "--corpus", str(good), "--train", str(good), "--eta", "-1",
                 "--out", str(tmp_path / "o.json")]) == 2


def test_calibrate_already_satisfied(tmp_path, capsys):
    train = _gold_file(tmp_path / "train.json", {"act": 1.0})
    corpus = _agent_corpus(tmp_path / "c.json", [0.0, 0.5])
    assert main(["calibrate", "--corpus", str(corpus), "--train", str(train),
                 "--out", str(tmp_path / "o.json")]) == 0
    before, after = _rows(capsys.readouterr().out)
    assert before[1:] == after[1:]


def test_calibrate_parity_infeasible_exits_3(tmp_path, capsys):
    train = _gold_file(tmp_path / "train.json", {"act": 0.5})
    corpus = _agent_corpus(tmp_path / "c.json", [0.0, 0.2, 0.4])
    out_path, trace = tmp_path / "o.json", tmp_path / "t.csv"
    code = main(["calibrate", "--corpus", str(corpus), "--train", str(train), "--margin", "0",
                 "--max-iters", "20", "--out", str(out_path), "--trace", str(trace)])
    assert code == 3
    out = capsys.readouterr().out
    assert "IterationLimit" in out and "residual" in out and "act:" in out
    assert out_path.exists() and len(trace.read_text().splitlines()) == 21


def test_calibrate_reduces_violations_and_analyze_reproduces_after_row(tmp_path, capsys):
    tr, ev = tmp_path / "tr.json", tmp_path / "ev.json"
    assert main(["simulate", *SYNTH, "--out-train", str(tr), "--out-eval", str(ev)]) == 0
    capsys.readouterr()
    out_path = tmp_path / "cal.json"
    main(["calibrate", "--corpus", str(ev), "--train", str(tr), "--out", str(out_path)])
    before, after = _rows(capsys.readouterr().out)
    assert int(after[1]) < int(before[1])
    assert main(["analyze", "--train", str(tr), "--pred", str(out_path)]) == 0
    assert _rows(capsys.readouterr().out)[0][1:] == after[1:]


def test_simulate_is_deterministic_and_zero_amplification(tmp_path, capsys):
    paths = []
    for k in range(2):
        tr, ev = tmp_path / f"tr{k}.json", tmp_path / f"ev{k}.json"
        assert main(["simulate", *SYNTH, "--out-train", str(tr), "--out-eval", str(ev)]) == 0
        paths.append((tr.read_bytes(), ev.read_bytes()))
    assert paths[0] == paths[1]
    capsys.readouterr()
    assert main(["simulate", *SYNTH, "--amplification", "0", "--noise", "0",
                 "--out-train", str(tmp_path / "a.json"), "--out-eval", str(tmp_path / "b.json")]) == 0
    assert "measured amplification (MAP vs eval gold): 0.0000" in capsys.readouterr().out


def test_simulate_rejects_bad_flags(tmp_path):
    args = ["simulate", "--out-train", str(tmp_path / "a.json"), "--out-eval", str(tmp_path / "b.json")]
    assert main(args + ["--n", "0"]) == 2
    assert main(args + ["--bias", "1.5"]) == 2
    with pytest.raises(SystemExit):
        main(args + ["--family", "XYZ"])


def test_oracle_reports_gap_zero_and_infeasible(tmp_path, capsys):
    train = _gold_file(tmp_path / "train.json", {"act": 0.5})
    corpus = _agent_corpus(tmp_path / "c.json", [0.0, 0.5])
    result = tmp_path / "r.json"
    assert main(["calibrate", "--corpus", str(corpus), "--train", str(train), "--out", str(result)]) == 0
    capsys.readouterr()
    assert main(["oracle", "--corpus", str(corpus), "--train", str(train), "--result", str(result)]) == 0
    out = capsys.readouterr().out
    assert "gap: 0.0" in out and "(feasible)" in out

    free = tmp_path / "free.json"
    assert main(["calibrate", "--corpus", str(corpus), "--train", str(_gold_file(tmp_path / "t1.json", {"act": 1.0})),
                 "--out", str(free)]) == 0
    capsys.readouterr()
    assert main(["oracle", "--corpus", str(corpus), "--no-constraints", "--result", str(free)]) == 0
    assert "gap: 0.0" in capsys.readouterr().out

    odd = _agent_corpus(tmp_path / "odd.json", [0.0, 0.2, 0.4])
    assert main(["oracle", "--corpus", str(odd), "--train", str(train), "--margin", "0"]) == 0
    assert "constrained optimum: Infeasible" in capsys.readouterr().out


def test_oracle_budget_exit_4(tmp_path, capsys):
    corpus = _agent_corpus(tmp_path / "c.json", list(np.linspace(0, 0.9, 12)))
    assert main(["oracle", "--corpus", str(corpus), "--no-constraints", "--budget", "100"]) == 4
    assert "budget" in capsys.readouterr().err

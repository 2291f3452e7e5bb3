"""Before/after report rows, per-output bias breakdowns and scatter CSV output."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import MismatchedDomains
from .metrics import (BiasTable, amplification_terms, bias_table, count_cooccurrences,
                      count_margin_violations, mean_bias_amplification, top1_map, top1_role_accuracy)
from .schema import Family, OutputSchema


@dataclass(frozen=True)
class ReportRow:
    method: str
    violations: int
    amplified_bias: float
    performance: Optional[float]

    def format(self) -> str:
        perf = "n/a" if self.performance is None else f"{self.performance:.2f}"
        return f"{self.method:<14} {self.violations:>6d} {self.amplified_bias:>10.4f} {perf:>8}"


HEADER = f"{'Method':<14} {'Viol.':>6} {'Amp. bias':>10} {'Perf.':>8}"


def check_same_space(a: OutputSchema, b: OutputSchema):
    if a.family is not b.family or a.outputs != b.outputs or a.genders != b.genders:
        raise MismatchedDomains("training and prediction files describe different output spaces")


def performance(schema: OutputSchema, assignments, gold, ranking=None) -> Optional[float]:
    """Top-1 role accuracy (VSRL) or top-1 mAP (MLC) in percent; None when not computable."""
    if gold is None:
        return None
    if schema.family is Family.VSRL:
        return 100.0 * top1_role_accuracy(assignments, gold)
    if ranking is None:
        return None
    return 100.0 * top1_map(ranking, gold, schema.objects, [a.instance_id for a in assignments])


def report_row(method: str, schema: OutputSchema, train: BiasTable, assignments, margin: float,
               gold=None, ranking=None) -> ReportRow:
    pred = bias_table(count_cooccurrences(assignments, schema))
    n_viol, _ = count_margin_violations(train, pred, margin)
    return ReportRow(method, n_viol, mean_bias_amplification(train, pred),
                     performance(schema, assignments, gold, ranking))


def breakdown(schema: OutputSchema, train: BiasTable, assignments, margin: float) -> list:
    """Per output: (name, b_train, b_pred, amplification contribution, violated)."""
    pred = bias_table(count_cooccurrences(assignments, schema))
    terms = amplification_terms(train, pred)
    _, bad = count_margin_violations(train, pred, margin)
    bad = set(bad)
    g_ref = schema.genders[0]
    rows = []
    for o in schema.outputs:
        contrib = sum(v for (oo, _), v in terms.items() if oo == o)
        rows.append((o, train.get(o, g_ref), pred.get(o, g_ref), contrib, o in bad))
    return rows


def format_breakdown(rows: Sequence) -> str:
    def fmt(x):
        return "undef" if x is None else f"{x:.4f}"

    lines = [f"{'output':<16} {'b_train':>8} {'b_pred':>8} {'amp':>8}  viol"]
    for o, bt, bp, amp, bad in rows:
        lines.append(f"{o:<16} {fmt(bt):>8} {fmt(bp):>8} {amp:>8.4f}  {'*' if bad else ''}")
    return "\n".join(lines)


def write_scatter_csv(rows: Sequence, path):
    """Scatter points of training bias versus predicted bias toward the reference gender."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["output", "b_train", "b_pred"])
        for o, bt, bp, _, _ in rows:
            w.writerow([o, "" if bt is None else repr(bt), "" if bp is None else repr(bp)])

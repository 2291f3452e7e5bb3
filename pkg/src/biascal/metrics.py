"""Gender co-occurrence counts, bias scores, bias amplification and task metrics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import MisalignedCorpora, MismatchedDomains, UnknownGender, UnknownOutput
from .schema import Assignment, Family, OutputSchema

__all__ = [
    "CooccurrenceCounts", "BiasTable", "count_cooccurrences", "bias_score", "bias_table",
    "mean_bias_amplification", "count_margin_violations", "top1_role_accuracy",
    "average_precision", "top1_map",
]


@dataclass(frozen=True)
class CooccurrenceCounts:
    outputs: tuple
    genders: tuple
    counts: Mapping = field(default_factory=dict)

    def get(self, output: str, gender: str) -> int:
        return self.counts.get((output, gender), 0)

    def row_total(self, output: str) -> int:
        return sum(self.get(output, g) for g in self.genders)


@dataclass(frozen=True)
class BiasTable:
    """Bias scores ``b(o, g)``; a value of ``None`` marks an undefined row."""

    outputs: tuple
    genders: tuple
    bias: Mapping = field(default_factory=dict)

    def get(self, output: str, gender: str) -> Optional[float]:
        return self.bias.get((output, gender))

    def defined(self, output: str) -> bool:
        return self.bias.get((output, self.genders[0])) is not None

    @classmethod
    def from_reference(cls, ref_bias: Mapping, genders=("man", "woman")) -> "BiasTable":
        """Two-gender table from bias toward the first gender; ``None`` stays undefined."""
        if len(genders) != 2:
            raise ValueError("from_reference needs exactly two genders")
        bias = {}
        for o, b in ref_bias.items():
            bias[(o, genders[0])] = b
            bias[(o, genders[1])] = None if b is None else 1.0 - b
        return cls(tuple(ref_bias), tuple(genders), bias)


def count_cooccurrences(assignments: Sequence[Assignment], schema: OutputSchema) -> CooccurrenceCounts:
    """Count how often each output co-occurs with each gender.

    VSRL predictions count once per gender whose marker appears among the
    role fills of the chosen verb; predictions without a marker count
    nothing.  MLC predictions count once per included object.
    """
    counts = {}
    if schema.family is Family.VSRL:
        for a in assignments:
            markers = schema.gender_markers.get(a.verb, {})
            for g in schema.genders:
                pairs = markers.get(g, ())
                if any((r, n) in pairs for r, n in a.role_fills.items()):
                    counts[(a.verb, g)] = counts.get((a.verb, g), 0) + 1
    else:
        for a in assignments:
            for c in a.objects:
                counts[(c, a.gender)] = counts.get((c, a.gender), 0) + 1
    return CooccurrenceCounts(schema.outputs, schema.genders, counts)


def bias_score(counts: CooccurrenceCounts, output: str, gender: str) -> Optional[float]:
    if output not in counts.outputs:
        raise UnknownOutput(output)
    if gender not in counts.genders:
        raise UnknownGender(gender)
    total = counts.row_total(output)
    if total == 0:
        return None
    return counts.get(output, gender) / total


def bias_table(counts: CooccurrenceCounts) -> BiasTable:
    bias = {}
    for o in counts.outputs:
        for g in counts.genders:
            bias[(o, g)] = bias_score(counts, o, g)
    return BiasTable(counts.outputs, counts.genders, bias)


def _check_domains(train: BiasTable, pred: BiasTable):
    if tuple(train.outputs) != tuple(pred.outputs) or tuple(train.genders) != tuple(pred.genders):
        raise MismatchedDomains("bias tables cover different outputs or genders")


def amplification_terms(train: BiasTable, pred: BiasTable) -> dict:
    """Per (output, gender) contribution ``b_pred - b_train`` over gender-favoring pairs."""
    _check_domains(train, pred)
    threshold = 1.0 / len(train.genders)
    terms = {}
    for o in train.outputs:
        for g in train.genders:
            b_star = train.get(o, g)
            if b_star is None or not b_star > threshold:
                continue
            b_tilde = pred.get(o, g)
            # an output never predicted with any gender contributes nothing
            terms[(o, g)] = 0.0 if b_tilde is None else b_tilde - b_star
    return terms


def mean_bias_amplification(train: BiasTable, pred: BiasTable) -> float:
    terms = amplification_terms(train, pred)
    return sum(terms.values()) / len(train.outputs)


def count_margin_violations(train: BiasTable, pred: BiasTable, margin: float):
    """Outputs whose predicted bias toward the first gender leaves the margin band.

    Returns
    -------
    (count, outputs)
    """
    if margin < 0:
        raise ValueError("margin must be non-negative")
    _check_domains(train, pred)
    g_ref = train.genders[0]
    bad = []
    for o in train.outputs:
        b_star, b_tilde = train.get(o, g_ref), pred.get(o, g_ref)
        if b_star is None or b_tilde is None:
            continue
        if abs(b_tilde - b_star) > margin:
            bad.append(o)
    return len(bad), bad


def top1_role_accuracy(pred: Sequence[Assignment], gold: Sequence[Assignment]) -> float:
    """Fraction of gold role slots whose verb and noun were both predicted correctly."""
    if [a.instance_id for a in pred] != [a.instance_id for a in gold]:
        raise MisalignedCorpora("predictions and gold are not aligned by instance_id")
    slots = hits = 0
    for p, g in zip(pred, gold):
        slots += len(g.role_fills)
        if p.verb != g.verb:
            continue
        hits += sum(1 for r, n in g.role_fills.items() if p.role_fills.get(r) == n)
    return hits / slots if slots else 0.0


def average_precision(scores, labels) -> float:
    """AP of a ranking by descending score; ties keep input order."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    order = np.argsort(-scores, kind="stable")
    ranked = labels[order]
    n_pos = ranked.sum()
    if n_pos == 0:
        return float("nan")
    hits = np.cumsum(ranked)
    ranks = np.arange(1, len(ranked) + 1)
    return float(np.sum((hits / ranks)[ranked]) / n_pos)


def top1_map(pred_scores: Sequence[Mapping], gold: Sequence[Assignment], objects: Sequence[str],
             instance_ids: Optional[Sequence[str]] = None) -> float:
    """Mean over object categories of the AP of ranking instances by ``pred_scores``.

    ``pred_scores[i][c]`` is the ranking score of object ``c`` for instance
    ``i``.  Categories without any gold positive are left out of the mean.
    """
    if len(pred_scores) != len(gold):
        raise MisalignedCorpora("prediction scores and gold differ in length")
    if instance_ids is not None and list(instance_ids) != [a.instance_id for a in gold]:
        raise MisalignedCorpora("predictions and gold are not aligned by instance_id")
    aps = []
    for c in objects:
        labels = [c in a.objects for a in gold]
        if not any(labels):
            continue
        aps.append(average_precision([s[c] for s in pred_scores], labels))
    return float(np.mean(aps)) if aps else float("nan")

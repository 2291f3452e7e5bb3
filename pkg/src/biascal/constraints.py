"""Corpus-level gender-ratio constraints in linear form.

A band ``L <= M / (M + W) <= U`` on the realized ratio of an output is
rewritten with the denominator cleared::

    (1 - U) * M - U * W <= 0        (upper side)
    (L - 1) * M + L * W <= 0        (lower side)

where ``M`` and ``W`` count the active reference-gender and other-gender
marker indicators summed over the whole corpus.  With a zero bound, an output
that is never predicted satisfies both sides automatically.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .errors import UndefinedTrainBias, UnknownKey
from .metrics import BiasTable
from .schema import Assignment, OutputSchema

__all__ = [
    "LinearConstraint", "ConstraintSet", "build_margin_constraints", "indicator_counts",
    "row_value", "constraint_slack", "slacks", "ratio_of",
]


@dataclass(frozen=True)
class LinearConstraint:
    """One row ``coeffs . sum_i y_i - bound <= 0``; ``coeffs`` is an ordered tuple of (key, value)."""

    id: str
    coeffs: tuple
    bound: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple((tuple(k), float(v)) for k, v in self.coeffs))
        if not self.coeffs:
            raise ValueError(f"constraint {self.id!r} has no coefficients")


@dataclass(frozen=True)
class ConstraintSet:
    constraints: tuple = ()
    margin: float = 0.0
    source_bias: Optional[BiasTable] = None
    bands: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        ids = [c.id for c in self.constraints]
        if len(set(ids)) != len(ids):
            raise ValueError("constraint ids must be unique")

    def __len__(self):
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    @property
    def ids(self) -> list:
        return [c.id for c in self.constraints]

    def keys(self) -> list:
        """Distinct indicator keys used by any row, in first-use order."""
        seen = {}
        for c in self.constraints:
            for k, _ in c.coeffs:
                seen.setdefault(k, None)
        return list(seen)

    def check_keys(self, schema: OutputSchema):
        valid = set(schema.indicator_keys())
        for c in self.constraints:
            for k, _ in c.coeffs:
                if k not in valid:
                    raise UnknownKey(f"constraint {c.id!r} uses unknown key {k!r}")


def build_margin_constraints(schema: OutputSchema, train_bias: BiasTable, margin: float,
                             targets: Optional[Iterable[str]] = None) -> ConstraintSet:
    """Linear rows keeping each target's predicted ratio within ``margin`` of its training bias.

    Bias is taken toward the first gender of the schema; every other gender
    counts in the denominator only.  Sides that clamp to 0 or 1 are vacuous
    and are not emitted.
    """
    if margin < 0:
        raise ValueError("margin must be non-negative")
    g_ref, others = schema.genders[0], schema.genders[1:]
    if targets is None:
        targets = [o for o in schema.outputs if train_bias.get(o, g_ref) is not None]
    else:
        targets = list(targets)
        for o in targets:
            if train_bias.get(o, g_ref) is None:
                raise UndefinedTrainBias(f"no gendered training occurrences for {o!r}")

    rows, bands = [], {}
    for o in targets:
        b_star = train_bias.get(o, g_ref)
        upper, lower = min(1.0, b_star + margin), max(0.0, b_star - margin)
        bands[o] = (lower, upper)
        ref_keys = schema.marker_keys(o, g_ref)
        other_keys = [k for g in others for k in schema.marker_keys(o, g)]
        if not ref_keys and not other_keys:
            continue
        if upper < 1.0:
            coeffs = [(k, 1.0 - upper) for k in ref_keys] + [(k, -upper) for k in other_keys]
            rows.append(LinearConstraint(f"{o}:upper", coeffs, 0.0))
        if lower > 0.0:
            coeffs = [(k, lower - 1.0) for k in ref_keys] + [(k, lower) for k in other_keys]
            rows.append(LinearConstraint(f"{o}:lower", coeffs, 0.0))
    return ConstraintSet(tuple(rows), margin, train_bias, bands)


def indicator_counts(assignments: Iterable[Assignment]) -> Counter:
    """How many assignments activate each indicator key."""
    counts = Counter()
    for a in assignments:
        counts.update(a.indicators())
    return counts


def row_value(constraint: LinearConstraint, counts: Mapping) -> float:
    """``A_j . sum_i y_i - b_j`` from aggregated indicator counts.

    Terms are accumulated left to right in row order; every caller goes
    through here so slacks agree bit for bit.
    """
    total = 0.0
    for k, v in constraint.coeffs:
        n = counts.get(k, 0)
        if n:
            total = total + v * n
    return total - constraint.bound


def constraint_slack(constraint: LinearConstraint, assignments: Sequence[Assignment]) -> float:
    """Positive slack means the constraint is violated."""
    return row_value(constraint, indicator_counts(assignments))


def slacks(constraints: ConstraintSet, counts: Mapping) -> list:
    return [row_value(c, counts) for c in constraints]


def ratio_of(schema: OutputSchema, output: str, assignments: Sequence[Assignment]) -> Optional[float]:
    """Realized share of the first gender among gendered predictions of ``output``."""
    counts = indicator_counts(assignments)
    ref = sum(counts.get(k, 0) for k in schema.marker_keys(output, schema.genders[0]))
    rest = sum(counts.get(k, 0) for g in schema.genders[1:] for k in schema.marker_keys(output, g))
    if ref + rest == 0:
        return None
    return ref / (ref + rest)

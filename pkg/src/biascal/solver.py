"""Corpus-level constrained MAP inference by Lagrangian relaxation.

Each iteration decodes every instance under the current multipliers, sums
the active indicators over the corpus, evaluates every constraint row and
takes a projected subgradient step::

    lam <- max(0, lam + eta * (A sum_i y_i - b))

The loop stops as soon as every slack is within tolerance, or after
``max_iters`` iterations.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .constraints import ConstraintSet, row_value
from .decoder import DenseCorpus, PenaltyView
from .errors import ConfigInvalid
from .schema import Corpus

__all__ = [
    "SolverConfig", "Status", "IterationRecord", "DualState", "CalibrationResult",
    "dual_update", "dual_objective", "calibrate", "write_trace_csv",
]


@dataclass(frozen=True)
class SolverConfig:
    eta: float = 0.1
    max_iters: int = 100
    margin: float = 0.05
    tolerance: float = 0.0
    workers: int = 1

    def validate(self):
        if not (isinstance(self.eta, (int, float)) and math.isfinite(self.eta) and self.eta > 0):
            raise ConfigInvalid(f"eta must be a positive finite number, got {self.eta!r}")
        if not isinstance(self.max_iters, int) or self.max_iters < 1:
            raise ConfigInvalid(f"max_iters must be a positive integer, got {self.max_iters!r}")
        if not self.margin >= 0:
            raise ConfigInvalid(f"margin must be non-negative, got {self.margin!r}")
        if not self.tolerance >= 0:
            raise ConfigInvalid(f"tolerance must be non-negative, got {self.tolerance!r}")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigInvalid(f"workers must be a positive integer, got {self.workers!r}")


class Status(str, Enum):
    CONVERGED = "Converged"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class IterationRecord:
    """One outer iteration; ``lam`` is the multiplier vector the decode used."""

    iteration: int
    dual_objective: float
    num_violations: int
    max_slack: float
    lam: tuple
    slacks: tuple
    primal_objective: float

    @property
    def lam_norm(self) -> float:
        return math.sqrt(sum(x * x for x in self.lam))


@dataclass
class DualState:
    lam: np.ndarray
    iteration: int = 0
    trace: list = field(default_factory=list)
    status: Optional[Status] = None


@dataclass
class CalibrationResult:
    assignments: list
    dual: DualState
    residual: list
    constraint_ids: list
    final_slacks: list
    ranking: Optional[list] = None

    @property
    def status(self) -> Status:
        return self.dual.status

    @property
    def objective(self) -> float:
        total = 0.0
        for a in self.assignments:
            total = total + a.score
        return total

    def certified(self) -> bool:
        """Converged with zero slack on every constraint whose multiplier is positive."""
        if self.status is not Status.CONVERGED:
            return False
        return all(s == 0.0 for lam_j, s in zip(self.dual.lam.tolist(), self.final_slacks) if lam_j > 0)


def dual_update(lam, slacks, eta: float) -> np.ndarray:
    """Projected subgradient step on the multipliers; returns a new array."""
    lam = np.asarray(lam, dtype=float)
    slacks = np.asarray(slacks, dtype=float)
    return np.maximum(0.0, lam + eta * slacks)


def _sum(values) -> float:
    total = 0.0
    for v in values:
        total = total + v
    return total


def _dual_value(penalized: Sequence[float], constraints: ConstraintSet, lam) -> float:
    value = _sum(penalized)
    for lam_j, row in zip(np.asarray(lam, dtype=float).tolist(), constraints):
        value = value + lam_j * row.bound
    return value


def dual_objective(corpus: Corpus, constraints: ConstraintSet, lam, workers: int = 1,
                   dense: Optional[DenseCorpus] = None) -> float:
    """Lagrangian dual ``sum_i max_y [f(y, i) - penalty . y] + lam . b``."""
    dense = dense if dense is not None else DenseCorpus(corpus)
    decoded = dense.decode(PenaltyView(constraints, lam), workers)
    return _dual_value(decoded.penalized.tolist(), constraints, lam)


def calibrate(corpus: Corpus, constraints: ConstraintSet, config: SolverConfig = SolverConfig()) -> CalibrationResult:
    config.validate()
    constraints.check_keys(corpus.schema)
    dense = DenseCorpus(corpus)
    keys = constraints.keys()
    lam = np.zeros(len(constraints))
    state = DualState(lam=lam)

    for t in range(1, config.max_iters + 1):
        penalties = PenaltyView(constraints, lam)
        decoded = dense.decode(penalties, config.workers)
        counts = dense.count_indicators(decoded, keys)
        slack = [row_value(row, counts) for row in constraints]
        violated = [s > config.tolerance for s in slack]
        state.trace.append(IterationRecord(
            iteration=t,
            dual_objective=_dual_value(decoded.penalized.tolist(), constraints, lam),
            num_violations=sum(violated),
            max_slack=max(slack) if slack else -math.inf,
            lam=tuple(lam.tolist()),
            slacks=tuple(slack),
            primal_objective=_sum(decoded.raw.tolist()),
        ))
        state.iteration = t
        state.lam = lam
        if not any(violated):
            state.status = Status.CONVERGED
            break
        if t == config.max_iters:
            state.status = Status.ITERATION_LIMIT
            break
        lam = dual_update(lam, slack, config.eta)

    residual = [(row.id, s) for row, s in zip(constraints, slack) if s > config.tolerance]
    ranking = None
    if corpus.schema.family.value == "MLC":
        ranking = dense.object_ranking(decoded, penalties)
    return CalibrationResult(dense.assignments(decoded), state, residual,
                             constraints.ids, list(slack), ranking)


def write_trace_csv(state: DualState, path_or_file):
    """Write iteration, dual_objective, num_violations, max_slack, l2(lambda) rows."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "dual_objective", "num_violations", "max_slack", "l2_lambda"])
        for rec in state.trace:
            w.writerow([rec.iteration, repr(rec.dual_objective), rec.num_violations,
                        repr(rec.max_slack), repr(rec.lam_norm)])
    finally:
        if own:
            fh.close()

"""Brute-force constrained joint optimizer for tiny corpora (test ground truth)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constraints import ConstraintSet
from .errors import BudgetExceeded
from .schema import Corpus, enumerate_assignments

__all__ = ["OracleBudget", "ExactSolution", "solve_exact", "unconstrained_max"]

_CHUNK = 1 << 16


@dataclass(frozen=True)
class OracleBudget:
    max_joint_combinations: int = 10**6

    def __post_init__(self):
        if self.max_joint_combinations <= 0:
            raise ValueError("budget must be positive")


@dataclass(frozen=True)
class ExactSolution:
    """``feasible`` is False when no joint assignment satisfies the constraints."""

    feasible: bool
    assignments: Optional[tuple] = None
    objective: Optional[float] = None


def _per_instance(corpus: Corpus, budget: OracleBudget):
    sizes = [corpus.schema.cardinality()] * len(corpus.instances)
    total = math.prod(sizes)
    if total > budget.max_joint_combinations:
        raise BudgetExceeded(total, budget.max_joint_combinations)
    return [enumerate_assignments(corpus.schema, t, limit=budget.max_joint_combinations)
            for t in corpus.instances]


def unconstrained_max(corpus: Corpus, budget: OracleBudget = OracleBudget()) -> float:
    """Sum of per-instance enumeration maxima."""
    if corpus.schema.cardinality() > budget.max_joint_combinations:
        raise BudgetExceeded(corpus.schema.cardinality(), budget.max_joint_combinations)
    total = 0.0
    for t in corpus.instances:
        total = total + max(a.score for a in enumerate_assignments(corpus.schema, t, budget.max_joint_combinations))
    return total


def solve_exact(corpus: Corpus, constraints: ConstraintSet, budget: OracleBudget = OracleBudget()) -> ExactSolution:
    """Exhaustive search over the joint space of all instances.

    Combinations are visited in lexicographic order of their per-instance
    index tuples and the first maximizer wins.  Constraint rows are evaluated
    from aggregated integer counts with the same left-to-right accumulation
    as the solver.
    """
    options = _per_instance(corpus, budget)
    keys = constraints.keys()
    key_pos = {k: p for p, k in enumerate(keys)}
    scores = [np.array([a.score for a in opts]) for opts in options]
    hits = []
    for opts in options:
        h = np.zeros((len(opts), len(keys)), dtype=np.int64)
        for r, a in enumerate(opts):
            for k in a.indicators():
                if k in key_pos:
                    h[r, key_pos[k]] += 1
        hits.append(h)

    sizes = [len(o) for o in options]
    total = math.prod(sizes)
    best_val, best_flat = None, None
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(total, start + _CHUNK))
        idx = np.unravel_index(flat, sizes) if sizes else ()
        objective = np.zeros(len(flat))
        counts = np.zeros((len(flat), len(keys)), dtype=np.int64)
        for i in range(len(sizes)):
            objective = objective + scores[i][idx[i]]
            counts += hits[i][idx[i]]
        feasible = np.ones(len(flat), dtype=bool)
        for row in constraints:
            value = np.zeros(len(flat))
            for k, v in row.coeffs:
                n = counts[:, key_pos[k]]
                value = np.where(n != 0, value + v * n, value)
            feasible &= (value - row.bound) <= 0.0
        if not feasible.any():
            continue
        masked = np.where(feasible, objective, -np.inf)
        j = int(np.argmax(masked))
        if best_val is None or masked[j] > best_val:
            best_val, best_flat = float(masked[j]), int(flat[j])

    if best_val is None:
        return ExactSolution(False)
    choice = np.unravel_index(best_flat, sizes) if sizes else ()
    chosen = tuple(options[i][int(choice[i])] for i in range(len(sizes)))
    return ExactSolution(True, chosen, best_val)

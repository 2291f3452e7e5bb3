"""Exact per-instance MAP decoding under multiplier-penalized scores.

``decode_vsrl`` and ``decode_mlc`` work on a single score table and are the
readable reference.  ``decode_corpus`` packs a corpus into dense arrays once
(:class:`DenseCorpus`) and runs the selected kernel backend, optionally over
several threads.  Both paths perform the same floating-point operations in
the same order, so they return identical assignments.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .constraints import ConstraintSet
from .errors import BiasCalError, UnknownKey
from .schema import Assignment, Corpus, Family, OutputSchema, ScoreTable, assignment_score

__all__ = [
    "PenaltyView", "adjusted_score", "penalized_score", "decode_vsrl", "decode_mlc",
    "decode_instance", "decode_corpus", "DenseCorpus", "DenseDecode",
]


class PenaltyView:
    """Per-indicator penalty ``sum_j lambda_j * A_j[key]`` for fixed multipliers."""

    def __init__(self, constraints: Optional[ConstraintSet] = None, lam: Optional[Sequence[float]] = None):
        self.constraints = constraints if constraints is not None else ConstraintSet()
        n = len(self.constraints)
        self.lam = np.zeros(n) if lam is None else np.asarray(lam, dtype=float).copy()
        if self.lam.shape != (n,):
            raise ValueError(f"expected {n} multipliers, got shape {self.lam.shape}")
        if np.any(self.lam < 0):
            raise ValueError("multipliers must be non-negative")
        self.lam.setflags(write=False)
        penalty = {}
        for lam_j, row in zip(self.lam.tolist(), self.constraints):
            if lam_j == 0.0:
                continue
            for k, v in row.coeffs:
                penalty[k] = penalty.get(k, 0.0) + lam_j * v
        self.penalty = penalty

    @classmethod
    def zero(cls):
        return cls()

    def __getitem__(self, key) -> float:
        return self.penalty.get(key, 0.0)


def adjusted_score(instance: ScoreTable, key: tuple, penalties: Optional[PenaltyView] = None) -> float:
    try:
        raw = instance.score_of(key)
    except KeyError:
        raise UnknownKey(f"{key!r} not in score table {instance.instance_id!r}") from None
    if penalties is None:
        return raw
    return raw - penalties[key]


def penalized_score(schema: OutputSchema, instance: ScoreTable, assignment: Assignment,
                    penalties: Optional[PenaltyView] = None) -> float:
    """Lagrangian contribution of one assignment: model score minus its penalty."""
    total = assignment_score(schema, instance, assignment)
    if penalties is not None:
        for k in assignment.indicators():
            total -= penalties[k]
    return total


def decode_vsrl(schema: OutputSchema, instance: ScoreTable,
                penalties: Optional[PenaltyView] = None) -> Assignment:
    """Best verb and per-role nouns under adjusted scores; ties go to the lowest schema index."""
    best_total, best_verb, best_fills = None, None, None
    for verb in schema.verbs:
        total = adjusted_score(instance, (verb.name,), penalties)
        fills = {}
        for role in verb.roles:
            top, top_noun = None, None
            for noun in role.nouns:
                a = adjusted_score(instance, (verb.name, role.name, noun), penalties)
                if top is None or a > top:
                    top, top_noun = a, noun
            fills[role.name] = top_noun
            total = total + top
        if best_total is None or total > best_total:
            best_total, best_verb, best_fills = total, verb, fills
    raw = instance.verb_scores[best_verb.name]
    for role in best_verb.roles:
        raw = raw + instance.role_scores[(best_verb.name, role.name, best_fills[role.name])]
    return Assignment(instance.instance_id, verb=best_verb.name, role_fills=best_fills, score=raw)


def decode_mlc(schema: OutputSchema, instance: ScoreTable,
               penalties: Optional[PenaltyView] = None) -> Assignment:
    """Best gender, with each object included iff its adjusted score is positive."""
    best_total, best_gender, best_objs = None, None, None
    for g in schema.genders:
        total = adjusted_score(instance, (g,), penalties)
        objs = []
        for c in schema.objects:
            a = adjusted_score(instance, (g, c), penalties)
            if a > 0.0:
                objs.append(c)
                total = total + a
        if best_total is None or total > best_total:
            best_total, best_gender, best_objs = total, g, objs
    raw = instance.gender_scores[best_gender]
    for c in best_objs:
        raw = raw + instance.object_scores[(best_gender, c)]
    return Assignment(instance.instance_id, gender=best_gender, objects=tuple(best_objs), score=raw)


def decode_instance(schema: OutputSchema, instance: ScoreTable,
                    penalties: Optional[PenaltyView] = None) -> Assignment:
    if schema.family is Family.VSRL:
        return decode_vsrl(schema, instance, penalties)
    return decode_mlc(schema, instance, penalties)


@dataclass
class DenseDecode:
    """Decoded corpus in index form.

    ``choice`` holds verb (VSRL) or gender (MLC) indices; ``parts`` holds
    noun indices per role slot or object inclusion flags.
    """

    choice: np.ndarray
    parts: np.ndarray
    penalized: np.ndarray
    raw: np.ndarray


class DenseCorpus:
    """A corpus packed into C-contiguous float64 arrays for the kernels.

    VSRL scores live in ``(I, V)`` and ``(I, V, R, N)`` arrays with ``R`` and
    ``N`` the largest role and noun counts.  Missing nouns are ``-inf``;
    a missing role has a single zero-score noun so it adds exactly ``0.0``.
    """

    def __init__(self, corpus: Corpus):
        schema = self.schema = corpus.schema
        self.instance_ids = [t.instance_id for t in corpus.instances]
        n = len(corpus.instances)
        self.index = {}
        if schema.family is Family.VSRL:
            V = len(schema.verbs)
            R = max(len(v.roles) for v in schema.verbs)
            N = max(len(r.nouns) for v in schema.verbs for r in v.roles)
            self.n_roles = np.array([len(v.roles) for v in schema.verbs])
            self.head = np.zeros((n, V))
            self.body = np.full((n, V, R, N), -np.inf)
            for vi, v in enumerate(schema.verbs):
                self.index[(v.name,)] = (vi,)
                self.body[:, vi, len(v.roles):, 0] = 0.0
                for ri, r in enumerate(v.roles):
                    for ni, noun in enumerate(r.nouns):
                        self.index[(v.name, r.name, noun)] = (vi, ri, ni)
            for i, t in enumerate(corpus.instances):
                self.head[i] = [t.verb_scores[v.name] for v in schema.verbs]
                for key, score in t.role_scores.items():
                    self.body[(i,) + self.index[key]] = score
        else:
            G, C = len(schema.genders), len(schema.objects)
            self.head = np.zeros((n, G))
            self.body = np.zeros((n, G, C))
            for gi, g in enumerate(schema.genders):
                self.index[(g,)] = (gi,)
                for ci, c in enumerate(schema.objects):
                    self.index[(g, c)] = (gi, ci)
            for i, t in enumerate(corpus.instances):
                self.head[i] = [t.gender_scores[g] for g in schema.genders]
                for key, score in t.object_scores.items():
                    self.body[(i,) + self.index[key]] = score
        self.head = np.ascontiguousarray(self.head)
        self.body = np.ascontiguousarray(self.body)

    def __len__(self):
        return len(self.instance_ids)

    def penalty_arrays(self, penalties: Optional[PenaltyView]):
        head_pen = np.zeros(self.head.shape[1:])
        body_pen = np.zeros(self.body.shape[1:])
        if penalties is not None:
            for k, v in penalties.penalty.items():
                idx = self.index[k]
                if len(idx) == 1:
                    head_pen[idx] = v
                else:
                    body_pen[idx] = v
        return head_pen, body_pen

    def decode(self, penalties: Optional[PenaltyView] = None, workers: int = 1, backend=None) -> DenseDecode:
        impl = backend if backend is not None else kernels
        head_pen, body_pen = self.penalty_arrays(penalties)
        n = len(self)
        choice = np.zeros(n, dtype=np.intp)
        penalized = np.zeros(n)
        if self.schema.family is Family.VSRL:
            parts = np.zeros((n, self.body.shape[2]), dtype=np.intp)
            fn = impl.vsrl_decode
        else:
            parts = np.zeros((n, self.body.shape[2]), dtype=np.uint8)
            fn = impl.mlc_decode

        def run(lo, hi):
            fn(self.head[lo:hi], self.body[lo:hi], head_pen, body_pen,
               choice[lo:hi], parts[lo:hi], penalized[lo:hi])

        bounds = np.linspace(0, n, max(1, min(workers, n)) + 1).astype(int)
        if len(bounds) <= 2:
            run(0, n)
        else:
            with ThreadPoolExecutor(max_workers=len(bounds) - 1) as pool:
                list(pool.map(run, bounds[:-1], bounds[1:]))
        return DenseDecode(choice, parts, penalized, self._raw_scores(choice, parts))

    def _raw_scores(self, choice, parts):
        rows = np.arange(len(choice))
        raw = self.head[rows, choice]
        if self.schema.family is Family.VSRL:
            for r in range(parts.shape[1]):
                raw = raw + self.body[rows, choice, r, parts[:, r]]
        else:
            for c in range(parts.shape[1]):
                raw = raw + np.where(parts[:, c] != 0, self.body[rows, choice, c], 0.0)
        return raw

    def count_indicators(self, decoded: DenseDecode, keys) -> dict:
        """Corpus-wide count of each requested indicator key."""
        choice, parts = decoded.choice, decoded.parts
        out = {}
        for k in keys:
            idx = self.index[k]
            if len(idx) == 1:
                out[k] = int(np.count_nonzero(choice == idx[0]))
            elif self.schema.family is Family.VSRL:
                vi, ri, ni = idx
                out[k] = int(np.count_nonzero((choice == vi) & (parts[:, ri] == ni)))
            else:
                gi, ci = idx
                out[k] = int(np.count_nonzero((choice == gi) & (parts[:, ci] != 0)))
        return out

    def assignments(self, decoded: DenseDecode) -> list:
        schema = self.schema
        out = []
        raw = decoded.raw.tolist()
        if schema.family is Family.VSRL:
            for i, (vi, nouns) in enumerate(zip(decoded.choice.tolist(), decoded.parts.tolist())):
                verb = schema.verbs[vi]
                fills = {r.name: r.nouns[nouns[ri]] for ri, r in enumerate(verb.roles)}
                out.append(Assignment(self.instance_ids[i], verb=verb.name, role_fills=fills, score=raw[i]))
        else:
            for i, (gi, mask) in enumerate(zip(decoded.choice.tolist(), decoded.parts.tolist())):
                objs = tuple(c for c, m in zip(schema.objects, mask) if m)
                out.append(Assignment(self.instance_ids[i], gender=schema.genders[gi], objects=objs, score=raw[i]))
        return out

    def object_ranking(self, decoded: DenseDecode, penalties: Optional[PenaltyView] = None) -> list:
        """MLC ranking scores: adjusted object scores under each instance's chosen gender."""
        _, body_pen = self.penalty_arrays(penalties)
        rows = np.arange(len(decoded.choice))
        adj = self.body[rows, decoded.choice] - body_pen[decoded.choice]
        return [dict(zip(self.schema.objects, row)) for row in adj.tolist()]


def decode_corpus(corpus: Corpus, penalties: Optional[PenaltyView] = None, workers: int = 1) -> list:
    """Per-instance MAP of every instance, in input order."""
    try:
        dense = DenseCorpus(corpus)
    except KeyError as exc:
        raise BiasCalError(f"score table does not match schema: missing {exc}") from None
    return dense.assignments(dense.decode(penalties, workers))

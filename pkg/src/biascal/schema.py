"""Structured output spaces, score tables, assignments and corpus validation.

Two output-space families are supported:

* ``VSRL``: one verb per instance, plus one noun for every role of that verb.
* ``MLC``: one gender per instance, plus any subset of object categories.

Scores are log-potentials, so the score of an assignment is the plain sum of
its component scores.  Indicator keys are tuples: ``(verb,)`` and
``(verb, role, noun)`` for VSRL, ``(gender,)`` and ``(gender, object)`` for MLC.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, Optional, Sequence

from .errors import CardinalityExceeded, InfeasibleAssignment

NULL_NOUN = "∅"
DEFAULT_GENDERS = ("man", "woman")


class Family(str, Enum):
    VSRL = "VSRL"
    MLC = "MLC"


@dataclass(frozen=True)
class RoleSpec:
    name: str
    nouns: tuple


@dataclass(frozen=True)
class VerbSpec:
    name: str
    roles: tuple

    def role(self, name: str) -> RoleSpec:
        for r in self.roles:
            if r.name == name:
                return r
        raise KeyError(name)


@dataclass(frozen=True)
class OutputSchema:
    """The structured output space of one prediction task.

    ``gender_markers`` maps verb -> gender -> frozenset of (role, noun) pairs
    whose presence attributes that gender to a VSRL prediction.  It is unused
    for MLC, where the gender variable is itself the marker.
    """

    family: Family
    verbs: tuple = ()
    objects: tuple = ()
    genders: tuple = DEFAULT_GENDERS
    gender_markers: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "verbs", tuple(self.verbs))
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "genders", tuple(self.genders))

    @property
    def outputs(self) -> tuple:
        """Names of the outputs whose gender ratio is tracked (verbs or objects)."""
        if self.family is Family.VSRL:
            return tuple(v.name for v in self.verbs)
        return self.objects

    def verb(self, name: str) -> VerbSpec:
        for v in self.verbs:
            if v.name == name:
                return v
        raise KeyError(name)

    def marker_keys(self, output: str, gender: str) -> list:
        """Indicator keys that attribute ``gender`` to ``output``, in schema order."""
        if self.family is Family.MLC:
            return [(gender, output)]
        pairs = self.gender_markers.get(output, {}).get(gender, frozenset())
        keys = []
        for role in self.verb(output).roles:
            for noun in role.nouns:
                if (role.name, noun) in pairs:
                    keys.append((output, role.name, noun))
        return keys

    def indicator_keys(self) -> list:
        """Every indicator key of the output space, in deterministic order."""
        keys = []
        if self.family is Family.VSRL:
            for v in self.verbs:
                keys.append((v.name,))
                for r in v.roles:
                    keys.extend((v.name, r.name, n) for n in r.nouns)
        else:
            for g in self.genders:
                keys.append((g,))
                keys.extend((g, c) for c in self.objects)
        return keys

    def cardinality(self) -> int:
        if self.family is Family.VSRL:
            return sum(math.prod(len(r.nouns) for r in v.roles) for v in self.verbs)
        return len(self.genders) * 2 ** len(self.objects)


@dataclass(frozen=True)
class ScoreTable:
    instance_id: str
    verb_scores: Mapping = field(default_factory=dict)
    role_scores: Mapping = field(default_factory=dict)
    gender_scores: Mapping = field(default_factory=dict)
    object_scores: Mapping = field(default_factory=dict)

    def score_of(self, key: tuple) -> float:
        """Raw log-potential of one indicator key; ``KeyError`` when absent."""
        if len(key) == 1:
            if key[0] in self.verb_scores:
                return self.verb_scores[key[0]]
            return self.gender_scores[key[0]]
        if len(key) == 3:
            return self.role_scores[key]
        return self.object_scores[key]


@dataclass(frozen=True)
class Assignment:
    instance_id: str
    verb: Optional[str] = None
    role_fills: Mapping = field(default_factory=dict)
    gender: Optional[str] = None
    objects: tuple = ()
    score: float = 0.0

    def indicators(self) -> list:
        """Active indicator keys of this assignment."""
        if self.verb is not None:
            keys = [(self.verb,)]
            keys.extend((self.verb, r, n) for r, n in self.role_fills.items())
            return keys
        keys = [(self.gender,)]
        keys.extend((self.gender, c) for c in self.objects)
        return keys


@dataclass(frozen=True)
class Corpus:
    schema: OutputSchema
    instances: tuple = ()
    gold: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        if self.gold is not None:
            object.__setattr__(self, "gold", tuple(self.gold))


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"


def _duplicates(names: Sequence[str]) -> list:
    seen, dup = set(), []
    for n in names:
        if n in seen and n not in dup:
            dup.append(n)
        seen.add(n)
    return dup


def validate_schema(schema: OutputSchema) -> list:
    out = []
    if len(schema.genders) < 2:
        out.append(Violation("schema.genders", "at least two genders are required"))
    for d in _duplicates(schema.genders):
        out.append(Violation("schema.genders", f"duplicate gender {d!r}"))
    if schema.family is Family.MLC:
        for d in _duplicates(schema.objects):
            out.append(Violation("schema.objects", f"duplicate object {d!r}"))
        return out

    if not schema.verbs:
        out.append(Violation("schema.verbs", "no verbs"))
    for d in _duplicates([v.name for v in schema.verbs]):
        out.append(Violation("schema.verbs", f"duplicate verb {d!r}"))
    for v in schema.verbs:
        vpath = f"schema.verbs[{v.name}]"
        if not v.roles:
            out.append(Violation(vpath, "verb has no roles"))
        for d in _duplicates([r.name for r in v.roles]):
            out.append(Violation(vpath, f"duplicate role {d!r}"))
        for r in v.roles:
            if not r.nouns:
                out.append(Violation(f"{vpath}.roles[{r.name}]", "role has no candidate nouns"))
            for d in _duplicates(r.nouns):
                out.append(Violation(f"{vpath}.roles[{r.name}]", f"duplicate noun {d!r}"))

    verbs = {v.name: v for v in schema.verbs}
    for vname, by_gender in schema.gender_markers.items():
        mpath = f"schema.gender_markers[{vname}]"
        if vname not in verbs:
            out.append(Violation(mpath, f"unknown verb {vname!r}"))
            continue
        seen = {}
        for g, pairs in by_gender.items():
            if g not in schema.genders:
                out.append(Violation(f"{mpath}[{g}]", f"unknown gender {g!r}"))
            for role, noun in sorted(pairs):
                try:
                    known = noun in verbs[vname].role(role).nouns
                except KeyError:
                    known = False
                if not known:
                    out.append(Violation(f"{mpath}[{g}]", f"unknown (role, noun) pair ({role!r}, {noun!r})"))
                if (role, noun) in seen and seen[(role, noun)] != g:
                    out.append(Violation(mpath, f"({role!r}, {noun!r}) marks both {seen[(role, noun)]!r} and {g!r}"))
                seen[(role, noun)] = g
    return out


def _table_violations(schema: OutputSchema, table: ScoreTable, path: str) -> list:
    out = []
    if schema.family is Family.VSRL:
        expected = {(v.name,) for v in schema.verbs}
        expected_roles = {k for k in schema.indicator_keys() if len(k) == 3}
        got = {(v,) for v in table.verb_scores}
        got_roles = set(table.role_scores)
        sections = [("verb_scores", expected, got, table.verb_scores, lambda k: k[0]),
                    ("role_scores", expected_roles, got_roles, table.role_scores, lambda k: k)]
    else:
        expected = {(g,) for g in schema.genders}
        expected_obj = {(g, c) for g in schema.genders for c in schema.objects}
        got = {(g,) for g in table.gender_scores}
        got_obj = set(table.object_scores)
        sections = [("gender_scores", expected, got, table.gender_scores, lambda k: k[0]),
                    ("object_scores", expected_obj, got_obj, table.object_scores, lambda k: k)]
    for name, exp, have, scores, lookup in sections:
        for k in sorted(exp - have):
            out.append(Violation(f"{path}.{name}", f"missing key {k!r}"))
        for k in sorted(have - exp):
            out.append(Violation(f"{path}.{name}", f"unexpected key {k!r}"))
        for k in sorted(exp & have):
            value = scores[lookup(k)]
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                out.append(Violation(f"{path}.{name}", f"non-finite score at {k!r}"))
    return out


def assignment_violations(schema: OutputSchema, a: Assignment, path: str = "assignment") -> list:
    """Instance-wise feasibility problems of ``a`` under ``schema``."""
    out = []
    if schema.family is Family.VSRL:
        try:
            verb = schema.verb(a.verb)
        except KeyError:
            return [Violation(path, f"unknown verb {a.verb!r}")]
        roles = [r.name for r in verb.roles]
        if sorted(a.role_fills) != sorted(roles):
            out.append(Violation(path, f"role fills {sorted(a.role_fills)} do not match roles {roles} of {a.verb!r}"))
        for r in verb.roles:
            if r.name in a.role_fills and a.role_fills[r.name] not in r.nouns:
                out.append(Violation(path, f"noun {a.role_fills[r.name]!r} is not a candidate of role {r.name!r}"))
    else:
        if a.gender not in schema.genders:
            out.append(Violation(path, f"unknown gender {a.gender!r}"))
        for c in a.objects:
            if c not in schema.objects:
                out.append(Violation(path, f"unknown object {c!r}"))
        if len(set(a.objects)) != len(a.objects):
            out.append(Violation(path, "duplicate objects"))
    return out


def validate_corpus(corpus: Corpus) -> list:
    """Every invariant violation of ``corpus``; an empty list means valid."""
    schema = corpus.schema
    out = validate_schema(schema)
    if out:
        return out
    ids = [t.instance_id for t in corpus.instances]
    for d in _duplicates(ids):
        out.append(Violation("instances", f"duplicate instance_id {d!r}"))
    for t in corpus.instances:
        out.extend(_table_violations(schema, t, f"instances[{t.instance_id}]"))
    if corpus.gold is not None:
        gold_ids = [a.instance_id for a in corpus.gold]
        for d in _duplicates(gold_ids):
            out.append(Violation("gold", f"duplicate instance_id {d!r}"))
        # a gold-only corpus (no score tables) is a labelled training set
        if corpus.instances and gold_ids != ids:
            out.append(Violation("gold", "gold does not align 1:1 with instances by instance_id"))
        for a in corpus.gold:
            out.extend(assignment_violations(schema, a, f"gold[{a.instance_id}]"))
    return out


def assignment_score(schema: OutputSchema, instance: ScoreTable, assignment: Assignment) -> float:
    """Un-penalized model score of ``assignment``: the sum of its component scores."""
    problems = assignment_violations(schema, assignment)
    if problems:
        raise InfeasibleAssignment("; ".join(map(str, problems)))
    if schema.family is Family.VSRL:
        total = instance.verb_scores[assignment.verb]
        for role in schema.verb(assignment.verb).roles:
            total += instance.role_scores[(assignment.verb, role.name, assignment.role_fills[role.name])]
        return total
    total = instance.gender_scores[assignment.gender]
    for c in schema.objects:
        if c in assignment.objects:
            total += instance.object_scores[(assignment.gender, c)]
    return total


def iter_assignments(schema: OutputSchema, instance_id: str = "") -> Iterator[Assignment]:
    """All feasible assignments in lexicographic schema order, without scores."""
    if schema.family is Family.VSRL:
        for v in schema.verbs:
            names = [r.name for r in v.roles]
            for nouns in itertools.product(*(r.nouns for r in v.roles)):
                yield Assignment(instance_id, verb=v.name, role_fills=dict(zip(names, nouns)))
    else:
        for g in schema.genders:
            for mask in itertools.product((False, True), repeat=len(schema.objects)):
                objs = tuple(c for c, m in zip(schema.objects, mask) if m)
                yield Assignment(instance_id, gender=g, objects=objs)


def enumerate_assignments(schema: OutputSchema, instance: ScoreTable, limit: int = 10_000) -> list:
    """Every feasible assignment of ``instance`` exactly once, each with its score.

    Raises
    ------
    CardinalityExceeded
        If the output space holds more than ``limit`` assignments.
    """
    n = schema.cardinality()
    if n > limit:
        raise CardinalityExceeded(n, limit)
    out = []
    for a in iter_assignments(schema, instance.instance_id):
        out.append(Assignment(a.instance_id, a.verb, a.role_fills, a.gender, a.objects,
                              assignment_score(schema, instance, a)))
    return out

"""JSON interchange for corpora, predictions and constraint sets.

A corpus document has keys ``schema``, ``instances`` and optionally
``gold``.  A predictions document replaces ``instances`` with
``assignments`` and may carry ``gold``, ``constraints`` and, for MLC,
``object_ranking`` (instance_id -> object -> ranking score).
"""
from __future__ import annotations

import json
import math
from typing import Any, Optional

from .constraints import ConstraintSet, LinearConstraint
from .errors import CorpusInvalid
from .schema import (Assignment, Corpus, Family, OutputSchema, RoleSpec, ScoreTable, VerbSpec,
                     Violation, assignment_violations, validate_corpus, validate_schema)


class _Bad(Exception):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.violation = Violation(path, message)


def _req(obj, key, path, kind=None):
    if not isinstance(obj, dict):
        raise _Bad(path, "expected an object")
    if key not in obj:
        raise _Bad(path, f"missing key {key!r}")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise _Bad(f"{path}.{key}", f"expected {getattr(kind, '__name__', kind)}")
    return value


def _num(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _Bad(path, "expected a number")
    return float(value)


def _str_list(value, path):
    if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
        raise _Bad(path, "expected a list of strings")
    return tuple(value)


# schema

def schema_to_json(schema: OutputSchema) -> dict:
    doc = {"family": schema.family.value, "genders": list(schema.genders)}
    if schema.family is Family.VSRL:
        doc["verbs"] = [{"name": v.name, "roles": [{"name": r.name, "nouns": list(r.nouns)} for r in v.roles]}
                        for v in schema.verbs]
        markers = {}
        for v in schema.verbs:
            if v.name not in schema.gender_markers:
                continue
            by_gender = schema.gender_markers[v.name]
            markers[v.name] = {g: [list(p) for p in sorted(by_gender[g])] for g in schema.genders if g in by_gender}
        doc["gender_markers"] = markers
    else:
        doc["objects"] = list(schema.objects)
    return doc


def schema_from_json(doc: Any, path: str = "schema") -> OutputSchema:
    family = _req(doc, "family", path, str)
    try:
        family = Family(family)
    except ValueError:
        raise _Bad(f"{path}.family", f"unknown family {family!r}") from None
    genders = _str_list(doc.get("genders", ["man", "woman"]), f"{path}.genders")
    if family is Family.MLC:
        return OutputSchema(family, objects=_str_list(doc.get("objects", []), f"{path}.objects"), genders=genders)
    verbs = []
    for k, v in enumerate(_req(doc, "verbs", path, list)):
        vpath = f"{path}.verbs[{k}]"
        roles = []
        for j, r in enumerate(_req(v, "roles", vpath, list)):
            rpath = f"{vpath}.roles[{j}]"
            roles.append(RoleSpec(_req(r, "name", rpath, str), _str_list(_req(r, "nouns", rpath), f"{rpath}.nouns")))
        verbs.append(VerbSpec(_req(v, "name", vpath, str), tuple(roles)))
    markers = {}
    raw = doc.get("gender_markers", {})
    if not isinstance(raw, dict):
        raise _Bad(f"{path}.gender_markers", "expected an object")
    for verb, by_gender in raw.items():
        if not isinstance(by_gender, dict):
            raise _Bad(f"{path}.gender_markers.{verb}", "expected an object")
        markers[verb] = {}
        for g, pairs in by_gender.items():
            ppath = f"{path}.gender_markers.{verb}.{g}"
            if not isinstance(pairs, list) or not all(
                    isinstance(p, list) and len(p) == 2 and all(isinstance(x, str) for x in p) for p in pairs):
                raise _Bad(ppath, "expected a list of [role, noun] pairs")
            markers[verb][g] = frozenset(tuple(p) for p in pairs)
    return OutputSchema(family, verbs=tuple(verbs), genders=genders, gender_markers=markers)


# score tables and assignments

def table_to_json(schema: OutputSchema, t: ScoreTable) -> dict:
    doc = {"instance_id": t.instance_id}
    if schema.family is Family.VSRL:
        doc["verb_scores"] = {v.name: t.verb_scores[v.name] for v in schema.verbs}
        doc["role_scores"] = {v.name: {r.name: {n: t.role_scores[(v.name, r.name, n)] for n in r.nouns}
                                       for r in v.roles} for v in schema.verbs}
    else:
        doc["gender_scores"] = {g: t.gender_scores[g] for g in schema.genders}
        doc["object_scores"] = {g: {c: t.object_scores[(g, c)] for c in schema.objects} for g in schema.genders}
    return doc


def _nested(doc, depth, path):
    """Flatten a nested score map of the given depth into tuple keys."""
    out = {}
    if not isinstance(doc, dict):
        raise _Bad(path, "expected an object")
    for k, v in doc.items():
        if depth == 1:
            out[(k,)] = _num(v, f"{path}.{k}")
        else:
            for sub, value in _nested(v, depth - 1, f"{path}.{k}").items():
                out[(k,) + sub] = value
    return out


def table_from_json(doc: Any, path: str) -> ScoreTable:
    iid = _req(doc, "instance_id", path, str)
    verb = {k[0]: v for k, v in _nested(doc.get("verb_scores", {}), 1, f"{path}.verb_scores").items()}
    roles = _nested(doc.get("role_scores", {}), 3, f"{path}.role_scores")
    gender = {k[0]: v for k, v in _nested(doc.get("gender_scores", {}), 1, f"{path}.gender_scores").items()}
    objects = _nested(doc.get("object_scores", {}), 2, f"{path}.object_scores")
    return ScoreTable(iid, verb, roles, gender, objects)


def assignment_to_json(a: Assignment) -> dict:
    if a.verb is not None:
        return {"instance_id": a.instance_id, "verb": a.verb, "role_fills": dict(a.role_fills), "score": a.score}
    return {"instance_id": a.instance_id, "gender": a.gender, "objects": list(a.objects), "score": a.score}


def assignment_from_json(doc: Any, path: str) -> Assignment:
    iid = _req(doc, "instance_id", path, str)
    score = _num(doc.get("score", 0.0), f"{path}.score")
    if "verb" in doc:
        fills = doc.get("role_fills", {})
        if not isinstance(fills, dict) or not all(isinstance(v, str) for v in fills.values()):
            raise _Bad(f"{path}.role_fills", "expected an object of role -> noun")
        return Assignment(iid, verb=_req(doc, "verb", path, str), role_fills=dict(fills), score=score)
    return Assignment(iid, gender=_req(doc, "gender", path, str),
                      objects=_str_list(doc.get("objects", []), f"{path}.objects"), score=score)


def order_fills(schema: OutputSchema, a: Assignment) -> Assignment:
    """Re-key role fills into schema role order so indicator order is canonical."""
    if a.verb is None or schema.family is not Family.VSRL:
        return a
    try:
        verb = schema.verb(a.verb)
    except KeyError:
        return a
    ordered = {r.name: a.role_fills[r.name] for r in verb.roles if r.name in a.role_fills}
    ordered.update({r: n for r, n in a.role_fills.items() if r not in ordered})
    return Assignment(a.instance_id, a.verb, ordered, a.gender, a.objects, a.score)


# constraints

def constraints_to_json(cs: ConstraintSet) -> list:
    return [{"id": c.id, "coeffs": [[list(k), v] for k, v in c.coeffs], "bound": c.bound}
            for c in cs.constraints]


def constraints_from_json(rows: Any, margin: float = 0.0, path: str = "constraints") -> ConstraintSet:
    if not isinstance(rows, list):
        raise _Bad(path, "expected a list")
    out = []
    for k, row in enumerate(rows):
        rpath = f"{path}[{k}]"
        coeffs = []
        for j, pair in enumerate(_req(row, "coeffs", rpath, list)):
            if not (isinstance(pair, list) and len(pair) == 2 and isinstance(pair[0], list)):
                raise _Bad(f"{rpath}.coeffs[{j}]", "expected [key, value]")
            coeffs.append((tuple(pair[0]), _num(pair[1], f"{rpath}.coeffs[{j}]")))
        if not coeffs:
            raise _Bad(f"{rpath}.coeffs", "empty row")
        out.append(LinearConstraint(_req(row, "id", rpath, str), coeffs, _num(row.get("bound", 0.0), f"{rpath}.bound")))
    ids = [c.id for c in out]
    if len(set(ids)) != len(ids):
        raise _Bad(path, "duplicate constraint ids")
    return ConstraintSet(tuple(out), margin)


# documents

def corpus_to_json(corpus: Corpus) -> dict:
    doc = {"schema": schema_to_json(corpus.schema),
           "instances": [table_to_json(corpus.schema, t) for t in corpus.instances]}
    if corpus.gold is not None:
        doc["gold"] = [assignment_to_json(a) for a in corpus.gold]
    return doc


def corpus_from_json(doc: Any) -> Corpus:
    """Parse and validate a corpus document; raises :class:`CorpusInvalid`."""
    try:
        schema = schema_from_json(_req(doc, "schema", "$"))
        problems = validate_schema(schema)
        if problems:
            raise CorpusInvalid(problems)
        instances = tuple(table_from_json(t, f"instances[{k}]")
                          for k, t in enumerate(doc.get("instances", []) or []))
        gold = None
        if doc.get("gold") is not None:
            if not isinstance(doc["gold"], list):
                raise _Bad("gold", "expected a list")
            gold = tuple(order_fills(schema, assignment_from_json(a, f"gold[{k}]")) for k, a in enumerate(doc["gold"]))
    except _Bad as exc:
        raise CorpusInvalid([exc.violation]) from None
    corpus = Corpus(schema, instances, gold)
    problems = validate_corpus(corpus)
    if problems:
        raise CorpusInvalid(problems)
    return corpus


def predictions_to_json(schema: OutputSchema, assignments, gold=None, constraints: Optional[ConstraintSet] = None,
                        object_ranking=None) -> dict:
    doc = {"schema": schema_to_json(schema), "assignments": [assignment_to_json(a) for a in assignments]}
    if gold is not None:
        doc["gold"] = [assignment_to_json(a) for a in gold]
    if constraints is not None:
        doc["margin"] = constraints.margin
        doc["constraints"] = constraints_to_json(constraints)
    if object_ranking is not None:
        doc["object_ranking"] = {a.instance_id: r for a, r in zip(assignments, object_ranking)}
    return doc


class Predictions:
    """A parsed predictions document."""

    def __init__(self, schema, assignments, gold=None, constraints=None, object_ranking=None):
        self.schema = schema
        self.assignments = list(assignments)
        self.gold = None if gold is None else list(gold)
        self.constraints = constraints
        self.object_ranking = object_ranking


def predictions_from_json(doc: Any) -> Predictions:
    try:
        schema = schema_from_json(_req(doc, "schema", "$"))
        problems = validate_schema(schema)
        if problems:
            raise CorpusInvalid(problems)
        assignments = [order_fills(schema, assignment_from_json(a, f"assignments[{k}]"))
                       for k, a in enumerate(_req(doc, "assignments", "$", list))]
        gold = None
        if doc.get("gold") is not None:
            gold = [order_fills(schema, assignment_from_json(a, f"gold[{k}]")) for k, a in enumerate(doc["gold"])]
        cs = None
        if doc.get("constraints") is not None:
            cs = constraints_from_json(doc["constraints"], _num(doc.get("margin", 0.0), "margin"))
        ranking = None
        if doc.get("object_ranking") is not None:
            raw = _req(doc, "object_ranking", "$", dict)
            ranking = []
            for a in assignments:
                row = _req(raw, a.instance_id, "object_ranking", dict)
                ranking.append({c: _num(row.get(c), f"object_ranking.{a.instance_id}.{c}") for c in schema.objects})
    except _Bad as exc:
        raise CorpusInvalid([exc.violation]) from None
    problems = []
    ids = [a.instance_id for a in assignments]
    if len(set(ids)) != len(ids):
        problems.append(Violation("assignments", "duplicate instance_id"))
    for a in assignments:
        problems.extend(assignment_violations(schema, a, f"assignments[{a.instance_id}]"))
    if gold is not None:
        if [a.instance_id for a in gold] != ids:
            problems.append(Violation("gold", "gold does not align 1:1 with assignments by instance_id"))
        for a in gold:
            problems.extend(assignment_violations(schema, a, f"gold[{a.instance_id}]"))
    for a in assignments:
        if not math.isfinite(a.score):
            problems.append(Violation(f"assignments[{a.instance_id}]", "non-finite score"))
    if problems:
        raise CorpusInvalid(problems)
    return Predictions(schema, assignments, gold, cs, ranking)


def dump(doc: dict, path):
    """Write a document as compact UTF-8 JSON with a trailing newline."""
    text = json.dumps(doc, ensure_ascii=False, separators=(",", ":"))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")


def load(path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, UnicodeDecodeError) as exc:
        raise CorpusInvalid([Violation(str(path), f"cannot read file: {exc}")]) from None
    except json.JSONDecodeError as exc:
        raise CorpusInvalid([Violation(str(path), f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")]) from None


def load_corpus(path) -> Corpus:
    return corpus_from_json(load(path))


def load_predictions(path) -> Predictions:
    return predictions_from_json(load(path))

"""Builders for small hand-made and random corpora used across the tests."""
import numpy as np

from biascal.constraints import ConstraintSet, LinearConstraint, build_margin_constraints
from biascal.metrics import BiasTable
from biascal.schema import (NULL_NOUN, Assignment, Corpus, Family, OutputSchema, RoleSpec,
                            ScoreTable, VerbSpec)


def vsrl_schema(spec, markers=None, genders=("man", "woman")):
    """``spec`` maps verb -> list of (role, nouns)."""
    verbs = tuple(VerbSpec(v, tuple(RoleSpec(r, tuple(ns)) for r, ns in roles)) for v, roles in spec.items())
    return OutputSchema(Family.VSRL, verbs=verbs, genders=genders, gender_markers=markers or {})


def agent_markers(verbs, role="agent"):
    return {v: {"man": frozenset({(role, "man")}), "woman": frozenset({(role, "woman")})} for v in verbs}


def vsrl_table(iid, verb_scores, role_scores):
    """``role_scores`` maps verb -> role -> noun -> score."""
    flat = {(v, r, n): s for v, roles in role_scores.items() for r, nouns in roles.items() for n, s in nouns.items()}
    return ScoreTable(iid, verb_scores=dict(verb_scores), role_scores=flat)


def mlc_schema(objects, genders=("man", "woman")):
    return OutputSchema(Family.MLC, objects=tuple(objects), genders=genders)


def mlc_table(iid, gender_scores, object_scores):
    flat = {(g, c): s for g, objs in object_scores.items() for c, s in objs.items()}
    return ScoreTable(iid, gender_scores=dict(gender_scores), object_scores=flat)


def random_vsrl_schema(rng, max_verbs=3, max_roles=2, max_nouns=3, null=True, **_mlc_only):
    spec = {}
    for v in range(rng.integers(1, max_verbs + 1)):
        agent = ["man", "woman"]
        if null and rng.random() < 0.5:
            agent.append(NULL_NOUN)
        roles = [("agent", agent)]
        for r in range(rng.integers(0, max_roles)):
            roles.append((f"r{r}", [f"n{k}" for k in range(rng.integers(1, max_nouns + 1))]))
        spec[f"v{v}"] = roles
    return vsrl_schema(spec, agent_markers(spec))


def random_mlc_schema(rng, max_objects=4, **_vsrl_only):
    return mlc_schema([f"o{c}" for c in range(rng.integers(1, max_objects + 1))])


def random_table(rng, schema, iid, scale=1.0):
    if schema.family is Family.VSRL:
        verb_scores = {v.name: float(rng.normal(0, scale)) for v in schema.verbs}
        role_scores = {(v.name, r.name, n): float(rng.normal(0, scale))
                       for v in schema.verbs for r in v.roles for n in r.nouns}
        return ScoreTable(iid, verb_scores=verb_scores, role_scores=role_scores)
    gender_scores = {g: float(rng.normal(0, scale)) for g in schema.genders}
    object_scores = {(g, c): float(rng.normal(0, scale)) for g in schema.genders for c in schema.objects}
    return ScoreTable(iid, gender_scores=gender_scores, object_scores=object_scores)


def random_corpus(rng, n_instances, family=None, **kw):
    family = family or (Family.VSRL if rng.random() < 0.7 else Family.MLC)
    if family is Family.VSRL:
        schema = random_vsrl_schema(rng, **kw)
    else:
        schema = random_mlc_schema(rng, **kw)
    tables = tuple(random_table(rng, schema, f"i{k}") for k in range(n_instances))
    return Corpus(schema, tables)


def random_margin_constraints(rng, schema, dyadic=False):
    if dyadic:
        ref = {o: float(rng.choice([0.25, 0.5, 0.75])) for o in schema.outputs}
        margin = float(rng.choice([0.0, 0.25]))
    else:
        ref = {o: float(rng.uniform(0.1, 0.9)) for o in schema.outputs}
        margin = float(rng.uniform(0.0, 0.3))
    return build_margin_constraints(schema, BiasTable.from_reference(ref, schema.genders), margin)


def random_rows(rng, schema, n_rows=3):
    """Arbitrary signed rows over random indicator keys (not just ratio rows)."""
    keys = schema.indicator_keys()
    rows = []
    for j in range(n_rows):
        picks = rng.choice(len(keys), size=min(len(keys), int(rng.integers(1, 5))), replace=False)
        rows.append(LinearConstraint(f"row{j}", [(keys[p], float(rng.normal())) for p in picks],
                                     float(rng.normal())))
    return ConstraintSet(tuple(rows))


def vsrl_assignment(iid, verb, **fills):
    return Assignment(iid, verb=verb, role_fills=dict(fills))


def planted_agent_corpus(rng, n_instances, lean=1.0, nouns=("egg", "rice")):
    """One verb with an agent and a food role; scores lean toward a man agent.

    Integer-free continuous scores make flips happen one instance at a time
    as the multipliers grow.
    """
    schema = vsrl_schema({"act": [("agent", ["man", "woman"]), ("food", list(nouns))]}, agent_markers(["act"]))
    tables = []
    for k in range(n_instances):
        tables.append(vsrl_table(f"i{k}", {"act": 0.0}, {"act": {
            "agent": {"man": float(rng.uniform(0, lean)), "woman": 0.0},
            "food": {n: float(rng.normal()) for n in nouns}}}))
    return Corpus(schema, tuple(tables))


def reference_constraints(schema, b_star, margin):
    return build_margin_constraints(schema, BiasTable.from_reference({o: b_star for o in schema.outputs}), margin)

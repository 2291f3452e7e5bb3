"""Seeded synthetic corpora whose unconstrained MAP amplifies training bias.

Gold labels draw each output's reference-gender share from ``train_bias``.
Eval score tables give the gold assignment a one-unit lead over every
alternative, add ``amplification`` to the majority gender of each output and
add Gaussian noise.  Every random draw comes from a substream keyed by
``(seed, split, instance_id, purpose)``, so changing one knob never shifts
the draws behind another.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigInvalid
from .schema import (Assignment, Corpus, Family, OutputSchema, RoleSpec, ScoreTable, VerbSpec,
                     assignment_score)

__all__ = ["SynthConfig", "generate", "bias_range"]

AGENT = "agent"


def bias_range(lo: float, hi: float, n: int) -> tuple:
    """``n`` evenly spaced training biases from ``lo`` to ``hi``."""
    return tuple(np.linspace(lo, hi, n).tolist())


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 42
    n_instances: int = 2000
    n_verbs: int = 20
    roles_per_verb: int = 3
    nouns_per_role: int = 4
    train_bias: Union[float, Sequence[float]] = 0.75
    amplification: float = 1.0
    noise_sigma: float = 0.5
    family: Family = Family.VSRL
    n_train: Optional[int] = None
    score_scale: float = 10.0

    @property
    def biases(self) -> tuple:
        if isinstance(self.train_bias, (int, float)):
            return (float(self.train_bias),) * self.n_verbs
        return tuple(float(b) for b in self.train_bias)

    def validate(self):
        for name in ("n_instances", "n_verbs", "roles_per_verb", "nouns_per_role"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigInvalid(f"{name} must be a positive integer, got {value!r}")
        if self.n_train is not None and self.n_train < 1:
            raise ConfigInvalid("n_train must be positive")
        if Family(self.family) is Family.VSRL and self.nouns_per_role < 2:
            raise ConfigInvalid("VSRL needs at least two agent nouns (man, woman)")
        if not 0 <= self.seed < 2**64:
            raise ConfigInvalid("seed must fit in 64 bits")
        biases = self.biases
        if len(biases) != self.n_verbs:
            raise ConfigInvalid(f"train_bias has {len(biases)} entries for {self.n_verbs} outputs")
        if any(not 0.0 <= b <= 1.0 for b in biases):
            raise ConfigInvalid("train biases must lie in [0, 1]")
        if not self.score_scale > 0:
            raise ConfigInvalid("score_scale must be positive")
        if self.amplification < 0 or self.noise_sigma < 0:
            raise ConfigInvalid("amplification and noise_sigma must be non-negative")


def _stream(seed: int, *labels) -> np.random.Generator:
    digest = hashlib.blake2b("\x1f".join(map(str, labels)).encode(), digest_size=8).digest()
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, int.from_bytes(digest, "little")])))


def _vsrl_schema(cfg: SynthConfig) -> OutputSchema:
    agent_nouns = ("man", "woman") + tuple(f"agent{k}" for k in range(2, cfg.nouns_per_role))
    other_nouns = tuple(f"n{k}" for k in range(cfg.nouns_per_role))
    roles = (RoleSpec(AGENT, agent_nouns),) + tuple(
        RoleSpec(f"role{k}", other_nouns) for k in range(1, cfg.roles_per_verb))
    verbs = tuple(VerbSpec(f"verb{v:02d}", roles) for v in range(cfg.n_verbs))
    markers = {v.name: {"man": frozenset({(AGENT, "man")}), "woman": frozenset({(AGENT, "woman")})}
               for v in verbs}
    return OutputSchema(Family.VSRL, verbs=verbs, gender_markers=markers)


def _vsrl_gold(cfg, schema, split, iid, biases):
    rng = _stream(cfg.seed, split, iid, "gold")
    vi = int(rng.integers(len(schema.verbs)))
    verb = schema.verbs[vi]
    fills = {AGENT: "man" if rng.random() < biases[vi] else "woman"}
    for role in verb.roles[1:]:
        fills[role.name] = role.nouns[int(rng.integers(len(role.nouns)))]
    return Assignment(iid, verb=verb.name, role_fills=fills)


def _vsrl_scores(cfg, schema, iid, gold, biases):
    rng = _stream(cfg.seed, "eval", iid, "noise")
    V, R, N = len(schema.verbs), cfg.roles_per_verb, cfg.nouns_per_role
    z_verb = rng.standard_normal(V)
    z_role = rng.standard_normal((V, R, N))
    gold_nouns = [gold.role_fills[r.name] for r in schema.verbs[0].roles]
    verb_scores, role_scores = {}, {}
    for vi, verb in enumerate(schema.verbs):
        verb_scores[verb.name] = cfg.score_scale * float((verb.name == gold.verb) + cfg.noise_sigma * z_verb[vi])
        b = biases[vi]
        majority = "man" if b > 0.5 else "woman" if b < 0.5 else None
        for ri, role in enumerate(verb.roles):
            for ni, noun in enumerate(role.nouns):
                s = float(verb.name == gold.verb and noun == gold_nouns[ri]) + cfg.noise_sigma * z_role[vi, ri, ni]
                if ri == 0 and noun == majority:
                    s += cfg.amplification
                role_scores[(verb.name, role.name, noun)] = cfg.score_scale * s
    return ScoreTable(iid, verb_scores=verb_scores, role_scores=role_scores)


def _mlc_schema(cfg: SynthConfig) -> OutputSchema:
    return OutputSchema(Family.MLC, objects=tuple(f"obj{c:02d}" for c in range(cfg.n_verbs)))


def _mlc_gold(cfg, schema, split, iid, biases):
    rng = _stream(cfg.seed, split, iid, "gold")
    man = rng.random() < 0.5
    draws = rng.random(len(schema.objects))
    # P(c | man) : P(c | woman) = b : 1 - b with equal gender priors
    objs = tuple(c for c, b, u in zip(schema.objects, biases, draws) if u < 0.6 * (b if man else 1.0 - b))
    return Assignment(iid, gender="man" if man else "woman", objects=objs)


def _mlc_scores(cfg, schema, iid, gold, biases):
    rng = _stream(cfg.seed, "eval", iid, "noise")
    G, C = len(schema.genders), len(schema.objects)
    z_gender = rng.standard_normal(G)
    z_obj = rng.standard_normal((G, C))
    gender_scores, object_scores = {}, {}
    for gi, g in enumerate(schema.genders):
        gender_scores[g] = cfg.score_scale * float((g == gold.gender) + cfg.noise_sigma * z_gender[gi])
        for ci, c in enumerate(schema.objects):
            s = (c in gold.objects) - 0.5 + cfg.noise_sigma * z_obj[gi, ci]
            b = biases[ci]
            if b != 0.5:
                majority = "man" if b > 0.5 else "woman"
                s += 0.5 * cfg.amplification if g == majority else -0.5 * cfg.amplification
            object_scores[(g, c)] = cfg.score_scale * float(s)
    return ScoreTable(iid, gender_scores=gender_scores, object_scores=object_scores)


def generate(config: SynthConfig):
    """Build ``(train, eval)`` corpora.

    The training corpus carries gold labels only; the eval corpus carries
    score tables and aligned gold labels.
    """
    config.validate()
    family = Family(config.family)
    biases = config.biases
    if family is Family.VSRL:
        schema, gold_fn, score_fn = _vsrl_schema(config), _vsrl_gold, _vsrl_scores
    else:
        schema, gold_fn, score_fn = _mlc_schema(config), _mlc_gold, _mlc_scores
    n_train = config.n_train if config.n_train is not None else config.n_instances

    train_gold = tuple(gold_fn(config, schema, "train", f"train-{i:06d}", biases) for i in range(n_train))
    eval_gold, tables = [], []
    for i in range(config.n_instances):
        iid = f"eval-{i:06d}"
        g = gold_fn(config, schema, "eval", iid, biases)
        table = score_fn(config, schema, iid, g, biases)
        eval_gold.append(replace(g, score=assignment_score(schema, table, g)))
        tables.append(table)
    return Corpus(schema, (), train_gold), Corpus(schema, tuple(tables), tuple(eval_gold))

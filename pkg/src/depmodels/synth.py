"""Sampling gold-annotated corpora from model C's generative story.

Starting at EOS, every word draws its left children (closest first) until
it draws EOKIDS, then its right children the same way, each choice
conditioned on the head and the previous sibling. EOS itself takes exactly
one left child and no right children.

Two parameter sources are supported: a hand-written grammar (JSON, tag-level
child distributions plus word emissions) and a trained model C, whose
factor scores are normalized over the closed vocabulary before sampling.
"""

from __future__ import annotations

import json
import math
import random
from typing import Dict, List, Optional, Sequence

from .corpus import (
    BOKIDS, EOKIDS, EOS, EOS_TW, LEFT, RIGHT, CapClass, Corpus, Section,
    Sentence, TaggedWord, TagSet, is_attenuation_symbol,
)
from .models import ModelId, TrainedModel, child_event

STOP = EOKIDS
ANY = "*"


class SampleTooLong(Exception):
    pass


class _Node:
    __slots__ = ("word", "tag", "left", "right")

    def __init__(self, word, tag):
        self.word = word
        self.tag = tag
        self.left = []
        self.right = []


def _linearize(root_children: List[_Node]) -> Sentence:
    words, tags, parents = [], [], []
    order = []

    def visit(node, parent_node):
        for c in reversed(node.left):
            visit(c, node)
        order.append((node, parent_node))
        for c in node.right:
            visit(c, node)

    for c in root_children:
        visit(c, None)
    pos = {id(node): i for i, (node, _) in enumerate(order, 1)}
    n = len(order)
    for node, parent in order:
        words.append(node.word)
        tags.append(node.tag)
        parents.append(n + 1 if parent is None else pos[id(parent)])
    return Sentence(words, tags, parents)


class _Generator:
    def root(self, rng) -> _Node:
        raise NotImplementedError

    def child(self, rng, head: _Node, sib_tag: str, side: str) -> Optional[_Node]:
        raise NotImplementedError

    def sample(self, rng: random.Random, max_len: int = 10) -> Sentence:
        """One sentence; raises SampleTooLong once it would exceed ``max_len``."""
        count = [0]

        def grow(node):
            count[0] += 1
            if count[0] > max_len:
                raise SampleTooLong()
            for side, seq in ((LEFT, node.left), (RIGHT, node.right)):
                sib = BOKIDS
                while True:
                    kid = self.child(rng, node, sib, side)
                    if kid is None:
                        break
                    seq.append(kid)
                    sib = kid.tag
                    grow(kid)

        head = self.root(rng)
        grow(head)
        return _linearize([head])

    def sample_sentences(self, count: int, seed: int = 0, max_len: int = 10,
                         max_tries: int = 1000) -> List[Sentence]:
        rng = random.Random(seed)
        out = []
        for _ in range(count):
            for _ in range(max_tries):
                try:
                    out.append(self.sample(rng, max_len))
                    break
                except SampleTooLong:
                    continue
            else:
                raise RuntimeError("no sample within %d words after %d tries"
                                   % (max_len, max_tries))
        return out

    def sample_corpus(self, count: int, seed: int = 0, max_len: int = 10,
                      section_size: int = 50, first_section: int = 1) -> Corpus:
        sents = self.sample_sentences(count, seed, max_len)
        sections = [Section(str(first_section + i // section_size),
                            sents[i:i + section_size])
                    for i in range(0, len(sents), section_size)]
        return Corpus(self.tagset, sections)


class HandGrammar(_Generator):
    """Tag-level model C parameters.

    ``children[head_tag][side][sib]`` maps outcomes (tags or EOKIDS) to
    weights; ``sib`` is BOKIDS, a tag, or "*" as a fallback. ``words[tag]``
    maps word forms to weights, and ``root`` weights the tag of the sentence
    head.
    """

    def __init__(self, params: dict):
        self.params = params
        self.tagset = TagSet.from_rows(params["tagset"])
        self.words = params["words"]
        self.root_weights = params["root"]
        self.children = params.get("children", {})
        for tag in list(self.words) + list(self.root_weights):
            if tag not in self.tagset:
                raise ValueError("grammar uses undeclared tag %r" % tag)
        for head, sides in self.children.items():
            for side, table in sides.items():
                if side not in (LEFT, RIGHT):
                    raise ValueError("bad side %r for head %r" % (side, head))
                for dist in table.values():
                    for out in dist:
                        if out != STOP and out not in self.words:
                            raise ValueError("tag %r has no words" % out)

    @classmethod
    def from_json(cls, text: str) -> "HandGrammar":
        return cls(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.params, indent=1, sort_keys=True)

    @property
    def vocabulary(self) -> set:
        return {w for ws in self.words.values() for w in ws}

    @staticmethod
    def _draw(rng, weights: Dict[str, float]) -> str:
        keys = sorted(weights)
        return rng.choices(keys, [weights[k] for k in keys])[0]

    def _node(self, rng, tag) -> _Node:
        return _Node(self._draw(rng, self.words[tag]), tag)

    def root(self, rng):
        return self._node(rng, self._draw(rng, self.root_weights))

    def child(self, rng, head, sib_tag, side):
        table = self.children.get(head.tag, {}).get(side, {})
        dist = table.get(sib_tag, table.get(ANY))
        if not dist:
            return None
        out = self._draw(rng, dist)
        return None if out == STOP else self._node(rng, out)


class ModelSampler(_Generator):
    """Sample from a trained model C (or C_nolex) over its closed vocabulary."""

    def __init__(self, m: TrainedModel, caps: Sequence[str] = (CapClass.DOWN.value,)):
        if m.model_id not in (ModelId.C, ModelId.C_NOLEX):
            raise ValueError("sampling needs a model C or C_nolex")
        self.m = m
        self.tagset = m.tagset
        self.outcomes = [TaggedWord(f, t, c)
                         for f in sorted(m.tag_dictionary) if not is_attenuation_symbol(f)
                         for t in sorted(m.tag_dictionary[f], key=m.tagset.index)
                         for c in caps]
        if not self.outcomes:
            raise ValueError("model has an empty vocabulary")
        self._dists = {}

    def _dist(self, head: TaggedWord, sib_tag: str, side: str, allow_stop: bool):
        key = (head, sib_tag, side, allow_stop)
        if key not in self._dists:
            outs = list(self.outcomes) + ([TaggedWord(EOKIDS, EOKIDS)] if allow_stop else [])
            logs = [self.m.event_logscore(child_event(self.tagset, head, sib_tag, o, side))
                    for o in outs]
            top = max(logs)
            weights = [math.exp(v - top) for v in logs]
            self._dists[key] = (outs, weights)
        return self._dists[key]

    def root(self, rng):
        outs, weights = self._dist(EOS_TW, BOKIDS, LEFT, allow_stop=False)
        tw = rng.choices(outs, weights)[0]
        return _Node(tw.form, tw.tag)

    def child(self, rng, head, sib_tag, side):
        outs, weights = self._dist(TaggedWord(head.word, head.tag), sib_tag, side, True)
        tw = rng.choices(outs, weights)[0]
        return None if tw.form == EOKIDS else _Node(tw.form, tw.tag)


TOY_GRAMMAR = {
    "tagset": [["DT", "D", "NounModifier"], ["JJ", "J", "NounModifier"],
               ["NN", "N", "Noun"], ["VB", "V", "Verb"],
               ["IN", "I", "Preposition"], ["PU", ".", "Punctuation"]],
    "root": {"VB": 0.85, "NN": 0.15},
    "words": {
        "DT": {"the": 4, "a": 3, "every": 1, "this": 1},
        "JJ": {"old": 2, "big": 2, "red": 1, "round": 1, "happy": 1},
        "NN": {"man": 3, "dog": 3, "park": 2, "boat": 2, "saw": 1, "hammer": 1,
               "telescope": 1, "cat": 2, "walk": 1, "round": 1},
        "VB": {"saw": 3, "walk": 1, "man": 1, "sees": 2, "likes": 2, "barks": 1,
               "runs": 1, "took": 2},
        "IN": {"in": 3, "with": 3, "on": 2, "near": 1, "round": 1},
        "PU": {".": 3, ",": 1},
    },
    "children": {
        "VB": {
            "L": {"BOKIDS": {"NN": 0.85, "EOKIDS": 0.15}, "*": {"EOKIDS": 1}},
            "R": {"BOKIDS": {"NN": 0.6, "IN": 0.15, "EOKIDS": 0.25},
                  "NN": {"IN": 0.35, "PU": 0.2, "EOKIDS": 0.45},
                  "IN": {"PU": 0.3, "EOKIDS": 0.7},
                  "*": {"EOKIDS": 1}},
        },
        "NN": {
            "L": {"BOKIDS": {"JJ": 0.25, "DT": 0.4, "EOKIDS": 0.35},
                  "JJ": {"DT": 0.6, "JJ": 0.1, "EOKIDS": 0.3},
                  "*": {"EOKIDS": 1}},
            "R": {"BOKIDS": {"IN": 0.2, "EOKIDS": 0.8}, "*": {"EOKIDS": 1}},
        },
        "IN": {
            "R": {"BOKIDS": {"NN": 1}, "*": {"EOKIDS": 1}},
        },
    },
}


def toy_grammar() -> HandGrammar:
    return HandGrammar(json.loads(json.dumps(TOY_GRAMMAR)))

"""Attachment and tagging scores, error histograms, contagion and the
randomized significance test."""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import (
    EOS, TINY_CLASSES, Corpus, DependencyStructure, Section, Sentence,
    TaggedWord, TagSet, attenuate_token, validate_structure,
)
from .decoder import detect_search_error

HISTOGRAM_MAX = 4


@dataclass(frozen=True)
class SentenceResult:
    tag_ok: tuple
    parent_ok: tuple
    punct: tuple
    own_class: tuple
    parent_class: tuple
    unknown: tuple
    search_error: Optional[bool] = None

    @property
    def n(self) -> int:
        return len(self.tag_ok)

    @property
    def scored(self) -> int:
        """Words that count toward attachment (punctuation excluded)."""
        return sum(not p for p in self.punct)

    @property
    def attach_errors(self) -> int:
        return sum(not ok for ok, p in zip(self.parent_ok, self.punct) if not p)


def _gold_parts(g) -> Tuple[tuple, tuple, tuple, tuple]:
    if isinstance(g, Sentence):
        if g.tags is None or g.parents is None:
            raise ValueError("gold sentence lacks tags or parents")
        return g.forms(), tuple(g.tags), tuple(g.parents), g.cap_classes()
    return (tuple(tw.form for tw in g.tagged_words), g.tags, g.parents,
            tuple(tw.cap for tw in g.tagged_words))


def score_sentences(gold: Sequence, system: Sequence[Tuple[Sequence[str], Sequence[int]]],
                    tagset: Optional[TagSet] = None, m=None) -> List[SentenceResult]:
    """Per-word correctness flags for aligned gold and system analyses.

    ``gold`` holds Sentences or DependencyStructures. With a model, unknown
    words and search errors are also determined.
    """
    if len(gold) != len(system):
        raise ValueError("gold has %d sentences, system has %d"
                         % (len(gold), len(system)))
    if tagset is None:
        if m is None:
            raise ValueError("a tag set or a model is required")
        tagset = m.tagset
    out = []
    for si, (g, (tags, parents)) in enumerate(zip(gold, system), 1):
        forms, gtags, gparents, caps = _gold_parts(g)
        n = len(forms)
        tags, parents = tuple(tags), tuple(parents)
        if len(tags) != n or len(parents) != n:
            raise ValueError("sentence %d: system output has a different length" % si)
        parent_class = tuple(EOS if p == n + 1 else tagset.tiny(gtags[p - 1])
                             for p in gparents)
        unknown = (tuple(f not in m.lexicon for f in forms) if m is not None
                   else (False,) * n)
        search_error = None
        if m is not None:
            def prepared(ts, ps):
                tws = tuple(TaggedWord(f if f in m.tag_dictionary else attenuate_token(f),
                                       t, c) for f, t, c in zip(forms, ts, caps))
                return DependencyStructure(tws, ps)
            out_d = prepared(tags, parents)
            search_error = bool(validate_structure(out_d)) and detect_search_error(
                m, prepared(gtags, gparents), out_d)
        out.append(SentenceResult(
            tag_ok=tuple(a == b for a, b in zip(tags, gtags)),
            parent_ok=tuple(a == b for a, b in zip(parents, gparents)),
            punct=tuple(tagset.is_punctuation(t) for t in gtags),
            own_class=tuple(tagset.tiny(t) for t in gtags),
            parent_class=parent_class,
            unknown=unknown,
            search_error=search_error,
        ))
    return out


def _pct(num: float, den: float) -> Optional[float]:
    return 100.0 * num / den if den else None


@dataclass
class EvalReport:
    sentences: int
    words: int
    scored_words: int
    attachment: Optional[float]
    tagging: Optional[float]
    by_class: Dict[str, Tuple[Optional[float], Optional[float], int]]
    by_parent_class: Dict[str, Tuple[Optional[float], int]]
    unknown: Tuple[int, Optional[float], Optional[float]]
    histogram: Tuple[float, ...]
    contagion: Tuple[float, Optional[float], Optional[float]]
    search_error: Optional[float] = None
    extra: Dict[str, str] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, object]:
        d = {
            "sentences": self.sentences,
            "words": self.words,
            "scored_words": self.scored_words,
            "attachment": self.attachment,
            "tagging": self.tagging,
            "unknown_words": self.unknown[0],
            "unknown_tagging": self.unknown[1],
            "unknown_attachment": self.unknown[2],
            "contagion_p1": self.contagion[0],
            "contagion_p2_given_1": self.contagion[1],
            "contagion_ratio": self.contagion[2],
            "search_error": self.search_error,
        }
        for k, v in enumerate(self.histogram):
            d["hist_le%d" % k] = v
        for cls, (t, a, c) in self.by_class.items():
            d["class_%s_tagging" % cls] = t
            d["class_%s_attachment" % cls] = a
            d["class_%s_words" % cls] = c
        for cls, (a, c) in self.by_parent_class.items():
            d["parent_%s_attachment" % cls] = a
            d["parent_%s_words" % cls] = c
        d.update(self.extra)
        return d


def aggregate(results: Sequence[SentenceResult]) -> EvalReport:
    if not results:
        raise ValueError("no sentences to aggregate")
    words = scored = attach_ok = tag_ok = 0
    cls_n = defaultdict(int)
    cls_tag = defaultdict(int)
    cls_att = defaultdict(int)
    par_n = defaultdict(int)
    par_att = defaultdict(int)
    unk_n = unk_scored = unk_tag = unk_att = 0
    errors = []
    for r in results:
        for t_ok, p_ok, punct, own, par, unk in zip(r.tag_ok, r.parent_ok, r.punct,
                                                    r.own_class, r.parent_class,
                                                    r.unknown):
            words += 1
            tag_ok += t_ok
            cls_n[own] += 1
            cls_tag[own] += t_ok
            cls_att[own] += p_ok
            if unk:
                unk_n += 1
                unk_tag += t_ok
            if punct:
                continue
            scored += 1
            attach_ok += p_ok
            par_n[par] += 1
            par_att[par] += p_ok
            if unk:
                unk_scored += 1
                unk_att += p_ok
        errors.append(r.attach_errors)
    ns = len(results)
    histogram = tuple(100.0 * sum(e <= k for e in errors) / ns
                      for k in range(HISTOGRAM_MAX + 1))
    at_least_1 = sum(e >= 1 for e in errors)
    at_least_2 = sum(e >= 2 for e in errors)
    p1 = 100.0 * at_least_1 / ns
    p2 = _pct(at_least_2, at_least_1)
    ratio = p2 / p1 if p2 is not None else None
    flags = [r.search_error for r in results if r.search_error is not None]
    order = [c for c in TINY_CLASSES if c in cls_n]
    par_order = [c for c in TINY_CLASSES + (EOS,) if c in par_n]
    return EvalReport(
        sentences=ns,
        words=words,
        scored_words=scored,
        attachment=_pct(attach_ok, scored),
        tagging=_pct(tag_ok, words),
        by_class={c: (_pct(cls_tag[c], cls_n[c]), _pct(cls_att[c], cls_n[c]), cls_n[c])
                  for c in order},
        by_parent_class={c: (_pct(par_att[c], par_n[c]), par_n[c]) for c in par_order},
        unknown=(unk_n, _pct(unk_tag, unk_n), _pct(unk_att, unk_scored)),
        histogram=histogram,
        contagion=(p1, p2, ratio),
        search_error=_pct(sum(flags), len(flags)) if flags else None,
    )


def _f(v: Optional[float], width: int = 5) -> str:
    return ("%*.1f" % (width, v)) if v is not None else " " * (width - 1) + "-"


def format_report(rep: EvalReport, title: str = "") -> str:
    """Aligned text tables followed by a key=value block."""
    lines = []
    if title:
        lines.append(title)
        lines.append("=" * len(title))
    lines.append("sentences %d, words %d, scored (non-punctuation) %d"
                 % (rep.sentences, rep.words, rep.scored_words))
    lines.append("overall    tag / attach  %s / %s" % (_f(rep.tagging), _f(rep.attachment)))
    lines.append("unknown    tag / attach  %s / %s   (%d words)"
                 % (_f(rep.unknown[1]), _f(rep.unknown[2]), rep.unknown[0]))
    lines.append("")
    lines.append("%-14s %6s   %15s" % ("own class", "words", "tag / attach"))
    for c, (t, a, n) in rep.by_class.items():
        lines.append("%-14s %6d   %s / %s" % (c, n, _f(t), _f(a)))
    lines.append("")
    lines.append("%-14s %6s   %6s" % ("parent class", "words", "attach"))
    for c, (a, n) in rep.by_parent_class.items():
        lines.append("%-14s %6d   %s" % (c, n, _f(a, 6)))
    lines.append("")
    heads = ["0"] + ["<=%d" % k for k in range(1, HISTOGRAM_MAX + 1)]
    lines.append("errors/sent " + " ".join("%6s" % h for h in heads))
    lines.append("% sentences " + " ".join(_f(v, 6) for v in rep.histogram))
    lines.append("")
    p1, p2, ratio = rep.contagion
    lines.append("contagion   P(>=1 err) %s   P(>=2 | >=1) %s   ratio %s"
                 % (_f(p1), _f(p2), "-" if ratio is None else "%.2f" % ratio))
    if rep.search_error is not None:
        lines.append("search error %s%%" % _f(rep.search_error))
    lines.append("")
    lines.append("[values]")
    for k, v in rep.as_dict().items():
        if isinstance(v, float):
            v = "%.4f" % v
        lines.append("%s=%s" % (k, "NA" if v is None else v))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Significance


@dataclass(frozen=True)
class SignificanceResult:
    mu: float
    iterations: int
    p_value: float
    seed: int
    at_least_as_strong: int

    def format(self) -> str:
        return ("mu=%.6f\np=%.6f\niterations=%d\nseed=%d\n"
                % (self.mu, self.p_value, self.iterations, self.seed))


def monte_carlo_compare(errors_a: Sequence[int], errors_b: Sequence[int],
                        n_words: Optional[int] = None, iterations: int = 10000,
                        seed: int = 0, chunk: int = 1000) -> SignificanceResult:
    """Randomly recolor each sentence pair and count differences as large as
    the observed one (two-sided).

    ``mu`` is the error-rate difference B minus A over ``n_words`` scored
    words (the raw error-count difference when ``n_words`` is not given).
    """
    a = np.asarray(errors_a, dtype=np.int64)
    b = np.asarray(errors_b, dtype=np.int64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("error lists must be aligned")
    if a.size == 0:
        raise ValueError("no sentences to compare")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    d = b - a
    observed = abs(int(d.sum()))
    rng = np.random.default_rng(seed)
    count = 0
    done = 0
    while done < iterations:
        k = min(chunk, iterations - done)
        swap = rng.random((k, d.size)) < 0.5
        sums = np.where(swap, -d, d).sum(axis=1)
        count += int((np.abs(sums) >= observed).sum())
        done += k
    diff = int(d.sum())
    mu = diff / n_words if n_words else float(diff)
    return SignificanceResult(mu, iterations, (count + 1) / (iterations + 1), seed, count)


def compare_results(res_a: Sequence[SentenceResult], res_b: Sequence[SentenceResult],
                    iterations: int = 10000, seed: int = 0) -> SignificanceResult:
    if len(res_a) != len(res_b):
        raise ValueError("result lists cover different sentence sets")
    for i, (x, y) in enumerate(zip(res_a, res_b), 1):
        if x.punct != y.punct:
            raise ValueError("sentence %d differs between the two gold sides" % i)
    words = sum(r.scored for r in res_a)
    return monte_carlo_compare([r.attach_errors for r in res_a],
                               [r.attach_errors for r in res_b],
                               n_words=words, iterations=iterations, seed=seed)


# ---------------------------------------------------------------------------
# Test-set construction


def split_test_sections(corpus: Corpus, target: int = 400, seed: int = 0
                        ) -> Tuple[Corpus, Corpus]:
    """Pick random sentences and move their whole sections to the test side
    until at least ``target`` test sentences are marked."""
    rng = random.Random(seed)
    owners = [i for i, sec in enumerate(corpus.sections) for _ in sec.sentences]
    test = set()
    marked = 0
    while marked < target and len(test) < len(corpus.sections):
        i = owners[rng.randrange(len(owners))]
        if i in test:
            continue
        test.add(i)
        marked += len(corpus.sections[i].sentences)
    train = [s for i, s in enumerate(corpus.sections) if i not in test]
    held = [s for i, s in enumerate(corpus.sections) if i in test]
    return Corpus(corpus.tagset, train), Corpus(corpus.tagset, held)

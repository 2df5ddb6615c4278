"""Exact and beam decoding over taggings and projective structures.

The span chart follows the head-outward, O(n^3) construction: complete spans
(a head plus the finished subtrees on one side) and incomplete spans (a link
between the two endpoints). Items carry the tags of the endpoints and of
their inner neighbours, so trigram factors can be applied where spans meet,
and the sibling state of the head's outermost child so far.

Ties are broken by a fixed total order: lexicographically smaller parent
vector first, then smaller vector of tag indices. Every chart item compares
the partial vectors of the positions it has settled, which is enough for
the whole-sentence order to come out right.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

from .corpus import (
    BOKIDS, BOS, EOKIDS, EOKIDS_TW, EOS, EOS_TW, LEFT, RIGHT,
    DependencyStructure, Sentence, TaggedWord, children_lists, dist,
)
from .models import (
    CHILD_MODELS, DECODABLE_MODELS, LINK_MODELS, PARENT_MODELS, TRIGRAM_MODELS,
    YES, Event, ModelId, TrainedModel, parent_events, side_events,
    structure_logscore, trigram_events,
)

EPS = 1e-9


class SearchLimitError(ValueError):
    """A brute-force bound or model/decoder restriction was exceeded."""


@dataclass(frozen=True)
class SearchSettings:
    mode: str = "exact"
    width: int = 1
    max_brute_force_n: int = 8
    max_taggings: int = 5000

    def __post_init__(self):
        if self.mode not in ("exact", "beam"):
            raise ValueError("mode must be 'exact' or 'beam'")
        if self.mode == "beam" and self.width < 1:
            raise ValueError("beam width must be >= 1")

    @classmethod
    def beam(cls, width: int) -> "SearchSettings":
        return cls(mode="beam", width=width)


class TagLattice(tuple):
    """Candidate tags per word position (index 0 is word 1)."""

    def __new__(cls, candidates: Sequence[Sequence[str]]):
        cands = tuple(tuple(c) for c in candidates)
        for i, c in enumerate(cands, 1):
            if not c:
                raise ValueError("empty lattice position %d" % i)
        return super().__new__(cls, cands)

    def taggings(self) -> Iterator[tuple]:
        return itertools.product(*self)

    def size(self) -> int:
        return math.prod(len(c) for c in self)


def constraint_tags(m: TrainedModel, constraint: str) -> tuple:
    """Tags compatible with an externally supplied (possibly coarse) tag."""
    ts = m.tagset
    out = tuple(t for t in ts.tags if t == constraint or ts.short(t) == constraint)
    if not out:
        raise ValueError("constraint tag %r matches no tag or short tag" % constraint)
    return out


def build_lattice(m: TrainedModel, sentence: Sentence,
                  true_tags: Optional[Sequence[str]] = None) -> TagLattice:
    """Tags seen with each word in training; unseen words fall back on their
    attenuation symbol, then on the whole tag set."""
    ts = m.tagset
    prep = m.prepare(sentence)
    cands = []
    for i, form in enumerate(prep.forms):
        tags = m.tag_dictionary.get(form) or frozenset(ts.tags)
        tags = sorted(tags, key=ts.index)
        if true_tags is not None and true_tags[i] not in (None, "_"):
            allowed = constraint_tags(m, true_tags[i])
            narrowed = [t for t in tags if t in allowed]
            tags = narrowed or list(allowed)
        cands.append(tags)
    return TagLattice(cands)


# ---------------------------------------------------------------------------
# Enumeration


def enumerate_projective(n: int, cap: int = 10) -> Iterator[tuple]:
    """Every well-formed parent vector for ``n`` words, in lexicographic order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > cap:
        raise SearchLimitError("n=%d exceeds enumeration cap %d" % (n, cap))
    return iter(_projective_cache(n))


_PROJ_CACHE: Dict[int, tuple] = {}


def _projective_cache(n: int) -> tuple:
    if n not in _PROJ_CACHE:
        out = []
        for h in range(1, n + 1):
            for left in _sequences(1, h - 1, h):
                for right in _sequences(h + 1, n, h):
                    par = [0] * n
                    par[h - 1] = n + 1
                    for i, p in left + right:
                        par[i - 1] = p
                    out.append(tuple(par))
        out.sort()
        _PROJ_CACHE[n] = tuple(out)
    return _PROJ_CACHE[n]


def _sequences(lo: int, hi: int, parent: int):
    """Ways to cover [lo, hi] by adjacent subtrees whose roots attach to parent."""
    if lo > hi:
        yield []
        return
    for m in range(lo, hi + 1):
        for first in _subtrees(lo, m, parent):
            for rest in _sequences(m + 1, hi, parent):
                yield first + rest


def _subtrees(lo: int, hi: int, parent: int):
    for r in range(lo, hi + 1):
        for left in _sequences(lo, r - 1, r):
            for right in _sequences(r + 1, hi, r):
                yield [(r, parent)] + left + right


# ---------------------------------------------------------------------------
# Results and tie-breaking


@dataclass
class ParseResult:
    tags: tuple
    parents: tuple
    log_score: float
    structure: Optional[DependencyStructure] = None
    pruned: bool = False
    operations: int = 0
    chart_score: Optional[float] = None


def _better(score, key, best_score, best_key) -> bool:
    if score > best_score + EPS:
        return True
    if score < best_score - EPS:
        return False
    return key < best_key


def tie_key(m: TrainedModel, parents, tags) -> tuple:
    return (tuple(parents), tuple(m.tagset.index(t) for t in tags))


def _check_model(m: TrainedModel, what: str, allowed) -> None:
    if m.model_id not in allowed:
        raise SearchLimitError("%s does not support model %s"
                               % (what, m.model_id.value))


def brute_force_parse(m: TrainedModel, s: Sentence, lattice: TagLattice,
                      settings: SearchSettings = SearchSettings()) -> ParseResult:
    """Score every tagging from the lattice with every projective structure.

    A structure's score is summed from the model's own event walk, split into
    the trigram part, one part per (head, side, children) and one per link,
    so repeated parts are looked up once per tagging.
    """
    _check_model(m, "brute force", DECODABLE_MODELS | {ModelId.A})
    n = s.n
    if n > settings.max_brute_force_n:
        raise SearchLimitError("n=%d exceeds brute-force cap" % n)
    if lattice.size() > settings.max_taggings:
        raise SearchLimitError("%d taggings exceed the bound" % lattice.size())
    prep = m.prepare(s)
    structures = _projective_cache(n)
    kids = _children_cache(n)
    mid = m.model_id
    score = m.event_logscore
    sides = [(k, side) for k in range(1, n + 2) for side in (LEFT, RIGHT)]
    with_sides = mid in CHILD_MODELS or mid in LINK_MODELS
    with_parents = mid in PARENT_MODELS
    best_score = -math.inf
    best_key = None
    ops = 0
    for tags in lattice.taggings():
        tws = tuple(TaggedWord(f, t, c) for f, t, c in zip(prep.forms, tags, prep.caps))
        d0 = DependencyStructure(tws, (n + 1,) * n)
        tw = d0.tw
        tag_idx = tuple(m.tagset.index(t) for t in tags)
        base = 0.0
        if mid in TRIGRAM_MODELS:
            base = sum(score(ev) for ev in trigram_events(tw, n))
        side_memo = {}
        link_memo = {}
        for parents, ch in zip(structures, kids):
            ops += 1
            total = base
            if with_sides:
                for k, side in sides:
                    seq = ch[k][side]
                    key = (k, side, seq)
                    v = side_memo.get(key)
                    if v is None:
                        v = side_memo[key] = sum(
                            score(ev) for ev in side_events(
                                mid, m.tagset, tw, n, k, side, seq, m.use_distance))
                    total += v
            if with_parents:
                for i, p in enumerate(parents, 1):
                    v = link_memo.get((i, p))
                    if v is None:
                        v = link_memo[i, p] = sum(
                            score(ev) for ev in parent_events(mid, tw, i, p))
                    total += v
            key = (parents, tag_idx)
            if best_key is None or _better(total, key, best_score, best_key):
                best_score, best_key = total, key
    parents, tag_idx = best_key
    tags = tuple(m.tagset.tags[i] for i in tag_idx)
    d = m.structure_for(s, tags, parents)
    return ParseResult(tags, parents, structure_logscore(m, d), d, operations=ops,
                       chart_score=best_score)


_KIDS_CACHE: Dict[int, tuple] = {}


def _children_cache(n: int) -> tuple:
    if n not in _KIDS_CACHE:
        out = []
        for parents in _projective_cache(n):
            ch = children_lists(parents)
            out.append({k: {side: tuple(ch.get(k, {}).get(side, ()))
                            for side in (LEFT, RIGHT)} for k in range(1, n + 2)})
        _KIDS_CACHE[n] = tuple(out)
    return _KIDS_CACHE[n]


# ---------------------------------------------------------------------------
# Position-indexed factor scores for the chart


class SentenceScorer:
    """Factor scores addressed by positions and tags, cached per sentence."""

    def __init__(self, m: TrainedModel, s: Sentence):
        self.m = m
        self.n = s.n
        prep = m.prepare(s)
        self.forms = prep.forms
        self.caps = prep.caps
        mid = m.model_id
        self.has_trigram = mid in TRIGRAM_MODELS
        self.has_children = mid in CHILD_MODELS
        self.has_parent = mid in PARENT_MODELS
        self.parent_dir = mid == ModelId.B2
        self.child_dist = mid == ModelId.C_DIST
        self.links = mid == ModelId.D
        self.score = m.event_logscore
        self._cache = {}

    def tw(self, p: int, tag: str) -> TaggedWord:
        if p <= 0:
            return TaggedWord(BOS, BOS)
        if p == self.n + 1:
            return EOS_TW
        return TaggedWord(self.forms[p - 1], tag, self.caps[p - 1])

    def sib_state(self, tag: str):
        ts = self.m.tagset
        if self.links:
            return (ts.short(tag), ts.tiny(tag))
        if self.has_children:
            return ts.short(tag)
        return None

    def trig(self, p: int, t2: str, t1: str, t0: str) -> float:
        key = ("t", p, t2, t1, t0)
        try:
            return self._cache[key]
        except KeyError:
            pass
        ev = Event("trigram", (t2 if p >= 3 else BOS, t1 if p >= 2 else BOS),
                   self.tw(p, t0))
        val = self._cache[key] = self.score(ev)
        return val

    def attach(self, h: int, c: int, th: str, tc: str, sib) -> float:
        """Everything scored when ``c`` becomes the next child of ``h``."""
        key = ("a", h, c, th, tc, sib)
        try:
            return self._cache[key]
        except KeyError:
            pass
        head = self.tw(h, th)
        child = self.tw(c, tc)
        side = LEFT if c < h else RIGHT
        total = 0.0
        if self.has_children:
            total += self.score(Event("child", (head.form, head.tag, sib, side), child))
            if self.child_dist:
                total += self.score(Event("dist", (child.form, child.tag, head.tag),
                                          dist(h, c)))
        if self.has_parent:
            total += self.score(Event("parent", (child.form, child.tag), head))
            if self.parent_dir:
                total += self.score(Event("parent.dir", (child.tag, head.tag),
                                          RIGHT if h > c else LEFT))
        if self.links:
            bucket = dist(h, c) if self.m.use_distance else None
            total += self.score(Event("link", (child.form, child.tag, head.form,
                                               head.tag, sib[0], sib[1], bucket), YES))
        self._cache[key] = total
        return total

    def stop(self, h: int, th: str, sib, side: str) -> float:
        key = ("s", h, th, sib, side)
        try:
            return self._cache[key]
        except KeyError:
            pass
        head = self.tw(h, th)
        total = 0.0
        if self.has_children:
            total += self.score(Event("child", (head.form, head.tag, sib, side),
                                      EOKIDS_TW))
        if self.links:
            bucket = EOKIDS if self.m.use_distance else None
            total += self.score(Event("link", (EOKIDS, EOKIDS, head.form, head.tag,
                                               sib[0], sib[1], bucket), YES))
        self._cache[key] = total
        return total


# ---------------------------------------------------------------------------
# Span dynamic program


class _Entry:
    __slots__ = ("score", "pk", "tk")

    def __init__(self, score, pk, tk):
        self.score = score
        self.pk = pk      # settled parents, by position
        self.tk = tk      # tag indices, by position

    def key(self):
        return (self.pk, self.tk)


def _offer(cell: dict, sig, score, make_key) -> bool:
    cur = cell.get(sig)
    if cur is None:
        pk, tk = make_key()
        cell[sig] = _Entry(score, pk, tk)
        return True
    if score > cur.score + EPS:
        cur.score, (cur.pk, cur.tk) = score, make_key()
        return True
    if score < cur.score - EPS:
        return False
    pk, tk = make_key()
    if (pk, tk) < (cur.pk, cur.tk):
        cur.score, cur.pk, cur.tk = score, pk, tk
        return True
    return False


def _prune(cell: dict, width: int) -> Tuple[dict, bool]:
    if len(cell) <= width:
        return cell, False
    ranked = sorted(cell.items(), key=lambda kv: (-kv[1].score, kv[1].pk, kv[1].tk))
    return dict(ranked[:width]), True


def dp_parse(m: TrainedModel, s: Sentence, lattice: TagLattice,
             settings: SearchSettings = SearchSettings()) -> ParseResult:
    _check_model(m, "the span chart", DECODABLE_MODELS)
    if len(lattice) != s.n:
        raise ValueError("lattice length %d does not match sentence length %d"
                         % (len(lattice), s.n))
    width = settings.width if settings.mode == "beam" else None
    pruned_any = False
    while True:
        result = _chart(m, s, lattice, width)
        pruned_any = pruned_any or result.pruned
        if result.parents is not None:
            break
        if width is None:
            raise ValueError("no analysis survives the chart")
        # Every complete analysis fell out of the beam; widen and retry.
        width *= 2
    result.pruned = pruned_any
    tws = tuple(TaggedWord(f, t, c) for f, t, c in
                zip(m.prepare(s).forms, result.tags, m.prepare(s).caps))
    result.structure = DependencyStructure(tws, result.parents)
    result.log_score = structure_logscore(m, result.structure)
    return result


def _chart(m: TrainedModel, s: Sentence, lattice: TagLattice,
           width: Optional[int]) -> ParseResult:
    sc = SentenceScorer(m, s)
    n = s.n
    N = n + 1
    tri = sc.has_trigram
    trig = sc.trig
    attach = sc.attach
    stop = sc.stop
    sib_state = sc.sib_state
    tindex = m.tagset.index
    sig0 = sib_state(BOKIDS)
    lat = list(lattice) + [(EOS,)]
    ops = 0
    pruned = False

    CR, CL, SCR, SCL, IR, IL = {}, {}, {}, {}, {}, {}

    for p in range(1, N + 1):
        cr, cl, scr, scl = {}, {}, {}, {}
        for x in lat[p - 1]:
            e = (x, x, x, x) if tri else (x, None, None, x)
            tk = (tindex(x) if p <= n else -1,)
            cr[(e, sig0)] = _Entry(0.0, (), tk)
            cl[(e, sig0)] = _Entry(0.0, (), tk)
            scr[e] = _Entry(stop(p, x, sig0, RIGHT), (), tk)
            scl[e] = _Entry(stop(p, x, sig0, LEFT), (), tk)
        CR[p, p], CL[p, p], SCR[p, p], SCL[p, p] = cr, cl, scr, scl

    def junction_adj(s_, r, t, eL, eR):
        if not tri:
            return 0.0
        v = 0.0
        if r >= s_ + 1:
            v += trig(r + 1, eL[2], eL[3], eR[0])
        if r + 2 <= t:
            v += trig(r + 2, eL[3], eR[0], eR[1])
        return v

    def merge_adj(s_, r, t, eL, eR):
        if not tri:
            return (eL[0], None, None, eR[3])
        return (eL[0], eL[1] if r >= s_ + 1 else eR[0],
                eR[2] if t - 1 >= r + 1 else eL[3], eR[3])

    def junction_shared(s_, r, t, eL, eR):
        if tri and r >= s_ + 1 and r + 1 <= t:
            return trig(r + 1, eL[2], eL[3], eR[1])
        return 0.0

    def merge_shared(s_, r, t, eL, eR):
        if not tri:
            return (eL[0], None, None, eR[3])
        return (eL[0], eL[1] if r >= s_ + 1 else eR[1],
                eR[2] if t - 1 >= r else eL[2], eR[3])

    for length in range(1, N):
        for s_ in range(1, N - length + 1):
            t = s_ + length
            at_eos = t == N

            # Incomplete: s_ -> t (right link). EOS is never a child.
            ir = {}
            if not at_eos:
                for r in range(s_, t):
                    left = CR[s_, r]
                    right = SCL[r + 1, t]
                    for (eL, sib), L in left.items():
                        for eR, R in right.items():
                            ops += 1
                            score = (L.score + R.score + junction_adj(s_, r, t, eL, eR)
                                     + attach(s_, t, eL[0], eR[3], sib))
                            _offer(ir, merge_adj(s_, r, t, eL, eR), score,
                                   lambda L=L, R=R: (L.pk + R.pk + (s_,), L.tk + R.tk))
            # Incomplete: t -> s_ (left link). EOS takes exactly one child.
            il = {}
            for r in (range(s_, t) if not at_eos else (N - 1,)):
                left = SCR[s_, r]
                right = CL[r + 1, t]
                for eL, L in left.items():
                    for (eR, sib), R in right.items():
                        ops += 1
                        score = (L.score + R.score + junction_adj(s_, r, t, eL, eR)
                                 + attach(t, s_, eR[3], eL[0], sib))
                        _offer(il, merge_adj(s_, r, t, eL, eR), score,
                               lambda L=L, R=R: ((t,) + L.pk + R.pk, L.tk + R.tk))
            if width is not None:
                ir, p1 = _prune(ir, width)
                il, p2 = _prune(il, width)
                pruned = pruned or p1 or p2
            IR[s_, t], IL[s_, t] = ir, il

            # Complete, head s_ on the left.
            cr = {}
            if not at_eos:
                for r in range(s_ + 1, t + 1):
                    left = IR[s_, r]
                    right = SCR[r, t]
                    for eL, L in left.items():
                        sib = sib_state(eL[3])
                        for eR, R in right.items():
                            if eR[0] != eL[3]:
                                continue
                            ops += 1
                            score = L.score + R.score + junction_shared(s_, r, t, eL, eR)
                            _offer(cr, (merge_shared(s_, r, t, eL, eR), sib), score,
                                   lambda L=L, R=R: (L.pk + R.pk, L.tk + R.tk[1:]))
            # Complete, head t on the right.
            cl = {}
            if not at_eos or s_ == 1:
                for r in range(s_, t):
                    left = SCL[s_, r]
                    right = IL[r, t]
                    for eL, L in left.items():
                        sib = sib_state(eL[3])
                        for eR, R in right.items():
                            if eR[0] != eL[3]:
                                continue
                            ops += 1
                            score = L.score + R.score + junction_shared(s_, r, t, eL, eR)
                            _offer(cl, (merge_shared(s_, r, t, eL, eR), sib), score,
                                   lambda L=L, R=R: (L.pk + R.pk, L.tk + R.tk[1:]))
            if width is not None:
                cr, p1 = _prune(cr, width)
                cl, p2 = _prune(cl, width)
                pruned = pruned or p1 or p2
            CR[s_, t], CL[s_, t] = cr, cl

            scr = {}
            for (e, sib), E in cr.items():
                _offer(scr, e, E.score + stop(s_, e[0], sib, RIGHT),
                       lambda E=E: (E.pk, E.tk))
            scl = {}
            for (e, sib), E in cl.items():
                _offer(scl, e, E.score + stop(t, e[3], sib, LEFT),
                       lambda E=E: (E.pk, E.tk))
            SCR[s_, t], SCL[s_, t] = scr, scl

    best = None
    best_score = -math.inf
    eos_right = stop(N, EOS, sig0, RIGHT)
    for e, E in SCL[1, N].items():
        score = E.score + eos_right
        if tri:
            score += trig(1, BOS, BOS, e[0]) + trig(2, BOS, e[0], e[1])
        if best is None or _better(score, E.key(), best_score, best.key()):
            best, best_score = E, score
    if best is None:
        return ParseResult(None, None, -math.inf, pruned=pruned, operations=ops)
    tags = tuple(m.tagset.tags[i] for i in best.tk[:n])
    return ParseResult(tags, best.pk, best_score, pruned=pruned, operations=ops,
                       chart_score=best_score)


def detect_search_error(m: TrainedModel, gold: DependencyStructure,
                        output: DependencyStructure) -> bool:
    """True when the model prefers the gold structure to the decoder's output."""
    if len(gold.tagged_words) != len(output.tagged_words):
        raise ValueError("structures cover different sentences")
    return structure_logscore(m, gold) > structure_logscore(m, output) + EPS


def parse(m: TrainedModel, s: Sentence, settings: SearchSettings = SearchSettings(),
          true_tags: Optional[Sequence[str]] = None) -> ParseResult:
    """Decode one sentence with the decoder appropriate to the model."""
    lattice = build_lattice(m, s, true_tags)
    if m.model_id == ModelId.A:
        return brute_force_parse(m, s, lattice, settings)
    return dp_parse(m, s, lattice, settings)

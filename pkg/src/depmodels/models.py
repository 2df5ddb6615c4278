"""Probability models over dependency structures.

Every model is a product of factors. A factor is identified by an
:class:`Event` (family, condition, outcome); its log score is the sum of the
log estimates of its sub-factors (tag, word, cap, ...), each backed off
through its own reduction list.

``structure_events`` walks a structure the way each model's generative story
does; training counts those same events, so scoring and training cannot
drift apart.
"""

from __future__ import annotations

import enum
import io
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from .corpus import (
    BOKIDS, BOKIDS_TW, BOS, EOKIDS, EOKIDS_TW, EOS_TW, LEFT, RIGHT, Corpus,
    DependencyStructure, Sentence, TaggedWord, TagSet, attenuate_token,
    children_lists, dist, is_attenuation_symbol, normalize_form,
    validate_structure,
)
from .estimation import (
    CountTable, ReductionList, SmoothingConfig, dump_tables, estimate,
    load_tables, observe, reductions,
)


class ModelId(str, enum.Enum):
    A = "A"
    B1 = "B1"
    B2 = "B2"
    B3 = "B3"
    C = "C"
    C_NOLEX = "C_nolex"
    C_DIST = "C_dist"
    D = "D"
    X = "X"
    BASELINE = "BASELINE"


TRIGRAM_MODELS = frozenset([ModelId.A, ModelId.B1, ModelId.B2, ModelId.B3,
                            ModelId.D, ModelId.X])
CHILD_MODELS = frozenset([ModelId.B1, ModelId.B2, ModelId.B3, ModelId.C,
                          ModelId.C_NOLEX, ModelId.C_DIST])
PARENT_MODELS = frozenset([ModelId.B1, ModelId.B2])
LINK_MODELS = frozenset([ModelId.A, ModelId.D])
# Models whose score decomposes over spans.
DECODABLE_MODELS = frozenset(TRIGRAM_MODELS | CHILD_MODELS) - {ModelId.A}

YES = "yes"
NO = "no"


class Event(NamedTuple):
    family: str
    condition: tuple
    outcome: object


class TraceEntry(NamedTuple):
    family: str
    condition: tuple
    outcome: object
    logscore: float


class FactorTrace(list):
    """Ordered factor contributions to one structure's log score."""

    def total(self) -> float:
        return math.fsum(e.logscore for e in self)


def _log(p: float) -> float:
    return math.log(p) if p > 0 else -math.inf


# ---------------------------------------------------------------------------
# Reduction lists. Condition layouts are documented next to each list.

# trigram tag: (tag_prev, tag_prev2, short(tag_prev))
TRIGRAM_TAG = reductions((0, 1), (0,), (2,))
# trigram/parent word: (tag,)
WORD_GIVEN_TAG = reductions((0,))
# cap: (word, tag)
CAP = reductions((0, 1), (1,))
# child tag: (word_head, tag_head, short(tag_sib), dir, short(tag_head))
CHILD_TAG = reductions((0, 1, 2, 3), [(0, 1, 3), (1, 2, 3)], (4, 3))
# child word: (tag_child, word_head, tag_head, dir)
CHILD_WORD = reductions((0, 1, 2, 3), (0, 2, 3), (0,))
CHILD_WORD_NOLEX = reductions((0,))
# distance: (word_child, tag_child, tag_head)
DISTANCE = reductions((0, 1, 2), (1, 2))
# parent tag: (tag_child, short(tag_child))
PARENT_TAG = reductions((0,), (1,))
# parent direction: (tag_child, tag_parent, short(tag_child), tiny(tag_parent))
PARENT_DIR = reductions((0, 1), (2, 3))
# link: (word_i, tag_i, word_k, tag_k, short(tag_sib), tiny(tag_sib))
LINK = reductions(
    (0, 1, 2, 3, 4),
    [(1, 2, 3, 4), (0, 1, 3, 4), (0, 1, 2, 3)],
    (1, 3, 4),
    (1, 3, 5),
)
# link with distance: (dist, word_i, tag_i, word_k, tag_k, short(sib), tiny(sib))
LINK_DIST = reductions(
    (0, 1, 2, 3, 4, 5),
    [(0, 2, 3, 4, 5), (0, 1, 2, 4, 5), (0, 1, 2, 3, 4)],
    [(2, 3, 4), (1, 2, 4)],
    (0, 2, 4, 5),
    (0, 2, 4, 6),
)


def sub_factor_lists(model_id: ModelId, use_distance: bool = False
                     ) -> Dict[str, ReductionList]:
    """Count-table name -> reduction list for every sub-factor a model uses."""
    model_id = ModelId(model_id)
    out = {}
    if model_id in TRIGRAM_MODELS:
        out.update({"trigram.tag": TRIGRAM_TAG, "trigram.word": WORD_GIVEN_TAG,
                    "trigram.cap": CAP})
    if model_id in CHILD_MODELS:
        out.update({"child.tag": CHILD_TAG, "child.cap": CAP,
                    "child.word": (CHILD_WORD_NOLEX if model_id == ModelId.C_NOLEX
                                   else CHILD_WORD)})
    if model_id == ModelId.C_DIST:
        out["dist"] = DISTANCE
    if model_id in PARENT_MODELS:
        out.update({"parent.tag": PARENT_TAG, "parent.word": WORD_GIVEN_TAG,
                    "parent.cap": CAP})
    if model_id == ModelId.B2:
        out["parent.dir"] = PARENT_DIR
    if model_id in LINK_MODELS:
        out["link"] = LINK_DIST if use_distance else LINK
    return out


def decompose(event: Event, tagset: TagSet) -> List[Tuple[str, tuple, tuple]]:
    """Split a composite event into (table, full condition, outcome) parts."""
    fam, cond, out = event
    short = tagset.short
    if fam == "trigram":
        tag2, tag1 = cond
        return [("trigram.tag", (tag1, tag2, short(tag1)), (out.tag,)),
                ("trigram.word", (out.tag,), (out.form,)),
                ("trigram.cap", (out.form, out.tag), (out.cap,))]
    if fam == "child":
        hform, htag, sib_short, direction = cond
        return [("child.tag", (hform, htag, sib_short, direction, short(htag)),
                 (out.tag,)),
                ("child.word", (out.tag, hform, htag, direction), (out.form,)),
                ("child.cap", (out.form, out.tag), (out.cap,))]
    if fam == "dist":
        return [("dist", cond, (out,))]
    if fam == "parent":
        ctag = cond[1]
        return [("parent.tag", (ctag, short(ctag)), (out.tag,)),
                ("parent.word", (out.tag,), (out.form,)),
                ("parent.cap", (out.form, out.tag), (out.cap,))]
    if fam == "parent.dir":
        ctag, ptag = cond
        return [("parent.dir", (ctag, ptag, short(ctag), tagset.tiny(ptag)), (out,))]
    if fam == "link":
        *fields, d = cond
        full = tuple(fields) if d is None else (d,) + tuple(fields)
        return [("link", full, (out,))]
    raise ValueError("unknown factor family %r" % fam)


# ---------------------------------------------------------------------------
# Event constructors. Conditions keep only what some reduction reads.


def trigram_event(prev2: TaggedWord, prev: TaggedWord, nxt: TaggedWord) -> Event:
    return Event("trigram", (prev2.tag, prev.tag), nxt)


def child_event(tagset, head: TaggedWord, sib_tag: str, child: TaggedWord,
                direction: str) -> Event:
    return Event("child", (head.form, head.tag, tagset.short(sib_tag), direction),
                 child)


def distance_event(head: TaggedWord, child: TaggedWord, bucket: str) -> Event:
    return Event("dist", (child.form, child.tag, head.tag), bucket)


def parent_event(child: TaggedWord, parent: TaggedWord) -> Event:
    return Event("parent", (child.form, child.tag), parent)


def parent_dir_event(child: TaggedWord, parent: TaggedWord, direction: str) -> Event:
    return Event("parent.dir", (child.tag, parent.tag), direction)


def link_event(tagset, cand: TaggedWord, head: TaggedWord, sib_tag: str,
               decision: str, bucket: Optional[str] = None) -> Event:
    return Event("link", (cand.form, cand.tag, head.form, head.tag,
                          tagset.short(sib_tag), tagset.tiny(sib_tag), bucket),
                 decision)


# ---------------------------------------------------------------------------
# Walking a structure


def structure_events(model_id: ModelId, tagset: TagSet, d: DependencyStructure,
                     use_distance: bool = False) -> List[Event]:
    """Events whose scores multiply to Pr(d) under ``model_id``."""
    return list(_walk(ModelId(model_id), tagset, d, use_distance, training=False))


def training_events(model_id: ModelId, tagset: TagSet, d: DependencyStructure,
                    use_distance: bool = False) -> List[Event]:
    """Events counted when training on ``d``.

    Identical to :func:`structure_events` except for model D, whose link
    estimator also needs the rejected candidates ("no" events).
    """
    return list(_walk(ModelId(model_id), tagset, d, use_distance, training=True))


def _walk(m: ModelId, tagset, d, use_distance, training):
    n = d.n
    tw = d.tw
    if m in TRIGRAM_MODELS:
        yield from trigram_events(tw, n)
    if m in CHILD_MODELS or m in LINK_MODELS:
        kids = d.children()
        for k in range(1, n + 2):
            for side in (LEFT, RIGHT):
                yield from side_events(m, tagset, tw, n, k, side, kids[k][side],
                                       use_distance, training)
    if m in PARENT_MODELS:
        for i in range(1, n + 1):
            yield from parent_events(m, tw, i, d.parents[i - 1])


def trigram_events(tw, n: int):
    """Trigram events predicting positions 1..n+1; ``tw`` maps positions to words."""
    for k in range(0, n + 1):
        yield trigram_event(tw(k - 1), tw(k), tw(k + 1))


def parent_events(m: ModelId, tw, i: int, p: int):
    yield parent_event(tw(i), tw(p))
    if m == ModelId.B2:
        yield parent_dir_event(tw(i), tw(p), RIGHT if p > i else LEFT)


def side_events(m: ModelId, tagset, tw, n: int, k: int, side: str, seq,
                use_distance: bool = False, training: bool = False):
    """Events generated by head ``k`` on one side, given its children there
    (closest first)."""
    head = tw(k)
    if m == ModelId.D:
        yield from _d_side(tagset, tw, n, k, side, seq, use_distance, training)
    elif m == ModelId.A:
        scan = range(k - 1, 0, -1) if side == LEFT else range(k + 1, n + 1)
        sib = BOKIDS
        for i in scan:
            yes = i in seq
            bucket = dist(i, k) if use_distance else None
            yield link_event(tagset, tw(i), head, sib, YES if yes else NO, bucket)
            if yes:
                sib = tw(i).tag
    else:
        sib = BOKIDS
        for c in seq:
            child = tw(c)
            yield child_event(tagset, head, sib, child, side)
            if m == ModelId.C_DIST:
                yield distance_event(head, child, dist(k, c))
            sib = child.tag
        yield child_event(tagset, head, sib, EOKIDS_TW, side)


def _d_side(tagset, tw, n, k, side, seq, use_distance, training):
    """Model D: select real children outward, then EOKIDS.

    At step c the available candidates are every word beyond the c-th child
    on this side, plus EOKIDS.
    """
    head = tw(k)
    if side == LEFT:
        pool = list(range(k - 1, 0, -1))
    else:
        pool = list(range(k + 1, n + 1))
    sib = BOKIDS
    prev_pos = k
    stop_bucket = EOKIDS if use_distance else None
    for c in list(seq) + [None]:
        if training:
            beyond = [i for i in pool if (i < prev_pos if side == LEFT else i > prev_pos)]
            for i in beyond:
                if i != c:
                    yield link_event(tagset, tw(i), head, sib, NO,
                                     dist(i, k) if use_distance else None)
        if c is None:
            yield link_event(tagset, EOKIDS_TW, head, sib, YES, stop_bucket)
            break
        if training:
            yield link_event(tagset, EOKIDS_TW, head, sib, NO, stop_bucket)
        yield link_event(tagset, tw(c), head, sib, YES,
                         dist(c, k) if use_distance else None)
        sib = tw(c).tag
        prev_pos = c


# ---------------------------------------------------------------------------
# Trained models


@dataclass
class BaselineStats:
    form_tag: Dict[str, str] = field(default_factory=dict)
    symbol_cap_tag: Dict[str, str] = field(default_factory=dict)
    default_tag: Optional[str] = None
    tag_offset: Dict[str, int] = field(default_factory=dict)

    def to_dict(self):
        return {"form_tag": self.form_tag, "symbol_cap_tag": self.symbol_cap_tag,
                "default_tag": self.default_tag, "tag_offset": self.tag_offset}


class PreparedSentence(NamedTuple):
    forms: tuple
    caps: tuple
    unknown: tuple


class TrainedModel:
    """A model id plus frozen count tables; immutable after training."""

    def __init__(self, model_id, tagset: TagSet, tables: Dict[str, CountTable],
                 cfg: SmoothingConfig, tag_dictionary: Dict[str, frozenset],
                 baseline: BaselineStats, use_distance: bool = False,
                 lexicon: Optional[Iterable[str]] = None):
        self.model_id = ModelId(model_id)
        if use_distance and self.model_id not in LINK_MODELS:
            raise ValueError("use_distance applies to models A and D only")
        self.use_distance = use_distance
        self.tagset = tagset
        self.cfg = cfg
        self.reduction_lists = sub_factor_lists(self.model_id, use_distance)
        tables = dict(tables)
        for name in self.reduction_lists:
            tables.setdefault(name, CountTable().freeze())
        extra = set(tables) - set(self.reduction_lists)
        if extra:
            raise ValueError("unexpected count tables for model %s: %s"
                             % (self.model_id.value, sorted(extra)))
        for t in tables.values():
            if not t.frozen:
                t.freeze()
        self.tables = tables
        self.tag_dictionary = {f: frozenset(ts) for f, ts in tag_dictionary.items()}
        self.baseline = baseline
        self.lexicon = frozenset(self.tag_dictionary if lexicon is None else lexicon)
        self._cache: Dict[Event, float] = {}

    @property
    def vocabulary(self):
        return self.tag_dictionary.keys()

    def __repr__(self):
        return "TrainedModel(%s%s, %d events)" % (
            self.model_id.value, ", distance" if self.use_distance else "",
            sum(len(t) for t in self.tables.values()))

    def event_logscore(self, event: Event) -> float:
        try:
            return self._cache[event]
        except KeyError:
            pass
        total = 0.0
        for name, cond, outcome in decompose(event, self.tagset):
            rl = self.reduction_lists[name]
            total += _log(estimate(self.tables[name], cond, outcome, rl, self.cfg))
        self._cache[event] = total
        return total

    def prepare(self, sentence: Sentence) -> PreparedSentence:
        """Attenuate words outside the training vocabulary."""
        forms = []
        for f in sentence.forms():
            forms.append(f if f in self.tag_dictionary else attenuate_token(f))
        unknown = tuple(f not in self.lexicon for f in sentence.forms())
        return PreparedSentence(tuple(forms), sentence.cap_classes(), unknown)

    def structure_for(self, sentence: Sentence, tags, parents) -> DependencyStructure:
        prep = self.prepare(sentence)
        tws = tuple(TaggedWord(f, t, c) for f, t, c in zip(prep.forms, tags, prep.caps))
        return DependencyStructure(tws, parents)

    # -- serialization ----------------------------------------------------

    def dump(self, stream) -> None:
        header = {
            "model": self.model_id.value,
            "use_distance": self.use_distance,
            "tagset": [[t, self.tagset.short_map[t], self.tagset.tiny_map[t]]
                       for t in self.tagset.tags],
            "tag_dictionary": {f: sorted(ts) for f, ts in
                               sorted(self.tag_dictionary.items())},
            "baseline": self.baseline.to_dict(),
            "lexicon": sorted(self.lexicon),
        }
        stream.write("#depmodels-model 1\n")
        stream.write(json.dumps(header, sort_keys=True) + "\n")
        dump_tables(self.tables, self.cfg, stream)

    def dumps(self) -> str:
        buf = io.StringIO()
        self.dump(buf)
        return buf.getvalue()

    @classmethod
    def load(cls, stream) -> "TrainedModel":
        if isinstance(stream, str):
            stream = io.StringIO(stream)
        first = stream.readline().split()
        if first != ["#depmodels-model", "1"]:
            raise ValueError("not a depmodels model file")
        header = json.loads(stream.readline())
        tables, cfg = load_tables(stream)
        b = header["baseline"]
        baseline = BaselineStats(b["form_tag"], b["symbol_cap_tag"],
                                 b["default_tag"],
                                 {t: int(o) for t, o in b["tag_offset"].items()})
        return cls(header["model"], TagSet.from_rows(header["tagset"]), tables,
                   cfg, header["tag_dictionary"], baseline,
                   use_distance=header["use_distance"], lexicon=header["lexicon"])


def train(model_id, corpus: Corpus, cfg: Optional[SmoothingConfig] = None,
          use_distance: bool = False, lexicon: Optional[Iterable[str]] = None
          ) -> TrainedModel:
    """Count the events of every gold structure in an (attenuated) corpus.

    ``lexicon`` is the set of word forms seen before attenuation; it only
    feeds unknown-word reporting.
    """
    model_id = ModelId(model_id)
    cfg = cfg or SmoothingConfig()
    rls = sub_factor_lists(model_id, use_distance)
    tables = {name: CountTable() for name in rls}
    tagset = corpus.tagset
    tagdict = defaultdict(set)
    form_tags = defaultdict(Counter)
    symbol_tags = defaultdict(Counter)
    all_tags = Counter()
    offsets = defaultdict(Counter)
    for si, sent in enumerate(corpus.sentences(), 1):
        if sent.tags is None or sent.parents is None:
            raise ValueError("sentence %d lacks gold tags or parents" % si)
        d = sent.structure()
        if not validate_structure(d):
            raise ValueError("sentence %d: ill-formed gold structure" % si)
        for i, tw in enumerate(d.tagged_words, 1):
            tagdict[tw.form].add(tw.tag)
            form_tags[tw.form][tw.tag] += 1
            if is_attenuation_symbol(tw.form):
                symbol_tags[tw.form + "\t" + tw.cap][tw.tag] += 1
            all_tags[tw.tag] += 1
            offsets[tw.tag][d.parents[i - 1] - i] += 1
        if model_id == ModelId.BASELINE:
            continue
        for ev in training_events(model_id, tagset, d, use_distance):
            for name, cond, outcome in decompose(ev, tagset):
                observe(tables[name], cond, outcome, rls[name])

    def modal_tag(counter):
        return min(counter.items(), key=lambda kv: (-kv[1], tagset.index(kv[0])))[0]

    baseline = BaselineStats(
        form_tag={f: modal_tag(c) for f, c in form_tags.items()},
        symbol_cap_tag={k: modal_tag(c) for k, c in symbol_tags.items()},
        default_tag=modal_tag(all_tags) if all_tags else None,
        tag_offset={t: min(c.items(), key=lambda kv: (-kv[1], abs(kv[0]), kv[0]))[0]
                    for t, c in offsets.items()},
    )
    return TrainedModel(model_id, tagset, {k: t.freeze() for k, t in tables.items()},
                        cfg, tagdict, baseline, use_distance, lexicon)


def event_counts(m: TrainedModel) -> Dict[str, int]:
    """Number of observed events per count table (sum of top-level counts)."""
    out = {}
    for name, rl in m.reduction_lists.items():
        top = rl[0][0].name
        out[name] = sum(c for (proj, _, _), c in m.tables[name].events.items()
                        if proj == top)
    return out


# ---------------------------------------------------------------------------
# Factor functions


def trigram_factor(m: TrainedModel, tw_prev2: TaggedWord, tw_prev: TaggedWord,
                   tw_next: TaggedWord) -> float:
    return m.event_logscore(trigram_event(tw_prev2, tw_prev, tw_next))


def child_factor(m: TrainedModel, parent: TaggedWord, prev_sibling: TaggedWord,
                 child: TaggedWord, direction: str) -> float:
    if m.model_id not in CHILD_MODELS:
        raise ValueError("model %s has no child factors" % m.model_id.value)
    return m.event_logscore(child_event(m.tagset, parent, prev_sibling.tag, child,
                                        direction))


def distance_factor(m: TrainedModel, parent: TaggedWord, prev_sibling: TaggedWord,
                    child: TaggedWord, bucket: str) -> float:
    """Distance of a generated child from its head (C_dist)."""
    if m.model_id != ModelId.C_DIST:
        raise ValueError("distance factor belongs to model C_dist; models A "
                         "and D fold distance into link_factor")
    return m.event_logscore(distance_event(parent, child, bucket))


def parent_factor(m: TrainedModel, child: TaggedWord, parent: TaggedWord,
                  parent_dir: Optional[str] = None) -> float:
    if m.model_id not in PARENT_MODELS:
        raise ValueError("model %s has no parent factors" % m.model_id.value)
    if (parent_dir is not None) != (m.model_id == ModelId.B2):
        raise ValueError("parent_dir is required for B2 and only for B2")
    score = m.event_logscore(parent_event(child, parent))
    if parent_dir is not None:
        score += m.event_logscore(parent_dir_event(child, parent, parent_dir))
    return score


def link_factor(m: TrainedModel, candidate: TaggedWord, head: TaggedWord,
                prev_child: TaggedWord, decision: str = YES,
                bucket: Optional[str] = None) -> float:
    if m.model_id not in LINK_MODELS:
        raise ValueError("model %s has no link factors" % m.model_id.value)
    if m.model_id == ModelId.D and decision != YES:
        raise ValueError("model D never scores rejected links")
    if (bucket is not None) != m.use_distance:
        raise ValueError("distance bucket required iff the model uses distance")
    return m.event_logscore(link_event(m.tagset, candidate, head, prev_child.tag,
                                       decision, bucket))


def score_structure(m: TrainedModel, d: DependencyStructure
                    ) -> Tuple[float, FactorTrace]:
    verdict = validate_structure(d)
    if not verdict:
        raise ValueError("cannot score ill-formed structure: %s" % verdict.reason)
    for tw in d.tagged_words:
        if tw.tag not in m.tagset:
            raise ValueError("tag %r not in the model's tag set" % tw.tag)
    trace = FactorTrace()
    if m.model_id == ModelId.BASELINE:
        return 0.0, trace
    total = 0.0
    for ev in structure_events(m.model_id, m.tagset, d, m.use_distance):
        s = m.event_logscore(ev)
        trace.append(TraceEntry(ev.family, ev.condition, ev.outcome, s))
        total += s
    return total, trace


def structure_logscore(m: TrainedModel, d: DependencyStructure) -> float:
    """Log score without validation or trace; for inner search loops."""
    if m.model_id == ModelId.BASELINE:
        return 0.0
    score = m.event_logscore
    return sum(score(ev) for ev in
               _walk(m.model_id, m.tagset, d, m.use_distance, training=False))


# ---------------------------------------------------------------------------
# Baseline


def baseline_tag(m: TrainedModel, form: str, cap: str) -> str:
    b = m.baseline
    if form in b.form_tag:
        return b.form_tag[form]
    sym = attenuate_token(form)
    key = sym + "\t" + cap
    if key in b.symbol_cap_tag:
        return b.symbol_cap_tag[key]
    if sym in b.form_tag:
        return b.form_tag[sym]
    if b.default_tag is None:
        raise ValueError("baseline statistics are empty")
    return b.default_tag


def baseline_parse(m: TrainedModel, s: Sentence) -> Tuple[tuple, tuple]:
    """Modal tag per word, then the tag's modal signed offset to a parent.

    The result need not be a well-formed structure.
    """
    n = s.n
    tags = tuple(baseline_tag(m, f, c) for f, c in zip(s.forms(), s.cap_classes()))
    parents = []
    for i, t in enumerate(tags, 1):
        p = i + m.baseline.tag_offset.get(t, 1)
        p = min(max(p, 1), n + 1)
        if p == i:
            p = i + 1
        parents.append(p)
    return tags, tuple(parents)

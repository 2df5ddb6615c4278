"""Tagged words, sentences, dependency structures and the corpus file format.

Positions are 1-based. A sentence of ``n`` words has its end-of-sentence
mark at position ``n + 1``; in files the parent index ``0`` stands for it.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence, TextIO

import numpy as np

BOS = "BOS"
EOS = "EOS"
BOKIDS = "BOKIDS"
EOKIDS = "EOKIDS"
SPECIAL_SYMBOLS = frozenset([BOS, EOS, BOKIDS, EOKIDS])

MORPH_PREFIX = "MORPH-"
MORPH_NUM = "MORPH-NUM"
MORPH_SHORT = "MORPH-SHORT"

TINY_CLASSES = (
    "Noun", "Verb", "NounModifier", "Adverb", "Preposition", "WhWord",
    "Punctuation",
)
PUNCTUATION = "Punctuation"

LEFT = "L"
RIGHT = "R"

DIST_BUCKETS = ("1", "2", "3-6", "7-inf")


class CapClass(str, enum.Enum):
    DOWN = "DOWN"
    UP = "UP"
    INIT = "INIT"
    CAP = "CAP"


class CorpusFormatError(ValueError):
    """Malformed corpus input; carries the offending line number."""

    def __init__(self, message: str, lineno: Optional[int] = None,
                 field_name: Optional[str] = None):
        self.lineno = lineno
        self.field_name = field_name
        where = ""
        if lineno is not None:
            where = "line %d: " % lineno
        if field_name:
            where += "%s: " % field_name
        super().__init__(where + message)


@dataclass(frozen=True)
class TagSet:
    tags: tuple
    short_map: dict
    tiny_map: dict
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tags = tuple(self.tags)
        object.__setattr__(self, "tags", tags)
        if len(set(tags)) != len(tags):
            raise ValueError("duplicate tags in tag set")
        for tag in tags:
            if tag in SPECIAL_SYMBOLS or tag.startswith(MORPH_PREFIX):
                raise ValueError("tag %r collides with a reserved symbol" % tag)
            if tag not in self.short_map or tag not in self.tiny_map:
                raise ValueError("tag %r lacks a short or tiny class" % tag)
            if self.tiny_map[tag] not in TINY_CLASSES:
                raise ValueError("tag %r has unknown tiny class %r"
                                 % (tag, self.tiny_map[tag]))
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(tags)})

    def __contains__(self, tag):
        return tag in self._index

    def __len__(self):
        return len(self.tags)

    def index(self, tag: str) -> int:
        return self._index[tag]

    def short(self, tag: str) -> str:
        if tag in SPECIAL_SYMBOLS:
            return tag
        return self.short_map[tag]

    def tiny(self, tag: str) -> str:
        if tag in SPECIAL_SYMBOLS:
            return tag
        return self.tiny_map[tag]

    def is_punctuation(self, tag: str) -> bool:
        return self.tiny(tag) == PUNCTUATION

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[str]]) -> "TagSet":
        rows = list(rows)
        return cls(tuple(r[0] for r in rows), {r[0]: r[1] for r in rows},
                   {r[0]: r[2] for r in rows})


class TaggedWord(NamedTuple):
    form: str
    tag: str
    cap: str = CapClass.DOWN.value

    @property
    def word(self) -> str:
        return self.form


BOS_TW = TaggedWord(BOS, BOS)
EOS_TW = TaggedWord(EOS, EOS)
BOKIDS_TW = TaggedWord(BOKIDS, BOKIDS)
EOKIDS_TW = TaggedWord(EOKIDS, EOKIDS)


def is_attenuation_symbol(form: str) -> bool:
    return form.startswith(MORPH_PREFIX)


def normalize_form(word: str) -> str:
    """Lowercase a surface word; attenuation and special symbols pass through."""
    if is_attenuation_symbol(word) or word in SPECIAL_SYMBOLS:
        return word
    return word.lower()


def has_word_chars(word: str) -> bool:
    return any(ch.isalnum() for ch in word)


def cap(form: str, is_first_nonpunct: bool = False) -> CapClass:
    """Capitalization class of a surface form.

    Only alphabetic characters are inspected; a form without letters is DOWN.
    """
    letters = [ch for ch in form if ch.isalpha()]
    if not letters or all(ch.islower() for ch in letters):
        return CapClass.DOWN
    if len(letters) >= 2 and all(ch.isupper() for ch in letters):
        return CapClass.UP
    if (is_first_nonpunct and letters[0].isupper()
            and all(ch.islower() for ch in letters[1:])):
        return CapClass.INIT
    return CapClass.CAP


def sentence_caps(words: Sequence[str]) -> tuple:
    """Cap classes for a whole sentence; the first token with a letter or
    digit is the first non-punctuation word."""
    out = []
    seen_word = False
    for w in words:
        first = False
        if not seen_word and has_word_chars(w):
            first = seen_word = True
        out.append(cap(w, first).value)
    return tuple(out)


def dist(i: int, j: int) -> str:
    if i == j:
        raise ValueError("dist() needs two distinct positions")
    d = abs(i - j)
    if d == 1:
        return "1"
    if d == 2:
        return "2"
    if d <= 6:
        return "3-6"
    return "7-inf"


def attenuate_token(form: str) -> str:
    """Morphological class symbol that replaces an unknown word."""
    if not form:
        raise ValueError("empty form")
    if is_attenuation_symbol(form):
        return form
    if form[-1].isdigit():
        return MORPH_NUM
    if len(form) >= 6:
        return MORPH_PREFIX + form[-2:].upper()
    return MORPH_SHORT


# ---------------------------------------------------------------------------
# Sentences and structures


@dataclass(frozen=True)
class Sentence:
    words: tuple
    tags: Optional[tuple] = None
    parents: Optional[tuple] = None
    # Explicit cap classes; set when words were replaced by attenuation
    # symbols so the original capitalization survives.
    caps: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        n = len(self.words)
        if n == 0:
            raise ValueError("empty sentence")
        if any(not w for w in self.words):
            raise ValueError("empty word form")
        for name in ("tags", "parents", "caps"):
            val = getattr(self, name)
            if val is not None:
                val = tuple(val)
                object.__setattr__(self, name, val)
                if len(val) != n:
                    raise ValueError("%s has length %d, expected %d"
                                     % (name, len(val), n))
        if self.parents is not None:
            for i, p in enumerate(self.parents, 1):
                if not 1 <= p <= n + 1:
                    raise ValueError("parent out of range at word %d: %r" % (i, p))

    @property
    def n(self) -> int:
        return len(self.words)

    @property
    def gold_tags(self):
        return self.tags

    @property
    def gold_parents(self):
        return self.parents

    def cap_classes(self) -> tuple:
        return self.caps if self.caps is not None else sentence_caps(self.words)

    def forms(self) -> tuple:
        return tuple(normalize_form(w) for w in self.words)

    def tagged_words(self, tags: Optional[Sequence[str]] = None) -> tuple:
        tags = self.tags if tags is None else tags
        if tags is None:
            raise ValueError("sentence has no tags")
        return tuple(TaggedWord(f, t, c) for f, t, c in
                     zip(self.forms(), tags, self.cap_classes()))

    def structure(self) -> "DependencyStructure":
        if self.tags is None or self.parents is None:
            raise ValueError("sentence lacks gold tags or parents")
        return DependencyStructure(self.tagged_words(), self.parents)

    def replace(self, **kw) -> "Sentence":
        vals = dict(words=self.words, tags=self.tags, parents=self.parents,
                    caps=self.caps)
        vals.update(kw)
        return Sentence(**vals)


@dataclass(frozen=True)
class Section:
    id: str
    sentences: tuple

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        if not self.sentences:
            raise ValueError("section %r is empty" % self.id)


@dataclass(frozen=True)
class Corpus:
    tagset: TagSet
    sections: tuple

    def __post_init__(self):
        object.__setattr__(self, "sections", tuple(self.sections))
        ids = [s.id for s in self.sections]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate section ids")
        for sent in self.sentences():
            if sent.tags is None:
                continue
            for t in sent.tags:
                if t not in self.tagset:
                    raise ValueError("tag %r not in tag set" % t)

    def sentences(self) -> Iterator[Sentence]:
        for sec in self.sections:
            yield from sec.sentences

    def __len__(self):
        return sum(len(s.sentences) for s in self.sections)

    def vocabulary(self) -> set:
        return {f for s in self.sentences() for f in s.forms()}


@dataclass(frozen=True)
class DependencyStructure:
    tagged_words: tuple
    parents: tuple

    def __post_init__(self):
        object.__setattr__(self, "tagged_words", tuple(self.tagged_words))
        object.__setattr__(self, "parents", tuple(self.parents))
        if len(self.tagged_words) != len(self.parents):
            raise ValueError("tagged_words and parents differ in length")

    @property
    def n(self) -> int:
        return len(self.parents)

    @property
    def tags(self) -> tuple:
        return tuple(tw.tag for tw in self.tagged_words)

    def tw(self, i: int) -> TaggedWord:
        """Tagged word at position ``i``; ``n + 1`` is EOS, ``0`` and below BOS."""
        if i <= 0:
            return BOS_TW
        if i == self.n + 1:
            return EOS_TW
        return self.tagged_words[i - 1]

    def children(self) -> dict:
        return children_lists(self.parents)

    def kid(self, k: int, c: int) -> int:
        """Index of the c-th closest child of k (negative c: left side).

        ``kid(k, 0)`` is ``k`` itself; its tagged word reads as BOKIDS.
        """
        if c == 0:
            return k
        side = self.children()[k][RIGHT if c > 0 else LEFT]
        return side[abs(c) - 1]


def children_lists(parents: Sequence[int]) -> dict:
    """Map every position 1..n+1 to its left and right children, closest first."""
    n = len(parents)
    kids = {k: {LEFT: [], RIGHT: []} for k in range(1, n + 2)}
    for i, p in enumerate(parents, 1):
        kids[p][LEFT if i < p else RIGHT].append(i)
    for k, sides in kids.items():
        sides[LEFT].sort(reverse=True)
        sides[RIGHT].sort()
    return kids


class Verdict(NamedTuple):
    ok: bool
    reason: Optional[str] = None

    def __bool__(self):
        return self.ok


def validate_structure(d) -> Verdict:
    """Check one EOS child, no crossing links and no cycles, in that order."""
    parents = d.parents if isinstance(d, (DependencyStructure, Sentence)) else d
    parents = tuple(parents)
    n = len(parents)
    for i, p in enumerate(parents, 1):
        if not 1 <= p <= n + 1:
            return Verdict(False, "parent out of range at word %d" % i)
        if p == i:
            return Verdict(False, "cycle")
    roots = sum(1 for p in parents if p == n + 1)
    if roots != 1:
        return Verdict(False, "multi-root" if roots > 1 else "no root")
    spans = [(min(i, p), max(i, p)) for i, p in enumerate(parents, 1)]
    for x in range(n):
        a, b = spans[x]
        for y in range(x + 1, n):
            c, e = spans[y]
            if a < c < b < e or c < a < e < b:
                return Verdict(False, "crossing")
    for i in range(1, n + 1):
        seen = set()
        j = i
        while j != n + 1:
            if j in seen:
                return Verdict(False, "cycle")
            seen.add(j)
            j = parents[j - 1]
    return Verdict(True, None)


def validate_many(parents) -> np.ndarray:
    """Vectorized accept/reject of many parent vectors of one length.

    ``parents`` is an (m, n) integer array; the result is a boolean mask
    agreeing with :func:`validate_structure`. Rejected rows are dropped as
    soon as one test fails, so later tests only see survivors.
    """
    P = np.asarray(parents, dtype=np.int64)
    if P.ndim != 2:
        raise ValueError("expected an (m, n) array")
    m, n = P.shape
    pos = np.arange(1, n + 1)
    keep = np.flatnonzero(((P >= 1) & (P <= n + 1) & (P != pos)).all(axis=1)
                          & ((P == n + 1).sum(axis=1) == 1))
    Q = P[keep]
    lo = np.minimum(Q, pos)
    hi = np.maximum(Q, pos)
    for x in range(n):
        for y in range(x + 1, n):
            a, b, c, e = lo[:, x], hi[:, x], lo[:, y], hi[:, y]
            good = ~(((a < c) & (c < b) & (b < e)) | ((c < a) & (a < e) & (e < b)))
            if not good.all():
                keep, Q, lo, hi = keep[good], Q[good], lo[good], hi[good]
    # Follow parent pointers n times; EOS absorbs, so acyclic rows end at n+1.
    ext = np.empty((len(Q), n + 2), dtype=np.int64)
    ext[:, 0] = 0
    ext[:, 1:n + 1] = Q
    ext[:, n + 1] = n + 1
    cur = ext[:, 1:n + 1]
    for _ in range(n):
        cur = np.take_along_axis(ext, cur, axis=1)
    ok = np.zeros(m, dtype=bool)
    ok[keep[(cur == n + 1).all(axis=1)]] = True
    return ok


# ---------------------------------------------------------------------------
# Attenuation


def attenuate_training_corpus(train: Corpus, protected_vocab=frozenset()) -> Corpus:
    """Replace each word type by its morphological class throughout the first
    section in which it appears, unless the type is protected."""
    protected = {normalize_form(w) for w in protected_vocab}
    first_section = {}
    for sec in train.sections:
        for sent in sec.sentences:
            for f in sent.forms():
                first_section.setdefault(f, sec.id)
    sections = []
    for sec in train.sections:
        sents = []
        for sent in sec.sentences:
            forms = sent.forms()
            hit = [first_section[f] == sec.id and f not in protected
                   and not is_attenuation_symbol(f) for f in forms]
            if not any(hit):
                sents.append(sent)
                continue
            words = tuple(attenuate_token(w) if h else w
                          for w, h in zip(sent.words, hit))
            sents.append(sent.replace(words=words, caps=sent.cap_classes()))
        sections.append(Section(sec.id, sents))
    return Corpus(train.tagset, sections)


# ---------------------------------------------------------------------------
# File format


def read_corpus(stream, validate: bool = True) -> Corpus:
    """Read the line-oriented corpus format.

    ``validate=False`` admits ill-formed (but in-range) parent vectors, as
    produced by the baseline parser.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    rows = []
    tagset = None
    sections = []
    cur_id = None
    cur_sents = []
    tokens = []
    in_tagset = False

    def flush_sentence():
        nonlocal tokens
        if tokens:
            cur_sents.append(_build_sentence(tokens, tagset, validate))
            tokens = []

    def flush_section():
        nonlocal cur_sents
        flush_sentence()
        if cur_id is not None:
            if not cur_sents:
                raise CorpusFormatError("section %r is empty" % cur_id)
            sections.append(Section(cur_id, cur_sents))
        cur_sents = []

    lineno = 0
    for lineno, raw in enumerate(stream, 1):
        line = raw.rstrip("\r\n")
        if in_tagset:
            if line.strip() == "#END":
                in_tagset = False
                try:
                    tagset = TagSet.from_rows(rows)
                except ValueError as err:
                    raise CorpusFormatError(str(err), lineno) from None
                continue
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise CorpusFormatError("expected tag<TAB>short<TAB>tiny",
                                        lineno, "tagset")
            rows.append(tuple(p.strip() for p in parts))
            continue
        stripped = line.strip()
        if stripped == "#TAGSET":
            if tagset is not None:
                raise CorpusFormatError("second #TAGSET block", lineno)
            in_tagset = True
            continue
        if stripped.startswith("#SECTION"):
            parts = stripped.split(None, 1)
            if len(parts) != 2:
                raise CorpusFormatError("section id missing", lineno, "section")
            flush_section()
            if parts[1] in {s.id for s in sections}:
                raise CorpusFormatError("duplicate section id %r" % parts[1],
                                        lineno, "section")
            cur_id = parts[1]
            continue
        if stripped.startswith("#"):
            raise CorpusFormatError("unknown directive %r" % stripped, lineno)
        if not stripped:
            flush_sentence()
            continue
        if tagset is None:
            raise CorpusFormatError("token before #TAGSET block", lineno)
        if cur_id is None:
            raise CorpusFormatError("token before first #SECTION", lineno)
        parts = line.split("\t")
        if len(parts) != 4:
            raise CorpusFormatError("expected 4 tab-separated fields", lineno)
        tokens.append((lineno, parts))
    if in_tagset:
        raise CorpusFormatError("unterminated #TAGSET block", lineno)
    flush_section()
    if tagset is None:
        raise CorpusFormatError("missing #TAGSET block", lineno)
    return Corpus(tagset, sections)


def _build_sentence(tokens, tagset, validate) -> Sentence:
    n = len(tokens)
    words, tags, parents = [], [], []
    for k, (lineno, (idx, form, tag, parent)) in enumerate(tokens, 1):
        if idx.strip() != str(k):
            raise CorpusFormatError("expected index %d, got %r" % (k, idx),
                                    lineno, "index")
        if not form:
            raise CorpusFormatError("empty form", lineno, "form")
        words.append(form)
        tag = tag.strip()
        if tag != "_" and tag not in tagset:
            raise CorpusFormatError("unknown tag %r" % tag, lineno, "tag")
        tags.append(tag)
        parent = parent.strip()
        if parent == "_":
            parents.append(None)
            continue
        try:
            p = int(parent)
        except ValueError:
            raise CorpusFormatError("parent %r is not an integer" % parent,
                                    lineno, "parent") from None
        if not 0 <= p <= n:
            raise CorpusFormatError("parent out of range", lineno, "parent")
        parents.append(n + 1 if p == 0 else p)
    tag_field = _all_or_none(tags, "_", tokens, "tag")
    parent_field = _all_or_none(parents, None, tokens, "parent")
    if validate and parent_field is not None:
        verdict = validate_structure(parent_field)
        if not verdict:
            raise CorpusFormatError("ill-formed structure: %s" % verdict.reason,
                                    tokens[0][0], "parent")
    return Sentence(tuple(words), tag_field, parent_field)


def _all_or_none(values, blank, tokens, name):
    missing = [v == blank for v in values]
    if all(missing):
        return None
    if any(missing):
        lineno = tokens[missing.index(True)][0]
        raise CorpusFormatError("mixed annotated and blank fields in sentence",
                                lineno, name)
    return tuple(values)


def write_corpus(corpus: Corpus, stream: TextIO) -> None:
    ts = corpus.tagset
    stream.write("#TAGSET\n")
    for t in ts.tags:
        stream.write("%s\t%s\t%s\n" % (t, ts.short_map[t], ts.tiny_map[t]))
    stream.write("#END\n")
    for sec in corpus.sections:
        stream.write("#SECTION %s\n" % sec.id)
        for sent in sec.sentences:
            n = sent.n
            for i, w in enumerate(sent.words, 1):
                tag = sent.tags[i - 1] if sent.tags is not None else "_"
                if sent.parents is None:
                    par = "_"
                else:
                    p = sent.parents[i - 1]
                    par = "0" if p == n + 1 else str(p)
                stream.write("%d\t%s\t%s\t%s\n" % (i, w, tag, par))
            stream.write("\n")


def corpus_to_string(corpus: Corpus) -> str:
    buf = io.StringIO()
    write_corpus(corpus, buf)
    return buf.getvalue()

"""Shared fixtures for the test modules: small tag sets and random corpora."""

import random

from depmodels.corpus import Corpus, Section, Sentence, TagSet
from depmodels.decoder import TagLattice, enumerate_projective

SMALL_TAGS = TagSet.from_rows([
    ("NN", "N", "Noun"),
    ("NNS", "N", "Noun"),
    ("VB", "V", "Verb"),
    ("VBD", "V", "Verb"),
    ("JJ", "J", "NounModifier"),
    ("IN", "I", "Preposition"),
    (".", ".", "Punctuation"),
])

VOCAB = ("a", "b", "c", "d", "e")


def random_sentence(rng, n, tagset=SMALL_TAGS, vocab=VOCAB):
    parents = rng.choice(list(enumerate_projective(n)))
    words = [rng.choice(vocab) for _ in range(n)]
    if rng.random() < 0.3:
        words[0] = words[0].capitalize()
    tags = [rng.choice(tagset.tags) for _ in range(n)]
    return Sentence(words, tags, parents)


def random_corpus(rng, sentences=15, max_n=6, tagset=SMALL_TAGS, vocab=VOCAB,
                  section_size=5):
    sents = [random_sentence(rng, rng.randint(1, max_n), tagset, vocab)
             for _ in range(sentences)]
    sections = [Section(str(i // section_size + 1), sents[i:i + section_size])
                for i in range(0, len(sents), section_size)]
    return Corpus(tagset, sections)


def random_lattice(rng, n, tagset=SMALL_TAGS, width=3):
    return TagLattice([sorted(rng.sample(tagset.tags, rng.randint(1, width)),
                              key=tagset.index) for _ in range(n)])


def projective_count(n):
    """Count single-rooted projective structures by the span recursion.

    f(m): ways to cover m adjacent words with subtrees hanging from one
    outside head; g(m): ways to make m adjacent words one subtree.
    """
    f = [1]
    g = [0]
    for m in range(1, n + 1):
        g.append(sum(f[r - 1] * f[m - r] for r in range(1, m + 1)))
        f.append(sum(g[s] * f[m - s] for s in range(1, m + 1)))
    return g[n]


def toy_corpus_text():
    return (
        "#TAGSET\n"
        "DT\tD\tNounModifier\nNN\tN\tNoun\nVB\tV\tVerb\n.\t.\tPunctuation\n"
        "#END\n"
        "#SECTION s1\n"
        "1\tThe\tDT\t2\n2\tdog\tNN\t3\n3\tbarks\tVB\t0\n4\t.\t.\t3\n\n"
        "1\tdogs\tNN\t2\n2\tbark\tVB\t0\n\n"
        "#SECTION s2\n"
        "1\tthe\tDT\t2\n2\tsaw\tNN\t3\n3\tbarks\tVB\t0\n\n"
    )


def shuffled(seq, seed):
    seq = list(seq)
    random.Random(seed).shuffle(seq)
    return seq


def bare(sentence):
    """The same words with tags and parents dropped."""
    return Sentence(list(sentence.words), caps=sentence.caps)

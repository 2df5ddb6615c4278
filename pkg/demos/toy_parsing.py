"""
Tagging and parsing a toy language
==================================

Sample a treebank from the built-in toy grammar, train the bigram-of-kids
model and the baseline, and read off a few parses.
"""

from depmodels import SearchSettings, aggregate, format_report, parse, score_sentences, train
from depmodels.corpus import Sentence, attenuate_training_corpus
from depmodels.models import baseline_parse
from depmodels.synth import toy_grammar

grammar = toy_grammar()
train_corpus = grammar.sample_corpus(1500, seed=1)
test = grammar.sample_sentences(150, seed=2)

# rare forms in the first section stand in for unknown words
lexicon = train_corpus.vocabulary()
attenuated = attenuate_training_corpus(train_corpus)
model = train("C", attenuated, lexicon=lexicon)
baseline = train("BASELINE", attenuated, lexicon=lexicon)

# "saw" and "man" can be nouns or verbs; context decides
for text in ["the man saw a dog .", "a big dog took the saw", "the old walk"]:
    r = parse(model, Sentence(text.split()))
    print(text)
    for i, (w, t, p) in enumerate(zip(text.split(), r.tags, r.parents), 1):
        head = "EOS" if p == len(r.tags) + 1 else text.split()[p - 1]
        print("   %d %-6s %-3s -> %s" % (i, w, t, head))

bare = [Sentence(s.words) for s in test]
ours = [(r.tags, r.parents) for r in (parse(model, s, SearchSettings()) for s in bare)]
theirs = [baseline_parse(baseline, s) for s in bare]

print(format_report(aggregate(score_sentences(test, ours, grammar.tagset)), "model C"))
print(format_report(aggregate(score_sentences(test, theirs, grammar.tagset)), "baseline"))

"""
Comparing the model family
==========================

Train every decodable model on the same sample, score it on held-out
sentences, then ask whether the best two differ by more than chance.
"""

import numpy as np

from depmodels import aggregate, compare_results, parse, score_sentences, train
from depmodels.corpus import Sentence
from depmodels.synth import toy_grammar

grammar = toy_grammar()
train_corpus = grammar.sample_corpus(600, seed=11)
test = grammar.sample_sentences(200, seed=12)
bare = [Sentence(s.words) for s in test]

results = {}
for mid in ["X", "B1", "B2", "B3", "C", "C_nolex", "C_dist", "D"]:
    m = train(mid, train_corpus)
    out = [(r.tags, r.parents) for r in (parse(m, s) for s in bare)]
    results[mid] = score_sentences(test, out, m=m)

rows = []
for mid, res in results.items():
    rep = aggregate(res)
    rows.append((mid, rep.attachment, rep.tagging, rep.contagion[2]))
    print("%-8s attach %5.1f   tag %5.1f   contagion %s"
          % (mid, rep.attachment, rep.tagging,
             "-" if rep.contagion[2] is None else "%.2f" % rep.contagion[2]))

# X never looks at structure, so its attachment is a floor, not a result
scores = np.array([r[1] for r in rows])
order = np.argsort(-scores)
first, second = rows[order[0]][0], rows[order[1]][0]
sig = compare_results(results[first], results[second], iterations=10000, seed=0)
print("\n%s over %s: attachment gain %.4f, p = %.4f" % (first, second, sig.mu, sig.p_value))

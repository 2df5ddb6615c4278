"""
How the chart grows with sentence length
========================================

Count chart combinations for sentences of one repeated word with a single
candidate tag, and fit the growth exponent on a log-log scale.
"""

import numpy as np

from depmodels import TagLattice, dp_parse, train
from depmodels.corpus import Sentence
from depmodels.synth import toy_grammar

model = train("C", toy_grammar().sample_corpus(300, seed=7))

sizes = np.array([5, 10, 20, 40, 60])
ops = np.array([dp_parse(model, Sentence(["dog"] * n), TagLattice([["NN"]] * n)).operations
                for n in sizes])
for n, k in zip(sizes, ops):
    print("n=%3d  combinations %8d  per n^3 %.3f" % (n, k, k / n ** 3))

slope, _ = np.polyfit(np.log(sizes), np.log(ops), 1)
print("growth exponent %.2f" % slope)

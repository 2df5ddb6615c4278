"""
When the decoder, not the model, is wrong
=========================================

A search error is a sentence whose gold analysis the model scores higher
than the decoder's output. Exact decoding never makes one; a width-1 beam
does, mostly on words whose tag is ambiguous.
"""

from depmodels import SearchSettings, build_lattice, dp_parse, train
from depmodels.corpus import Sentence
from depmodels.models import structure_logscore
from depmodels.synth import toy_grammar

grammar = toy_grammar()
model = train("C", grammar.sample_corpus(500, seed=51))
test = grammar.sample_sentences(200, seed=52)


def search_error(settings, true_tags):
    errors = 0
    for s in test:
        bare = Sentence(s.words)
        lattice = build_lattice(model, bare, s.tags if true_tags else None)
        out = dp_parse(model, bare, lattice, settings)
        gold = model.structure_for(s, s.tags, s.parents)
        errors += structure_logscore(model, gold) > out.log_score + 1e-9
    return 100.0 * errors / len(test)


for label, settings in [("exact", SearchSettings()), ("beam 1", SearchSettings.beam(1)),
                        ("beam 4", SearchSettings.beam(4))]:
    print("%-7s  search error %5.1f%%   with true tags %5.1f%%"
          % (label, search_error(settings, False), search_error(settings, True)))

"""Generative dependency models, an exact span decoder and evaluation tools."""

from .corpus import (
    BOKIDS, BOS, EOKIDS, EOS, CapClass, Corpus, CorpusFormatError,
    DependencyStructure, Section, Sentence, TaggedWord, TagSet,
    attenuate_token, attenuate_training_corpus, cap, dist, read_corpus,
    validate_structure, write_corpus,
)
from .estimation import (
    CountTable, Reduction, ReductionList, SmoothingConfig, estimate, observe,
    reductions,
)
from .models import (
    FactorTrace, ModelId, TrainedModel, baseline_parse, child_factor,
    distance_factor, link_factor, parent_factor, score_structure, train,
    trigram_factor,
)
from .decoder import (
    ParseResult, SearchSettings, TagLattice, brute_force_parse, build_lattice,
    detect_search_error, dp_parse, enumerate_projective, parse,
)
from .evaluation import (
    EvalReport, SignificanceResult, aggregate, compare_results, format_report,
    monte_carlo_compare, score_sentences,
)

__version__ = "0.1.0"

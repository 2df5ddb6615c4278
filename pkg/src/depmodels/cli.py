"""Command-line driver: train, parse, eval, compare, synth.

Settings come from flags, then an optional JSON config file (--config),
then built-in defaults; --show-config prints the merged result.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional

from . import __version__
from .corpus import (
    Corpus, CorpusFormatError, Section, Sentence, attenuate_training_corpus,
    corpus_to_string, read_corpus,
)
from .decoder import (
    SearchLimitError, SearchSettings, brute_force_parse, build_lattice, dp_parse,
)
from .estimation import SmoothingConfig
from .evaluation import aggregate, compare_results, format_report, score_sentences
from .models import ModelId, TrainedModel, baseline_parse, event_counts, train
from .synth import HandGrammar, ModelSampler, toy_grammar

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CHECK = 0, 1, 2, 3

DEFAULTS: Dict[str, Dict[str, object]] = {
    "train": {"model": None, "input": None, "out": None, "distance": False,
              "protect": None, "attenuate": True, "skip_threshold": None},
    "parse": {"model_file": None, "input": None, "out": None, "exact": True,
              "beam": None, "true_tags": None, "oracle_check": 0, "workers": 1},
    "eval": {"gold": None, "system": None, "model_file": None, "report": None},
    "compare": {"gold": None, "a": None, "b": None, "iterations": 10000, "seed": 0},
    "synth": {"grammar": None, "model_file": None, "count": 100, "seed": 0,
              "max_len": 10, "section_size": 50, "out": None},
}
REQUIRED = {
    "train": ("model", "input", "out"),
    "parse": ("model_file", "input"),
    "eval": ("gold", "system"),
    "compare": ("gold", "a", "b"),
    "synth": (),
}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class CheckFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "%s: error: %s\n" % (self.prog, message))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="depmodels", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    S = argparse.SUPPRESS

    def common(sp):
        sp.add_argument("--config", help="JSON file of settings for this command")
        sp.add_argument("--show-config", action="store_true",
                        help="print the effective settings and exit")

    t = sub.add_parser("train", help="train a model on an annotated corpus")
    common(t)
    t.add_argument("--model", default=S, choices=[m.value for m in ModelId])
    t.add_argument("--in", dest="input", default=S)
    t.add_argument("--out", default=S)
    t.add_argument("--distance", action="store_true", default=S,
                   help="distance-augmented link factors (A, D)")
    t.add_argument("--protect", default=S,
                   help="corpus whose word forms are never attenuated")
    t.add_argument("--no-attenuate", dest="attenuate", action="store_false", default=S)
    t.add_argument("--skip-threshold", type=int, default=S,
                   help="use raw counts once a condition count reaches this")

    q = sub.add_parser("parse", help="tag and parse a corpus")
    common(q)
    q.add_argument("--model-file", default=S)
    q.add_argument("--in", dest="input", default=S)
    q.add_argument("--out", default=S)
    q.add_argument("--exact", action="store_true", default=S)
    q.add_argument("--beam", type=int, default=S, metavar="W")
    q.add_argument("--true-tags", default=S,
                   help="corpus file whose tag column constrains the lattice")
    q.add_argument("--oracle-check", type=int, default=S, metavar="N",
                   help="brute-force sentences with n <= N and compare")
    q.add_argument("--workers", type=int, default=S)

    e = sub.add_parser("eval", help="score system output against gold")
    common(e)
    e.add_argument("--gold", default=S)
    e.add_argument("--system", default=S)
    e.add_argument("--model-file", default=S, help="enables search-error column")
    e.add_argument("--report", default=S)

    c = sub.add_parser("compare", help="randomized significance test")
    common(c)
    c.add_argument("--gold", default=S)
    c.add_argument("--a", default=S)
    c.add_argument("--b", default=S)
    c.add_argument("--iterations", type=int, default=S)
    c.add_argument("--seed", type=int, default=S)

    y = sub.add_parser("synth", help="sample a corpus from model C's story")
    common(y)
    y.add_argument("--grammar", default=S, help="JSON grammar file (default: toy)")
    y.add_argument("--model-file", default=S, help="trained C / C_nolex model")
    y.add_argument("--count", type=int, default=S)
    y.add_argument("--seed", type=int, default=S)
    y.add_argument("--max-len", type=int, default=S)
    y.add_argument("--section-size", type=int, default=S)
    y.add_argument("--out", default=S)
    return p


def resolve_config(command: str, args: argparse.Namespace) -> Dict[str, object]:
    """Flags over config file over defaults; unknown config keys rejected."""
    cfg = dict(DEFAULTS[command])
    path = getattr(args, "config", None)
    if path:
        try:
            with open(path) as fh:
                loaded = json.load(fh)
        except (OSError, ValueError) as err:
            raise DataError("cannot read config %s: %s" % (path, err))
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(cfg))
        if unknown:
            raise UsageError("unknown config keys for %s: %s"
                             % (command, ", ".join(unknown)))
        cfg.update(loaded)
    for key in DEFAULTS[command]:
        if hasattr(args, key):
            cfg[key] = getattr(args, key)
    if command == "parse" and "beam" in vars(args) and "exact" not in vars(args):
        cfg["exact"] = False
    if command == "parse" and cfg["beam"] is not None and cfg["exact"] is True \
            and "exact" in vars(args):
        raise UsageError("--exact and --beam are mutually exclusive")
    return cfg


def _check_required(command, cfg):
    missing = [k for k in REQUIRED[command] if cfg.get(k) in (None, "")]
    if missing:
        raise UsageError("missing required setting(s): %s"
                         % ", ".join("--" + k.replace("_", "-") for k in missing))


def _read(path: str, validate: bool = True) -> Corpus:
    try:
        with open(path, encoding="utf-8", errors="surrogateescape") as fh:
            return read_corpus(fh, validate=validate)
    except CorpusFormatError as err:
        raise DataError("%s: %s" % (path, err))
    except OSError as err:
        raise DataError(str(err))


def _write_text(path: Optional[str], text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", errors="surrogateescape") as fh:
            fh.write(text)
    except OSError as err:
        raise DataError(str(err))


def _load_model(path: str) -> TrainedModel:
    try:
        with open(path, encoding="utf-8", errors="surrogateescape") as fh:
            return TrainedModel.load(fh)
    except (OSError, ValueError, KeyError) as err:
        raise DataError("cannot load model %s: %s" % (path, err))


def read_tag_columns(path: str) -> List[List[str]]:
    """Tag column of a corpus-format file, per sentence. Tags are not checked
    against a tag set, so coarse (shortened) tags are allowed."""
    out, cur = [], []
    in_header = False
    try:
        fh = open(path, encoding="utf-8", errors="surrogateescape")
    except OSError as err:
        raise DataError(str(err))
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if line.strip() == "#TAGSET":
                in_header = True
                continue
            if in_header:
                in_header = line.strip() != "#END"
                continue
            if line.startswith("#"):
                continue
            if not line.strip():
                if cur:
                    out.append(cur)
                    cur = []
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataError("%s:%d: expected 4 tab-separated fields" % (path, lineno))
            cur.append(parts[2].strip())
    if cur:
        out.append(cur)
    return out


# ---------------------------------------------------------------------------
# train


def cmd_train(cfg) -> int:
    mid = ModelId(cfg["model"])
    corpus = _read(cfg["input"])
    for si, s in enumerate(corpus.sentences(), 1):
        if s.tags is None or s.parents is None:
            raise DataError("%s: sentence %d lacks gold tags or parents"
                            % (cfg["input"], si))
    if cfg["distance"] and mid not in (ModelId.A, ModelId.D):
        raise UsageError("--distance applies to models A and D only")
    lexicon = corpus.vocabulary()
    if cfg["attenuate"]:
        protected = _read(cfg["protect"], validate=False).vocabulary() \
            if cfg["protect"] else frozenset()
        corpus = attenuate_training_corpus(corpus, protected)
    smoothing = SmoothingConfig(skip_threshold=cfg["skip_threshold"])
    try:
        m = train(mid, corpus, smoothing, use_distance=bool(cfg["distance"]),
                  lexicon=lexicon)
    except ValueError as err:
        raise DataError(str(err))
    _write_text(cfg["out"], m.dumps())
    for name, count in sorted(event_counts(m).items()):
        print("%-14s %d" % (name, count))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parse

_WORKER_MODEL = None


def _worker_init(model_text):
    global _WORKER_MODEL
    _WORKER_MODEL = TrainedModel.load(model_text)


def _decode_one(job):
    sentence, settings, constraint = job
    return decode_sentence(_WORKER_MODEL, sentence, settings, constraint)


def decode_sentence(m: TrainedModel, s: Sentence, settings: SearchSettings,
                    constraint=None, oracle_n: int = 0):
    """(tags, parents, pruned, oracle outcome) for one sentence.

    The oracle outcome is None when not checked, else a mismatch message or "".
    """
    if m.model_id == ModelId.BASELINE:
        tags, parents = baseline_parse(m, s)
        return tags, parents, False, None
    lattice = build_lattice(m, s, constraint)
    if m.model_id == ModelId.A:
        r = brute_force_parse(m, s, lattice, settings)
        return r.tags, r.parents, False, None
    r = dp_parse(m, s, lattice, settings)
    oracle = None
    if oracle_n and s.n <= oracle_n:
        try:
            b = brute_force_parse(m, s, lattice, settings)
        except SearchLimitError:
            b = None
        if b is not None:
            oracle = ""
            if abs(b.log_score - r.log_score) > 1e-9 or (b.parents, b.tags) != (
                    r.parents, r.tags):
                oracle = ("chart %r %r %.12g vs brute force %r %r %.12g"
                          % (r.tags, r.parents, r.log_score, b.tags, b.parents,
                             b.log_score))
    return r.tags, r.parents, r.pruned, oracle


def cmd_parse(cfg) -> int:
    m = _load_model(cfg["model_file"])
    corpus = _read(cfg["input"], validate=False)
    if corpus.tagset != m.tagset:
        raise DataError("tag set of %s differs from the model's" % cfg["input"])
    if cfg["beam"] is not None:
        settings = SearchSettings.beam(int(cfg["beam"]))
    else:
        settings = SearchSettings()
    sentences = list(corpus.sentences())
    constraints = [None] * len(sentences)
    if cfg["true_tags"]:
        cols = read_tag_columns(cfg["true_tags"])
        if len(cols) != len(sentences) or any(len(c) != s.n for c, s in
                                              zip(cols, sentences)):
            raise DataError("true-tags file is not aligned with the input")
        constraints = cols
    workers = int(cfg["workers"] or 1)
    oracle_n = int(cfg["oracle_check"] or 0)
    try:
        if workers > 1 and not oracle_n:
            jobs = [(s, settings, c) for s, c in zip(sentences, constraints)]
            with ProcessPoolExecutor(workers, initializer=_worker_init,
                                     initargs=(m.dumps(),)) as ex:
                results = list(ex.map(_decode_one, jobs, chunksize=8))
        else:
            results = []
            for si, (s, c) in enumerate(zip(sentences, constraints), 1):
                r = decode_sentence(m, s, settings, c, oracle_n)
                if r[3]:
                    raise CheckFailure("oracle mismatch on sentence %d: %s" % (si, r[3]))
                results.append(r)
    except (ValueError, KeyError) as err:
        raise DataError(str(err))
    out_sections = []
    it = iter(results)
    for sec in corpus.sections:
        sents = []
        for s in sec.sentences:
            tags, parents, _, _ = next(it)
            sents.append(Sentence(s.words, tags, parents))
        out_sections.append(Section(sec.id, sents))
    _write_text(cfg["out"], corpus_to_string(Corpus(corpus.tagset, out_sections)))
    pruned = sum(1 for r in results if r[2])
    checked = sum(1 for r in results if r[3] is not None)
    print("sentences=%d pruned=%d oracle_checked=%d"
          % (len(results), pruned, checked), file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval / compare


def _aligned_results(gold_path, system_path, m=None):
    gold = _read(gold_path)
    system = _read(system_path, validate=False)
    gs, ss = list(gold.sentences()), list(system.sentences())
    if len(gs) != len(ss):
        raise DataError("gold has %d sentences, system has %d" % (len(gs), len(ss)))
    pairs = []
    for i, (g, s) in enumerate(zip(gs, ss), 1):
        if g.words != s.words:
            raise DataError("sentence %d: words differ between gold and system" % i)
        if s.tags is None or s.parents is None:
            raise DataError("sentence %d: system output lacks tags or parents" % i)
        if g.tags is None or g.parents is None:
            raise DataError("sentence %d: gold lacks tags or parents" % i)
        pairs.append((s.tags, s.parents))
    try:
        return score_sentences(gs, pairs, tagset=gold.tagset, m=m)
    except ValueError as err:
        raise DataError(str(err))


def cmd_eval(cfg) -> int:
    m = _load_model(cfg["model_file"]) if cfg["model_file"] else None
    results = _aligned_results(cfg["gold"], cfg["system"], m)
    _write_text(cfg["report"], format_report(aggregate(results)))
    return EXIT_OK


def cmd_compare(cfg) -> int:
    ra = _aligned_results(cfg["gold"], cfg["a"])
    rb = _aligned_results(cfg["gold"], cfg["b"])
    res = compare_results(ra, rb, iterations=int(cfg["iterations"]),
                          seed=int(cfg["seed"]))
    sys.stdout.write(res.format())
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth


def cmd_synth(cfg) -> int:
    if cfg["grammar"] and cfg["model_file"]:
        raise UsageError("give --grammar or --model-file, not both")
    if cfg["model_file"]:
        try:
            gen = ModelSampler(_load_model(cfg["model_file"]))
        except ValueError as err:
            raise DataError(str(err))
    elif cfg["grammar"]:
        try:
            with open(cfg["grammar"]) as fh:
                gen = HandGrammar.from_json(fh.read())
        except (OSError, ValueError, KeyError) as err:
            raise DataError("bad grammar %s: %s" % (cfg["grammar"], err))
    else:
        gen = toy_grammar()
    try:
        corpus = gen.sample_corpus(int(cfg["count"]), seed=int(cfg["seed"]),
                                   max_len=int(cfg["max_len"]),
                                   section_size=int(cfg["section_size"]))
    except RuntimeError as err:
        raise DataError(str(err))
    _write_text(cfg["out"], corpus_to_string(corpus))
    return EXIT_OK


COMMANDS = {"train": cmd_train, "parse": cmd_parse, "eval": cmd_eval,
            "compare": cmd_compare, "synth": cmd_synth}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = resolve_config(args.command, args)
        if args.show_config:
            print(json.dumps(cfg, indent=1, sort_keys=True))
            return EXIT_OK
        _check_required(args.command, cfg)
        return COMMANDS[args.command](cfg)
    except UsageError as err:
        print("depmodels: %s" % err, file=sys.stderr)
        return EXIT_USAGE
    except DataError as err:
        print("depmodels: %s" % err, file=sys.stderr)
        return EXIT_DATA
    except CheckFailure as err:
        print("depmodels: %s" % err, file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())

"""Count tables and the recursive backed-off conditional estimator.

A factor is estimated from a list of reductions, least severe first. Each
reduction projects the full condition tuple onto fewer (or coarser) fields;
a disjunctive reduction holds several projections whose numerators and
denominators are summed.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Sequence, TextIO, Tuple

FORMAT_TAG = "#depmodels-counts"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Projection:
    """Select fields of a full condition tuple by index."""

    name: str
    indices: Tuple[int, ...]

    def __call__(self, condition: tuple) -> tuple:
        return tuple(condition[i] for i in self.indices)


class Reduction(tuple):
    """One backoff level: a single projection or a disjunction of 2-3."""

    def __new__(cls, *projections: Projection):
        if not 1 <= len(projections) <= 3:
            raise ValueError("a reduction holds one to three projections")
        return super().__new__(cls, projections)

    @property
    def disjunctive(self) -> bool:
        return len(self) > 1


class ReductionList(tuple):
    def __new__(cls, *levels: Reduction):
        if not levels:
            raise ValueError("empty reduction list")
        if levels[-1].disjunctive:
            raise ValueError("the most severe reduction may not be disjunctive")
        names = [p.name for lvl in levels for p in lvl]
        if len(set(names)) != len(names):
            raise ValueError("duplicate projection names in reduction list")
        return super().__new__(cls, levels)

    def projections(self):
        for lvl in self:
            yield from lvl


def reductions(*levels) -> ReductionList:
    """Build a ReductionList from nested index tuples.

    ``reductions((0, 1), [(0,), (1,)], (2,))`` has a plain first level, a
    disjunctive second level and a plain last level. Projection names are
    derived from level and disjunct position.
    """
    built = []
    for li, lvl in enumerate(levels):
        if isinstance(lvl, list):
            projs = [Projection("%d%s" % (li, "abc"[di]), tuple(ix))
                     for di, ix in enumerate(lvl)]
        else:
            projs = [Projection(str(li), tuple(lvl))]
        built.append(Reduction(*projs))
    return ReductionList(*built)


@dataclass(frozen=True)
class SmoothingConfig:
    base_add_num: float = 0.005
    base_add_den: float = 0.5
    backoff_weight: float = 3.0
    skip_threshold: Optional[int] = None

    def __post_init__(self):
        if min(self.base_add_num, self.base_add_den, self.backoff_weight) <= 0:
            raise ValueError("smoothing constants must be positive")
        if self.skip_threshold is not None and self.skip_threshold < 1:
            raise ValueError("skip_threshold must be >= 1 or None")

    @classmethod
    def thresholded(cls) -> "SmoothingConfig":
        """Default constants plus the raw-count shortcut at a condition count of 8."""
        return cls(skip_threshold=8)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SmoothingConfig":
        return cls(**json.loads(text))


class CountTable:
    """Event and condition counts for one factor family.

    Keys carry the projection name, so two projections whose reduced tuples
    coincide never share a count.
    """

    def __init__(self):
        self.events: Dict[tuple, int] = defaultdict(int)
        self.conditions: Dict[tuple, int] = defaultdict(int)
        self.frozen = False

    def freeze(self) -> "CountTable":
        self.events = dict(self.events)
        self.conditions = dict(self.conditions)
        self.frozen = True
        return self

    def event_count(self, proj: str, reduced: tuple, outcome: tuple) -> int:
        return self.events.get((proj, reduced, outcome), 0)

    def condition_count(self, proj: str, reduced: tuple) -> int:
        return self.conditions.get((proj, reduced), 0)

    def __eq__(self, other):
        return (isinstance(other, CountTable) and self.events == other.events
                and self.conditions == other.conditions)

    def __len__(self):
        return len(self.events)


def observe(table: CountTable, condition: tuple, outcome: tuple,
            reductions: ReductionList, count: int = 1) -> None:
    if table.frozen:
        raise RuntimeError("count table is frozen")
    for proj in reductions.projections():
        reduced = proj(condition)
        table.events[(proj.name, reduced, outcome)] += count
        table.conditions[(proj.name, reduced)] += count


def level_counts(table: CountTable, condition: tuple, outcome: tuple,
                 level: Reduction) -> Tuple[int, int]:
    """Summed numerator and denominator over the disjuncts of one level."""
    num = den = 0
    for proj in level:
        reduced = proj(condition)
        num += table.events.get((proj.name, reduced, outcome), 0)
        den += table.conditions.get((proj.name, reduced), 0)
    return num, den


def estimate(table: CountTable, condition: tuple, outcome: tuple,
             reductions: Sequence[Reduction], cfg: SmoothingConfig) -> float:
    num, den = level_counts(table, condition, outcome, reductions[0])
    if len(reductions) == 1:
        return (num + cfg.base_add_num) / (den + cfg.base_add_den)
    if cfg.skip_threshold is not None and den >= cfg.skip_threshold:
        return num / den
    p = estimate(table, condition, outcome, reductions[1:], cfg)
    return (num + cfg.backoff_weight * p) / (den + cfg.backoff_weight)


# ---------------------------------------------------------------------------
# Serialization


def dump_tables(tables: Dict[str, CountTable], cfg: SmoothingConfig,
                stream: TextIO) -> None:
    stream.write("%s %d\n" % (FORMAT_TAG, FORMAT_VERSION))
    stream.write("#config %s\n" % cfg.to_json())
    for family in sorted(tables):
        table = tables[family]
        lines = ["E\t%s\t%s\t%s\t%s\t%d\n" % (
            family, proj, json.dumps(list(reduced)), json.dumps(list(outcome)), c)
            for (proj, reduced, outcome), c in table.events.items()]
        lines.sort()
        stream.writelines(lines)
        lines = ["C\t%s\t%s\t%s\t%d\n" % (family, proj, json.dumps(list(reduced)), c)
                 for (proj, reduced), c in table.conditions.items()]
        lines.sort()
        stream.writelines(lines)
    stream.write("#end-counts\n")


def load_tables(stream: TextIO) -> Tuple[Dict[str, CountTable], SmoothingConfig]:
    header = stream.readline().split()
    if len(header) != 2 or header[0] != FORMAT_TAG:
        raise ValueError("not a count dump")
    if int(header[1]) != FORMAT_VERSION:
        raise ValueError("unsupported count dump version %s" % header[1])
    line = stream.readline()
    if not line.startswith("#config "):
        raise ValueError("count dump lacks #config line")
    cfg = SmoothingConfig.from_json(line[len("#config "):])
    tables: Dict[str, CountTable] = {}
    for lineno, line in enumerate(stream, 3):
        line = line.rstrip("\n")
        if line == "#end-counts":
            break
        parts = line.split("\t")
        kind = parts[0]
        table = tables.setdefault(parts[1], CountTable())
        if kind == "E" and len(parts) == 6:
            key = (parts[2], tuple(json.loads(parts[3])), tuple(json.loads(parts[4])))
            table.events[key] = int(parts[5])
        elif kind == "C" and len(parts) == 5:
            table.conditions[(parts[2], tuple(json.loads(parts[3])))] = int(parts[4])
        else:
            raise ValueError("line %d: malformed count record" % lineno)
    else:
        raise ValueError("count dump truncated")
    for table in tables.values():
        table.freeze()
    return tables, cfg

"""Mine company-name synonym pairs from fingerprint groups."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import GroundTruth, NormalizedName

AGENCY_SUBSTRINGS = ("staff", "recruit", "jobs", "unknown")


class InsufficientDataError(ValueError):
    pass


@dataclass
class FingerprintGroup:
    fingerprint: str
    names: dict[str, NormalizedName] = field(default_factory=dict)  # key -> name

    def add(self, name: NormalizedName) -> None:
        # first display seen for a key wins
        self.names.setdefault(name.key, name)

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True, order=True)
class SynonymPair:
    a: NormalizedName
    b: NormalizedName

    def __post_init__(self):
        if not self.a.key < self.b.key:
            raise ValueError(f"pair not canonically ordered: {self.a.key!r}, {self.b.key!r}")

    @classmethod
    def of(cls, x: NormalizedName, y: NormalizedName) -> "SynonymPair":
        return cls(x, y) if x.key < y.key else cls(y, x)

    def to_line(self) -> str:
        return f"{self.a.key}\t{self.b.key}\t{self.a.display}\t{self.b.display}"

    @classmethod
    def from_line(cls, line: str) -> "SynonymPair":
        a_key, b_key, a_disp, b_disp = line.rstrip("\n").split("\t")
        return cls(NormalizedName(a_key, a_disp), NormalizedName(b_key, b_disp))


@dataclass
class SplitDataset:
    train: list[SynonymPair]
    test: list[SynonymPair]
    seed: int


def group_by_fingerprint(records: Iterable[tuple[str, NormalizedName]]) -> list[FingerprintGroup]:
    groups: dict[str, FingerprintGroup] = {}
    for fp, name in records:
        group = groups.get(fp)
        if group is None:
            group = groups[fp] = FingerprintGroup(fp)
        group.add(name)
    return list(groups.values())


def is_agency(name: NormalizedName, substrings: Sequence[str] = AGENCY_SUBSTRINGS) -> bool:
    return any(s in name.key for s in substrings)


def filter_agency_names(
    group: FingerprintGroup, substrings: Sequence[str] = AGENCY_SUBSTRINGS
) -> FingerprintGroup:
    kept = {k: n for k, n in group.names.items() if not is_agency(n, substrings)}
    return FingerprintGroup(group.fingerprint, kept)


def make_pairs(groups: Iterable[FingerprintGroup]) -> list[SynonymPair]:
    """All within-group name pairs, deduplicated across groups, sorted."""
    pairs: set[SynonymPair] = set()
    for group in groups:
        names = sorted(group.names.values())
        for x, y in itertools.combinations(names, 2):
            pairs.add(SynonymPair(x, y))
    return sorted(pairs)


def exclude_eval_overlap(
    pairs: Sequence[SynonymPair], gt: GroundTruth
) -> tuple[list[SynonymPair], set[str]]:
    """Drop pairs touching any ground-truth name.

    Returns the kept pairs and the set of corpus name keys that were removed
    because they appear in ``gt``.
    """
    banned = gt.all_keys()
    kept, removed = [], set()
    for p in pairs:
        hit = {n.key for n in (p.a, p.b) if n.key in banned}
        if hit:
            removed |= hit
        else:
            kept.append(p)
    return kept, removed


def split(pairs: Sequence[SynonymPair], seed: int, by: str = "pairs") -> SplitDataset:
    """Shuffle with ``seed`` and cut 9:1 into train/test.

    ``by="pairs"`` cuts the shuffled pair list (test = round(n/10)).
    ``by="names"`` keeps connected name components whole so no name occurs
    in both sets; the test side takes components until it reaches
    round(n/10) pairs, so sizes are approximate.
    """
    n = len(pairs)
    if n < 2:
        raise InsufficientDataError(f"need at least 2 pairs to split, got {n}")
    ordered = sorted(pairs)
    rng = random.Random(seed)
    n_test = max(1, round(n / 10))
    if by == "pairs":
        rng.shuffle(ordered)
        return SplitDataset(train=ordered[: n - n_test], test=ordered[n - n_test :], seed=seed)
    if by != "names":
        raise ValueError(f"unknown split granularity: {by!r}")

    comps = _components(ordered)
    rng.shuffle(comps)
    test: list[SynonymPair] = []
    train: list[SynonymPair] = []
    for comp in comps:
        (test if len(test) < n_test else train).extend(comp)
    if not train:
        raise InsufficientDataError("all pairs form one component; cannot split by names")
    return SplitDataset(train=train, test=test, seed=seed)


def _components(pairs: list[SynonymPair]) -> list[list[SynonymPair]]:
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for p in pairs:
        ra, rb = find(p.a.key), find(p.b.key)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    comps: dict[str, list[SynonymPair]] = {}
    for p in pairs:
        comps.setdefault(find(p.a.key), []).append(p)
    return [comps[root] for root in sorted(comps)]


@dataclass
class CorpusStats:
    ads: int
    fingerprints: int
    names: int
    multi_name_fingerprints: int


def corpus_stats(
    records: Sequence[tuple[str, NormalizedName]], substrings: Sequence[str] | None = None
) -> CorpusStats:
    """Counts over (fingerprint, name) records, optionally after agency filtering."""
    if substrings:
        records = [(fp, n) for fp, n in records if not is_agency(n, substrings)]
    groups = group_by_fingerprint(records)
    return CorpusStats(
        ads=len(records),
        fingerprints=len(groups),
        names=len({n.key for _, n in records}),
        multi_name_fingerprints=sum(1 for g in groups if len(g) >= 2),
    )


def write_pairs(path: str | Path, pairs: Iterable[SynonymPair]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in pairs:
            fh.write(p.to_line() + "\n")


def read_pairs(path: str | Path) -> list[SynonymPair]:
    with open(path, encoding="utf-8") as fh:
        return [SynonymPair.from_line(line) for line in fh if line.strip()]

"""Job-ad corpus and ground-truth loading, plus company-name normalization."""

from __future__ import annotations

import json
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

log = logging.getLogger(__name__)

_WS = re.compile(r"\s+")


class InvalidNameError(ValueError):
    pass


class GroundTruthError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class NormalizedName:
    """A company name in display form plus its comparison key."""

    key: str
    display: str = field(compare=False)

    def __str__(self) -> str:
        return self.display


def normalize_name(raw: str) -> NormalizedName:
    display = _WS.sub(" ", raw).strip()
    if not display:
        raise InvalidNameError(f"empty company name: {raw!r}")
    key = unicodedata.normalize("NFC", display).lower()
    # lowercasing can expose new whitespace runs for exotic code points
    key = _WS.sub(" ", key).strip()
    return NormalizedName(key=key, display=display)


@dataclass(frozen=True)
class JobAd:
    title: str
    description: str
    company_name_raw: str
    country: str | None = None
    state: str | None = None
    city: str | None = None
    zip: str | None = None

    def __post_init__(self):
        if not self.description:
            raise ValueError("job ad description is empty")
        if not self.company_name_raw.strip():
            raise ValueError("job ad company name is empty")

    @property
    def company(self) -> NormalizedName:
        return normalize_name(self.company_name_raw)

    def to_json(self) -> str:
        rec = {
            "title": self.title,
            "description": self.description,
            "company_name": self.company_name_raw,
        }
        for opt in ("country", "state", "city", "zip"):
            value = getattr(self, opt)
            if value is not None:
                rec[opt] = value
        return json.dumps(rec, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_record(cls, rec: dict) -> "JobAd":
        if not isinstance(rec, dict):
            raise ValueError("record is not an object")
        title = rec.get("title", "")
        desc = rec.get("description")
        name = rec.get("company_name")
        if not isinstance(title, str) or not isinstance(desc, str) or not isinstance(name, str):
            raise ValueError("title/description/company_name must be strings")
        opts = {}
        for opt in ("country", "state", "city", "zip"):
            value = rec.get(opt)
            if value is not None and not isinstance(value, str):
                value = str(value)
            opts[opt] = value
        return cls(title=title, description=desc, company_name_raw=name, **opts)


class JobAdReader:
    """Streams :class:`JobAd` records from a JSON-lines file.

    Malformed lines are skipped and counted in ``skipped``; an unreadable
    file raises ``OSError`` as soon as iteration starts.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.read = 0
        self.skipped = 0

    def __iter__(self) -> Iterator[JobAd]:
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    ad = JobAd.from_record(json.loads(line))
                except (ValueError, TypeError) as exc:
                    self.skipped += 1
                    log.debug("%s:%d skipped: %s", self.path, lineno, exc)
                    continue
                self.read += 1
                yield ad


def load_job_ads(path: str | Path) -> JobAdReader:
    return JobAdReader(path)


@dataclass
class GroundTruth:
    entries: list[tuple[NormalizedName, list[NormalizedName]]]

    @property
    def canonicals(self) -> list[NormalizedName]:
        return [c for c, _ in self.entries]

    def items(self) -> list[tuple[NormalizedName, NormalizedName]]:
        """Flatten into (synonym, tagged canonical) evaluation items."""
        return [(s, c) for c, syns in self.entries for s in syns]

    def all_keys(self) -> set[str]:
        keys = set()
        for c, syns in self.entries:
            keys.add(c.key)
            keys.update(s.key for s in syns)
        return keys

    def mean_synonyms(self) -> float:
        return sum(len(s) for _, s in self.entries) / len(self.entries) if self.entries else 0.0

    def to_json(self) -> list[dict]:
        return [
            {"canonical": c.display, "synonyms": [s.display for s in syns]}
            for c, syns in self.entries
        ]


def build_ground_truth(records: list[dict]) -> GroundTruth:
    if not isinstance(records, list):
        raise GroundTruthError("ground truth must be a list of objects")
    entries = []
    canon_seen: dict[str, str] = {}
    syn_owner: dict[str, str] = {}
    for rec in records:
        try:
            canonical = normalize_name(rec["canonical"])
            raw_syns = rec["synonyms"]
        except (KeyError, TypeError) as exc:
            raise GroundTruthError(f"bad ground-truth entry: {rec!r}") from exc
        if canonical.key in canon_seen:
            raise GroundTruthError(f"duplicate canonical: {canonical.display!r}")
        canon_seen[canonical.key] = canonical.display
        syns: list[NormalizedName] = []
        local = set()
        for raw in raw_syns:
            s = normalize_name(raw)
            owner = syn_owner.get(s.key)
            if owner is not None and owner != canonical.key:
                raise GroundTruthError(
                    f"synonym {s.display!r} mapped to both "
                    f"{canon_seen[owner]!r} and {canonical.display!r}"
                )
            syn_owner[s.key] = canonical.key
            if s.key not in local:
                local.add(s.key)
                syns.append(s)
        if not syns:
            raise GroundTruthError(f"canonical {canonical.display!r} has no synonyms")
        entries.append((canonical, syns))
    return GroundTruth(entries)


def load_ground_truth(path: str | Path) -> GroundTruth:
    with open(path, encoding="utf-8") as fh:
        return build_ground_truth(json.load(fh))

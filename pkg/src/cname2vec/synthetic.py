"""Seeded synthetic job-ad corpus and ground truth for end-to-end runs.

Each company has a canonical name and a pool of surface variants (legal
suffixes, punctuation changes, location qualifiers).  The pool is split in
two: ground-truth synonyms, and names that only appear in job ads.  Job ads
of one company share a description, so their names end up under one
fingerprint.  A few ads are posted by staffing agencies or under a
ground-truth name, so the agency filter and the eval-overlap exclusion both
have work to do.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import GroundTruth, JobAd, build_ground_truth, normalize_name

# cores reuse a small shared vocabulary, as real company names do
_LEADS = [
    "American", "United", "General", "National", "First", "Pacific", "Southern",
    "Global", "Western", "Atlantic", "Central", "Liberty", "Summit", "Pioneer",
    "Eagle", "Golden", "Northern", "Capital", "Premier", "Allied",
]
_TRADES = [
    "Electric", "Mills", "Motors", "Foods", "Health", "Energy", "Airlines", "Insurance",
    "Steel", "Financial", "Bank", "Packaging", "Freight", "Water", "Chemical", "Realty",
    "Media", "Telecom", "Dynamics",
]
_TAILS = ["Holdings", "Group", "Partners", "Brands", "Industries", "Services", "Systems"]
_SUFFIXES = [" Inc", " Inc.", ", Inc.", " LLC", ", LLC", " L.L.C.", " Corp", " Corp.",
             " Corporation", " Co.", " Company", " Ltd."]
_LOCATIONS = ["New York", "Boston, MA", "Dallas", "Chicago IL", "Seattle", "Denver, CO",
              "Atlanta", "Austin TX", "Phoenix", "Miami, FL"]
_AGENCIES = ["Ursus Staffing", "Prime Recruiters", "TopJobs Direct", "Unknown Employer",
             "Alliance Staffing Group"]
_WORDS = (
    "we are hiring a motivated team member to support daily operations customer service "
    "warehouse inventory sales analyst engineer nurse driver manager assistant schedule "
    "benefits include health dental vision retirement plan paid time off training growth "
    "responsibilities require experience communication skills ability lift pounds travel "
    "shift weekend overtime bachelor degree preferred equal opportunity employer apply "
    "today competitive pay bonus safety quality compliance reports data software tools"
).split()


def _core_name(rng: random.Random) -> str:
    name = f"{rng.choice(_LEADS)} {rng.choice(_TRADES)}"
    if rng.random() < 0.4:
        name += f" {rng.choice(_TAILS)}"
    return name


def _variant(core: str, rng: random.Random) -> str:
    name = core
    r = rng.random()
    if r < 0.2:
        name = name.replace(" ", "-")
    elif r < 0.3:
        name = name.replace(" ", "")
    if rng.random() < 0.75:
        name += rng.choice(_SUFFIXES)
    r = rng.random()
    if r < 0.25:
        name += f" - {rng.choice(_LOCATIONS)}"
    elif r < 0.35:
        name += f" ({rng.choice(_LOCATIONS)})"
    return name


def _description(rng: random.Random) -> str:
    words = [rng.choice(_WORDS) for _ in range(rng.randint(40, 80))]
    return " ".join(words).capitalize() + "."


def _restyle(text: str, rng: random.Random) -> str:
    # cosmetic re-posting differences that cleaning must erase
    choice = rng.randrange(3)
    if choice == 0:
        return text.upper()
    if choice == 1:
        return text.replace(" ", "  ").replace(".", "!")
    return text


@dataclass
class SyntheticCorpus:
    ads: list[JobAd]
    ground_truth: GroundTruth

    def write(self, ads_path: str | Path, gt_path: str | Path) -> None:
        with open(ads_path, "w", encoding="utf-8", newline="\n") as fh:
            for ad in self.ads:
                fh.write(ad.to_json() + "\n")
        Path(gt_path).write_text(
            json.dumps(self.ground_truth.to_json(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )


def generate(
    n_companies: int = 50,
    n_ads: int = 200,
    synonyms: tuple[int, int] = (4, 8),
    agency_rate: float = 0.15,
    gt_leak_rate: float = 0.15,
    seed: int = 0,
) -> SyntheticCorpus:
    if n_ads < n_companies:
        raise ValueError("need at least one ad per company")
    rng = random.Random(seed)

    cores: list[str] = []
    seen = set()
    while len(cores) < n_companies:
        core = _core_name(rng)
        if normalize_name(core).key not in seen:
            seen.add(normalize_name(core).key)
            cores.append(core)

    ads_per = [n_ads // n_companies] * n_companies
    for i in range(n_ads % n_companies):
        ads_per[i] += 1

    gt_records, ads = [], []
    used_keys = set(seen)
    for core, n_company_ads in zip(cores, ads_per):
        n_syn = rng.randint(*synonyms)
        pool: list[str] = []
        attempts = 0
        while len(pool) < n_syn + n_company_ads and attempts < 1000:
            attempts += 1
            v = _variant(core, rng)
            key = normalize_name(v).key
            if key not in used_keys:
                used_keys.add(key)
                pool.append(v)
        gt_syns, corpus_names = pool[:n_syn], pool[n_syn:]
        gt_records.append({"canonical": core, "synonyms": gt_syns})

        description = _description(rng)
        title = f"{rng.choice(_WORDS).capitalize()} {rng.choice(_WORDS).capitalize()}"
        posters = list(corpus_names[:n_company_ads])
        if posters and rng.random() < gt_leak_rate:
            posters[-1] = rng.choice(gt_syns)
        if len(posters) > 1 and rng.random() < agency_rate:
            posters[0] = rng.choice(_AGENCIES)
        for poster in posters:
            loc = rng.choice(_LOCATIONS)
            ads.append(JobAd(
                title=title,
                description=_restyle(description, rng),
                company_name_raw=poster,
                country="US",
                city=loc.split(",")[0].split(" ")[0],
            ))
    rng.shuffle(ads)
    return SyntheticCorpus(ads, build_ground_truth(gt_records))

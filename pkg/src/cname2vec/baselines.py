"""Classical string-similarity matchers used as comparison baselines."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .corpus import NormalizedName
from .hashing import fnv1a_64

METRICS = ("edit", "ratio", "partial", "random")


def levenshtein(x: str, y: str) -> int:
    if len(x) < len(y):
        x, y = y, x
    prev = list(range(len(y) + 1))
    for i, cx in enumerate(x, 1):
        cur = [i]
        for j, cy in enumerate(y, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (cx != cy)))
        prev = cur
    return prev[-1]


def edit_similarity(x: str, y: str) -> float:
    longest = max(len(x), len(y))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(x, y) / longest


def _longest_match(a: str, b: str, alo: int, ahi: int, blo: int, bhi: int):
    """Longest common block in a[alo:ahi], b[blo:bhi].

    Ties go to the block starting earliest in ``a``, then earliest in ``b``.
    """
    best_i, best_j, best = alo, blo, 0
    prev = [0] * (bhi - blo + 1)
    for i in range(alo, ahi):
        cur = [0] * (bhi - blo + 1)
        ai = a[i]
        for j in range(blo, bhi):
            if ai == b[j]:
                run = prev[j - blo] + 1
                cur[j - blo + 1] = run
                start_i, start_j = i - run + 1, j - run + 1
                if run > best or (run == best and (start_i, start_j) < (best_i, best_j)):
                    best_i, best_j, best = start_i, start_j, run
        prev = cur
    return best_i, best_j, best


def matched_chars(a: str, b: str) -> int:
    """Characters covered by recursive longest-matching-block decomposition."""
    total = 0
    stack = [(0, len(a), 0, len(b))]
    while stack:
        alo, ahi, blo, bhi = stack.pop()
        if alo >= ahi or blo >= bhi:
            continue
        i, j, k = _longest_match(a, b, alo, ahi, blo, bhi)
        if k:
            total += k
            stack.append((alo, i, blo, j))
            stack.append((i + k, ahi, j + k, bhi))
    return total


def _canonical_order(x: str, y: str) -> tuple[str, str]:
    # block decomposition is order-sensitive on ties; fix the order so
    # every score is symmetric
    return (x, y) if (len(x), x) <= (len(y), y) else (y, x)


def ratio(x: str, y: str) -> float:
    """Matching-blocks similarity 2*M / (|x| + |y|)."""
    length = len(x) + len(y)
    if length == 0:
        return 1.0
    return 2.0 * matched_chars(*_canonical_order(x, y)) / length


def partial_ratio(x: str, y: str) -> float:
    """Best ratio of the shorter string against each equal-length window of the longer."""
    x, y = _canonical_order(x, y)
    m = len(x)
    if m == 0:
        return 1.0 if not y else 0.0
    best = 0.0
    for start in range(len(y) - m + 1):
        best = max(best, ratio(x, y[start : start + m]))
        if best == 1.0:
            break
    return best


_SCORERS = {"edit": edit_similarity, "ratio": ratio, "partial": partial_ratio}


def random_scores(query_key: str, n: int, seed: int) -> np.ndarray:
    """Seed-deterministic uniform scores, drawn afresh for each query."""
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, fnv1a_64(query_key.encode("utf-8"))])
    return rng.random(n)


def score_all(query: NormalizedName, canonicals: Sequence[NormalizedName], metric: str, seed: int = 0) -> np.ndarray:
    if metric == "random":
        return random_scores(query.key, len(canonicals), seed)
    try:
        fn = _SCORERS[metric]
    except KeyError:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}") from None
    return np.array([fn(query.key, c.key) for c in canonicals], dtype=float)


def rank_by_score(scores: np.ndarray, canonicals: Sequence[NormalizedName], k: int) -> list[int]:
    """Indices of the top-k scores; ties broken by ascending canonical key."""
    order = sorted(range(len(canonicals)), key=lambda i: (-scores[i], canonicals[i].key))
    return order[:k]


def baseline_rank(
    query: NormalizedName,
    canonicals: Sequence[NormalizedName],
    metric: str,
    k: int,
    seed: int = 0,
) -> list[tuple[NormalizedName, float]]:
    if not canonicals:
        raise ValueError("canonical list is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = score_all(query, canonicals, metric, seed)
    return [(canonicals[i], float(scores[i])) for i in rank_by_score(scores, canonicals, k)]

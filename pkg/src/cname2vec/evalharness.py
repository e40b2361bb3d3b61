"""Success@k evaluation with k-fold cross-validation and paired t-tests."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from . import baselines
from .corpus import GroundTruth, NormalizedName
from .embedder import ModelParams, encode_many
from .index import build_index, build_matrix

METHODS = ("random", "edit", "ratio", "partial", "embed")


def success_at_k(tagged: NormalizedName | str, ranked: Sequence, k: int) -> int:
    """1 if the tagged canonical is among the first k ranked entries.

    ``ranked`` holds (name, score) tuples or bare names.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    key = tagged.key if isinstance(tagged, NormalizedName) else tagged
    for entry in ranked[:k]:
        name = entry[0] if isinstance(entry, tuple) else entry
        if (name.key if isinstance(name, NormalizedName) else name) == key:
            return 1
    return 0


def avg_success_at_k(results: Sequence[int]) -> float:
    if len(results) == 0:
        raise ValueError("no results to average")
    return float(np.mean(results))


def kfold(items: Sequence, folds: int = 10, seed: int = 0) -> list[list]:
    """Shuffle with ``seed`` and cut into ``folds`` parts whose sizes differ by at most one."""
    if folds < 1:
        raise ValueError("folds must be >= 1")
    if len(items) < folds:
        raise ValueError(f"need at least {folds} items for {folds}-fold split, got {len(items)}")
    perm = np.random.default_rng(seed).permutation(len(items))
    return [[items[i] for i in part] for part in np.array_split(perm, folds)]


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sided paired Student's t-test p-value.

    Zero-variance differences give p = 1 when their mean is zero and
    p = 0 otherwise.
    """
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise ValueError("need at least two paired observations")
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    # relative tolerance so that float noise on equal differences is treated as zero variance
    if sd <= 1e-12 * max(1.0, abs(mean)):
        return 1.0 if abs(mean) <= 1e-15 else 0.0
    t = mean / (sd / math.sqrt(len(d)))
    return float(min(1.0, 2.0 * stats.t.sf(abs(t), df=len(d) - 1)))


@dataclass
class MethodResult:
    fold_scores: dict[int, list[float]]   # k -> per-fold AvgSuccess@k
    avg_success: dict[int, float]         # k -> size-weighted grand mean


@dataclass
class EvalReport:
    methods: dict[str, MethodResult]
    ks: list[int]
    fold_sizes: list[int]
    p_values: dict[int, dict[str, dict[str, float]]] = field(default_factory=dict)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "ks": self.ks,
            "fold_sizes": self.fold_sizes,
            "methods": {
                m: {
                    "avg_success": {str(k): r.avg_success[k] for k in self.ks},
                    "fold_scores": {str(k): r.fold_scores[k] for k in self.ks},
                }
                for m, r in self.methods.items()
            },
            "p_values": {
                str(k): {a: dict(row) for a, row in mat.items()} for k, mat in self.p_values.items()
            },
        }

    def summary_lines(self) -> list[str]:
        return [
            f"{m}\t{k}\t{r.avg_success[k]:.6f}" for m, r in self.methods.items() for k in self.ks
        ]

    def write(self, report_path: str | Path, summary_path: str | Path | None = None) -> None:
        Path(report_path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        if summary_path is not None:
            Path(summary_path).write_text(
                "method\tk\tavg_success\n" + "\n".join(self.summary_lines()) + "\n", encoding="utf-8"
            )


def rank_positions(
    method: str,
    items: Sequence[tuple[NormalizedName, NormalizedName]],
    canonicals: Sequence[NormalizedName],
    model: ModelParams | None = None,
    seed: int = 0,
) -> np.ndarray:
    """1-based rank of each item's tagged canonical among all canonicals."""
    keys = [c.key for c in canonicals]
    pos_of = {k: i for i, k in enumerate(keys)}
    ranks = np.zeros(len(items), dtype=np.int64)
    if method == "embed":
        if model is None:
            raise ValueError("the embed method needs a model")
        index = build_index(model, list(canonicals))
        R = build_matrix(index, encode_many(model, [s for s, _ in items]))
        for j, (_, tagged) in enumerate(items):
            order = R.ranking(index, j)
            ranks[j] = int(np.nonzero(order == pos_of[tagged.key])[0][0]) + 1
        return ranks
    if method not in baselines.METRICS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    for j, (syn, tagged) in enumerate(items):
        scores = baselines.score_all(syn, canonicals, method, seed)
        order = baselines.rank_by_score(scores, canonicals, len(canonicals))
        ranks[j] = order.index(pos_of[tagged.key]) + 1
    return ranks


def compare(
    methods: Sequence[str],
    gt: GroundTruth,
    model: ModelParams | None = None,
    ks: Sequence[int] = (1, 2, 3),
    seed: int = 0,
    folds: int = 10,
) -> EvalReport:
    """Rank every synonym against all canonicals, per method, scored fold by fold."""
    if not gt.entries:
        raise ValueError("ground truth is empty")
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown method(s) {unknown}; expected some of {METHODS}")
    ks = sorted(set(ks))
    canonicals = gt.canonicals
    items = gt.items()
    parts = kfold(list(range(len(items))), folds, seed)
    sizes = [len(p) for p in parts]

    results: dict[str, MethodResult] = {}
    for method in methods:
        ranks = rank_positions(method, items, canonicals, model, seed)
        fold_scores = {
            k: [avg_success_at_k((ranks[p] <= k).astype(int).tolist()) for p in parts] for k in ks
        }
        avg = {k: float(np.average(fold_scores[k], weights=sizes)) for k in ks}
        results[method] = MethodResult(fold_scores, avg)

    p_values: dict[int, dict[str, dict[str, float]]] = {}
    for k in ks:
        mat: dict[str, dict[str, float]] = {m: {} for m in methods}
        for a, b in itertools.combinations(methods, 2):
            p = paired_t_test(results[a].fold_scores[k], results[b].fold_scores[k])
            mat[a][b] = mat[b][a] = p
        p_values[k] = mat
    return EvalReport(results, list(ks), sizes, p_values, seed)

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from cname2vec.corpus import build_ground_truth, normalize_name
from cname2vec.embedder import Dims, init_params
from cname2vec.evalharness import (
    EvalReport,
    avg_success_at_k,
    compare,
    kfold,
    paired_t_test,
    rank_positions,
    success_at_k,
)

N = normalize_name


def t_pvalue_by_quadrature(diffs):
    # independent oracle: integrate the Student t density directly
    n = len(diffs)
    mean = sum(diffs) / n
    sd = math.sqrt(sum((x - mean) ** 2 for x in diffs) / (n - 1))
    t = abs(mean / (sd / math.sqrt(n)))
    nu = n - 1
    c = math.gamma((nu + 1) / 2) / (math.sqrt(nu * math.pi) * math.gamma(nu / 2))
    tail, _ = integrate.quad(lambda x: c * (1 + x * x / nu) ** (-(nu + 1) / 2), t, math.inf)
    return t, 2 * tail


class TestSuccess:
    ranked = [(N("A"), 0.1), (N("B"), 0.2), (N("C"), 0.3)]

    def test_hit_and_miss(self):
        assert success_at_k(N("B"), self.ranked, 1) == 0
        assert success_at_k(N("B"), self.ranked, 2) == 1
        assert success_at_k("c", [n for n, _ in self.ranked], 3) == 1

    def test_k_validation(self):
        with pytest.raises(ValueError):
            success_at_k(N("A"), self.ranked, 0)

    def test_average(self):
        assert avg_success_at_k([1, 0, 1, 1]) == 0.75
        with pytest.raises(ValueError):
            avg_success_at_k([])

    @given(st.permutations(list("abcdef")), st.sampled_from("abcdef"))
    def test_monotone_in_k(self, order, target):
        hits = [success_at_k(target, order, k) for k in range(1, 7)]
        assert hits == sorted(hits) and hits[-1] == 1


class TestKfold:
    def test_sizes(self):
        parts = kfold(list(range(23)), 10, seed=0)
        assert sorted((len(p) for p in parts), reverse=True) == [3, 3, 3, 2, 2, 2, 2, 2, 2, 2]
        assert sorted(x for p in parts for x in p) == list(range(23))

    def test_seeded(self):
        assert kfold(list(range(30)), 10, 4) == kfold(list(range(30)), 10, 4)
        assert kfold(list(range(30)), 10, 4) != kfold(list(range(30)), 10, 5)

    def test_too_few(self):
        with pytest.raises(ValueError):
            kfold([1, 2], 10)

    @given(st.integers(10, 200), st.integers(0, 100))
    def test_partition(self, n, seed):
        parts = kfold(list(range(n)), 10, seed)
        sizes = [len(p) for p in parts]
        assert max(sizes) - min(sizes) <= 1
        assert sorted(x for p in parts for x in p) == list(range(n))


class TestPairedT:
    def test_identical(self):
        assert paired_t_test([0.5, 0.6, 0.7], [0.5, 0.6, 0.7]) == 1.0

    def test_known_value(self):
        a, b = [0.7, 0.6, 0.8], [0.5, 0.5, 0.5]
        t, p = t_pvalue_by_quadrature([x - y for x, y in zip(a, b)])
        assert t == pytest.approx(3.4641, abs=1e-3)
        assert p == pytest.approx(0.0742, abs=5e-4)
        assert paired_t_test(a, b) == pytest.approx(p, rel=1e-6)

    def test_constant_shift(self):
        assert paired_t_test([0.6, 0.7, 0.8], [0.5, 0.6, 0.7]) == 0.0

    def test_errors(self):
        with pytest.raises(ValueError):
            paired_t_test([1.0], [1.0])
        with pytest.raises(ValueError):
            paired_t_test([1.0, 2.0], [1.0])

    @given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=2, max_size=12))
    def test_symmetric_and_bounded(self, rows):
        a, b = [x for x, _ in rows], [y for _, y in rows]
        p = paired_t_test(a, b)
        assert 0.0 <= p <= 1.0
        assert paired_t_test(b, a) == pytest.approx(p, abs=1e-12)


def small_gt(n=12):
    return build_ground_truth(
        [{"canonical": f"Company {chr(65 + i)}{i}", "synonyms": [f"company {chr(65 + i)}{i}, inc."]} for i in range(n)]
    )


class TestCompare:
    def test_identical_synonyms_score_perfectly(self):
        names = ["Acme Holdings", "Zeta Freight", "Blue River Foods", "Tesla", "Northwind", "Kestrel Labs"]
        gt = build_ground_truth([{"canonical": n, "synonyms": [n]} for n in names])
        params = init_params(Dims(256, 16, 16, 16), 1)
        report = compare(["random", "edit", "ratio", "partial", "embed"], gt, params, ks=(1,), folds=3)
        for method in ["edit", "ratio", "partial", "embed"]:
            assert report.methods[method].avg_success[1] == 1.0
        assert report.methods["random"].avg_success[1] < 1.0
        assert report.fold_sizes == [2, 2, 2]

    def test_monotone_in_k(self):
        params = init_params(Dims(64, 4, 4, 4), 0)
        report = compare(["random", "edit", "embed"], small_gt(), params, ks=(3, 1, 2), folds=4)
        assert report.ks == [1, 2, 3]
        for res in report.methods.values():
            vals = [res.avg_success[k] for k in report.ks]
            assert vals == sorted(vals)
            for k in report.ks:
                assert 0.0 <= res.avg_success[k] <= 1.0

    def test_weighted_mean(self):
        report = compare(["random"], small_gt(13), ks=(1,), folds=4, seed=2)
        res = report.methods["random"]
        hits = (rank_positions("random", small_gt(13).items(), small_gt(13).canonicals, seed=2) <= 1).mean()
        assert res.avg_success[1] == pytest.approx(hits, abs=1e-12)
        assert res.avg_success[1] == pytest.approx(
            np.average(res.fold_scores[1], weights=report.fold_sizes), abs=1e-12
        )

    def test_p_values_symmetric(self):
        report = compare(["random", "edit", "ratio"], small_gt(), ks=(1,), folds=4)
        mat = report.p_values[1]
        for a in mat:
            for b in mat[a]:
                assert mat[a][b] == mat[b][a]
                assert 0.0 <= mat[a][b] <= 1.0

    def test_errors(self):
        with pytest.raises(ValueError, match="unknown"):
            compare(["jaro"], small_gt())
        with pytest.raises(ValueError, match="model"):
            compare(["embed"], small_gt(), folds=4)

    def test_report_files(self, tmp_path):
        report = compare(["random", "edit"], small_gt(), ks=(1, 2), folds=4)
        report.write(tmp_path / "r.json", tmp_path / "r.tsv")
        lines = (tmp_path / "r.tsv").read_text().splitlines()
        assert lines[0] == "method\tk\tavg_success"
        assert len(lines) == 1 + 2 * 2
        assert isinstance(report, EvalReport)
        first = (tmp_path / "r.json").read_bytes()
        compare(["random", "edit"], small_gt(), ks=(1, 2), folds=4).write(tmp_path / "r.json")
        assert (tmp_path / "r.json").read_bytes() == first

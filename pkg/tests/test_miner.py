import pytest
from hypothesis import given, strategies as st

from cname2vec.corpus import build_ground_truth, normalize_name
from cname2vec.miner import (
    FingerprintGroup,
    InsufficientDataError,
    SynonymPair,
    corpus_stats,
    exclude_eval_overlap,
    filter_agency_names,
    group_by_fingerprint,
    make_pairs,
    read_pairs,
    split,
    write_pairs,
)

N = normalize_name


def group(fp, *names):
    g = FingerprintGroup(fp)
    for n in names:
        g.add(N(n))
    return g


def keys(group):
    return sorted(group.names)


def test_group_by_fingerprint():
    groups = group_by_fingerprint([("f1", N("A")), ("f1", N("B")), ("f2", N("A"))])
    assert {g.fingerprint: keys(g) for g in groups} == {"f1": ["a", "b"], "f2": ["a"]}


def test_group_dedupes_by_key():
    (g,) = group_by_fingerprint([("f1", N("Acme Inc")), ("f1", N("ACME  inc"))])
    assert keys(g) == ["acme inc"]
    assert g.names["acme inc"].display == "Acme Inc"


class TestAgencyFilter:
    def test_drops_staffing(self):
        assert keys(filter_agency_names(group("f", "Tesla", "ABC Staffing"))) == ["tesla"]

    def test_all_filtered(self):
        assert keys(filter_agency_names(group("f", "Acme Recruiters", "Unknown Employer"))) == []

    def test_naive_substring(self):
        assert keys(filter_agency_names(group("f", "Jobson & Co"))) == []

    def test_custom_substrings(self):
        assert keys(filter_agency_names(group("f", "Tesla", "ABC Staffing"), ["tesla"])) == ["abc staffing"]


class TestMakePairs:
    def test_triangle(self):
        pairs = make_pairs([group("f", "A", "B", "C")])
        assert [(p.a.key, p.b.key) for p in pairs] == [("a", "b"), ("a", "c"), ("b", "c")]

    def test_duplicates_across_fingerprints(self):
        pairs = make_pairs([group("f1", "A", "B"), group("f2", "B", "A")])
        assert [(p.a.key, p.b.key) for p in pairs] == [("a", "b")]

    def test_singleton(self):
        assert make_pairs([group("f", "A")]) == []

    def test_canonical_order_enforced(self):
        with pytest.raises(ValueError):
            SynonymPair(N("b"), N("a"))
        assert SynonymPair.of(N("b"), N("a")).a.key == "a"

    @given(st.lists(st.tuples(st.sampled_from("fgh"), st.sampled_from(
        ["Acme", "acme inc", "Zeta LLC", "Top Staffing", "jobs4u", "Beta"])), max_size=30))
    def test_properties(self, records):
        groups = [filter_agency_names(g) for g in group_by_fingerprint((fp, N(n)) for fp, n in records)]
        pairs = make_pairs(groups)
        seen = {(p.a.key, p.b.key) for p in pairs}
        assert len(seen) == len(pairs)
        for p in pairs:
            assert p.a.key < p.b.key
            assert (p.b.key, p.a.key) not in seen
            for bad in ("staff", "recruit", "jobs", "unknown"):
                assert bad not in p.a.key and bad not in p.b.key


def test_exclude_eval_overlap():
    gt = build_ground_truth([{"canonical": "PepsiCo", "synonyms": ["Pepsi Cola"]}])
    pairs = [SynonymPair.of(N("PepsiCo"), N("Pepsi")), SynonymPair.of(N("Acme"), N("Acme Inc"))]
    kept, removed = exclude_eval_overlap(pairs, gt)
    assert [(p.a.key, p.b.key) for p in kept] == [("acme", "acme inc")]
    assert removed == {"pepsico"}


def _pairs(n):
    return [SynonymPair.of(N(f"c{i:03d}"), N(f"c{i:03d} inc")) for i in range(n)]


class TestSplit:
    def test_ratio(self):
        ds = split(_pairs(10), seed=1)
        assert (len(ds.train), len(ds.test)) == (9, 1)

    def test_deterministic(self):
        assert split(_pairs(30), 7) == split(_pairs(30), 7)

    def test_sizes_across_seeds(self):
        a, b = split(_pairs(20), 1), split(_pairs(20), 2)
        for ds in (a, b):
            assert (len(ds.train), len(ds.test)) == (18, 2)
            assert not set(ds.train) & set(ds.test)
            assert set(ds.train) | set(ds.test) == set(_pairs(20))
        assert set(a.test) != set(b.test)

    def test_input_order_irrelevant(self):
        pairs = _pairs(25)
        assert split(pairs, 3) == split(list(reversed(pairs)), 3)

    def test_too_few(self):
        with pytest.raises(InsufficientDataError):
            split(_pairs(1), 0)

    def test_by_names_is_name_disjoint(self):
        pairs = _pairs(30) + [SynonymPair.of(N("c000"), N("c000 llc"))]
        ds = split(pairs, 5, by="names")
        train_names = {n.key for p in ds.train for n in (p.a, p.b)}
        test_names = {n.key for p in ds.test for n in (p.a, p.b)}
        assert not train_names & test_names
        assert len(ds.train) + len(ds.test) == len(pairs)
        assert len(ds.test) >= round(len(pairs) / 10)


def test_pairs_file_round_trip(tmp_path):
    pairs = [SynonymPair.of(N("Acme, Inc."), N("ACME")), SynonymPair.of(N("Zeta"), N("Zeta LLC"))]
    write_pairs(tmp_path / "p.tsv", pairs)
    assert read_pairs(tmp_path / "p.tsv") == pairs
    first = (tmp_path / "p.tsv").read_text().splitlines()[0]
    assert first == "acme\tacme, inc.\tACME\tAcme, Inc."


def test_corpus_stats_monotone_under_filter():
    recs = [("f1", N("Acme")), ("f1", N("Top Staffing")), ("f2", N("Top Staffing")), ("f3", N("Zeta"))]
    before, after = corpus_stats(recs), corpus_stats(recs, ["staff"])
    assert (before.ads, before.fingerprints, before.names) == (4, 3, 3)
    assert (after.ads, after.fingerprints, after.names) == (2, 2, 2)
    assert before.multi_name_fingerprints == 1

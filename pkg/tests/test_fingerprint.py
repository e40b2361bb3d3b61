import hashlib
import random

import pytest
from hypothesis import given, strategies as st

from cname2vec.fingerprint import (
    WinnowParams,
    clean_text,
    digest,
    fingerprint_job,
    kgram_hashes,
    winnow,
)

from .oracles import reference_fingerprint, reference_kgram_hashes, reference_winnow


@pytest.mark.parametrize("text,expected", [
    ("A do run!", "adorun"),
    ("", ""),
    ("Tesla, Inc. 2020", "teslainc2020"),
])
def test_clean_text(text, expected):
    assert clean_text(text) == expected


class TestKgramHashes:
    def test_aaaa(self):
        assert 97 * 1111 % 1000 == 767
        assert kgram_hashes("aaaa") == [767]

    def test_aaaaa(self):
        assert kgram_hashes("aaaaa") == [767, 767]

    def test_short(self):
        assert kgram_hashes("abc") == []

    @given(st.text(max_size=60), st.integers(1, 6), st.integers(1, 300), st.integers(2, 10**9))
    def test_rolling_equals_direct(self, text, k, base, modulo):
        p = WinnowParams(kgram_len=k, base=base, modulo=modulo)
        got = kgram_hashes(text, p)
        assert got == reference_kgram_hashes(text, p)
        assert len(got) == max(0, len(text) - k + 1)
        assert all(0 <= h < modulo for h in got)


class TestWinnow:
    def test_all_equal_takes_rightmost(self):
        assert winnow([5, 5, 5, 5, 5], 5) == [(4, 5)]

    def test_mixed(self):
        seq = [3, 1, 4, 1, 5, 9, 2, 6]
        expected = reference_winnow(seq, 5)
        assert expected == [(3, 1)]
        assert winnow(seq, 5) == expected

    def test_short_sequence(self):
        assert winnow([7], 5) == [(0, 7)]
        assert winnow([4, 2, 2], 5) == [(2, 2)]

    def test_empty(self):
        assert winnow([], 5) == []

    def test_bad_window(self):
        with pytest.raises(ValueError):
            winnow([1, 2], 0)

    @given(st.lists(st.integers(0, 20), max_size=80), st.integers(1, 8))
    def test_matches_oracle_and_covers(self, seq, w):
        got = winnow(seq, w)
        assert got == reference_winnow(seq, w)
        positions = [p for p, _ in got]
        assert positions == sorted(set(positions))
        if len(seq) >= w:
            for start in range(len(seq) - w + 1):
                assert any(start <= p < start + w for p in positions)
                window_min = min(seq[start : start + w])
                assert any(seq[p] == window_min for p in positions if start <= p < start + w)


class TestDigest:
    def test_md5_primitive(self):
        assert hashlib.md5(b"abc").hexdigest() == "900150983cd24fb0d6963f7d28e17f72"

    def test_empty_selection(self):
        assert digest([]) == "d41d8cd98f00b204e9800998ecf8427e"

    def test_serialization(self):
        assert digest([(3, 1), (6, 2)]) == hashlib.md5(b"1,2").hexdigest()


class TestFingerprintJob:
    def test_deterministic(self):
        text = "Seeking a warehouse associate for night shifts."
        assert fingerprint_job(text) == fingerprint_job(text)

    def test_format(self):
        fp = fingerprint_job("Anything at all")
        assert len(fp) == 32 and set(fp) <= set("0123456789abcdef")

    def test_punctuation_and_case_invariant(self):
        a = "Seeking a Warehouse Associate, nights!"
        b = "seeking a warehouse associate nights"
        assert fingerprint_job(a) == fingerprint_job(b)

    def test_differs_on_content(self):
        assert fingerprint_job("driver wanted in dallas") != fingerprint_job("nurse wanted in boston")

    def test_random_strings_match_reference(self):
        rng = random.Random(1234)
        alphabet = "abcdefghijklmnopqrstuvwxyzABC 0123456789,.!-é"
        for _ in range(100):
            text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 500)))
            assert fingerprint_job(text) == reference_fingerprint(text)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            WinnowParams(modulo=1)
        with pytest.raises(ValueError):
            WinnowParams(kgram_len=0)

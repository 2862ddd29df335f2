import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualgen.errors import DataError
from dualgen.metrics import (
    OneHotEmbedder,
    bleu,
    exact_match_accuracy,
    lcs_length,
    rouge,
    semantic_accuracy,
    tokenize,
)

# (candidate, reference, max_n, value) frozen from nltk.translate.bleu_score.sentence_bleu with
# add-one smoothing applied to zero-match orders n >= 2.
BLEU_ORACLE = [
    ("the cat sat", "the cat sat down", 2, 0.7165313105737893),
    ("the cat is on the mat", "there is a cat on the mat", 4, 0.3215935109119012),
    ("a b c d e", "a b x c d y e", 4, 0.30285126832882353),
    ("one two three four five six", "six five four three two one", 4, 0.3021375397356768),
    ("the the the the the the the", "the cat is on the mat", 4, 0.19205612637498934),
    ("x y z w", "a b c d", 4, 0.0),
]

tokens_st = st.lists(st.sampled_from("abcdefgh"), min_size=1, max_size=12)


def brute_lcs(a, b):
    """Longest common subsequence by enumerating subsequences of the shorter input."""
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    for size in range(len(short), 0, -1):
        for idx in itertools.combinations(range(len(short)), size):
            sub = [short[i] for i in idx]
            it = iter(long_)
            if all(any(x == y for y in it) for x in sub):
                return size
    return 0


class TestTokenize:
    def test_english(self):
        assert tokenize("The cat sat.") == ["the", "cat", "sat"]

    def test_empty(self):
        assert tokenize("") == []

    def test_cjk_per_character(self):
        assert tokenize("布达拉宫") == ["布", "达", "拉", "宫"]

    def test_mixed(self):
        assert tokenize("Visit 布达拉宫, then Jokhang!") == ["visit", "布", "达", "拉", "宫", "then", "jokhang"]


class TestBleu:
    def test_hand_computed(self):
        # p1 = 3/3, p2 = 2/2, brevity penalty exp(1 - 4/3)
        assert bleu("the cat sat".split(), "the cat sat down".split(), 2) == pytest.approx(math.exp(1 - 4 / 3))

    @pytest.mark.parametrize("cand,ref,n,expected", BLEU_ORACLE)
    def test_oracle(self, cand, ref, n, expected):
        assert bleu(cand.split(), ref.split(), n) == pytest.approx(expected, abs=1e-12)

    def test_empty_candidate(self):
        assert bleu([], ["a"]) == 0.0

    def test_bad_order(self):
        with pytest.raises(ValueError):
            bleu(["a"], ["a"], 0)

    @given(tokens_st, st.integers(1, 6))
    def test_identity(self, toks, n):
        assert bleu(toks, toks, n) == 1.0

    @given(tokens_st, tokens_st)
    def test_bounded(self, a, b):
        assert 0.0 <= bleu(a, b) <= 1.0


class TestRouge:
    def test_lcs_example(self):
        assert rouge(list("abcd"), list("acbd"), "rL") == pytest.approx(0.75)

    @pytest.mark.parametrize("variant", ["r1", "r2", "rL"])
    def test_disjoint(self, variant):
        assert rouge(["a", "b"], ["c", "d"], variant) == 0.0

    def test_empty(self):
        assert rouge([], ["a"], "r1") == 0.0

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            rouge(["a"], ["a"], "r3")

    @given(tokens_st.filter(lambda t: len(t) >= 2))
    def test_identity(self, toks):
        for v in ("r1", "r2", "rL"):
            assert rouge(toks, toks, v) == 1.0

    @given(st.lists(st.sampled_from("abc"), max_size=8), st.lists(st.sampled_from("abc"), max_size=8))
    def test_lcs_matches_bruteforce(self, a, b):
        assert lcs_length(a, b) == brute_lcs(a, b)


class TestExactMatch:
    def test_all(self):
        assert exact_match_accuracy(["A", "b "], ["a", "B"]) == 1.0

    def test_none(self):
        assert exact_match_accuracy(["x"], ["y"]) == 0.0

    def test_49_of_50(self):
        labels = [f"hotel {i}" for i in range(50)]
        preds = labels[:49] + ["wrong"]
        assert exact_match_accuracy(preds, labels) == 0.98

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            exact_match_accuracy(["a"], ["a", "b"])


class TestSemanticAccuracy:
    def test_identical_any_embedder(self):
        rng = np.random.default_rng(0)
        table = {}

        def random_embedder(tokens):
            return np.array([table.setdefault(t, rng.normal(size=8)) for t in tokens])

        text = "the potala palace stands on red hill"
        assert semantic_accuracy(text, text, random_embedder) == pytest.approx(1.0, abs=1e-12)
        assert semantic_accuracy(text, text) == 1.0

    def test_disjoint_onehot(self):
        assert semantic_accuracy("a b c", "d e f", OneHotEmbedder()) == 0.0

    def test_empty(self):
        with pytest.raises(DataError):
            semantic_accuracy("", "a")

    @given(tokens_st, tokens_st)
    def test_onehot_equals_rouge1(self, a, b):
        got = semantic_accuracy(" ".join(a), " ".join(b), OneHotEmbedder())
        assert got == pytest.approx(rouge(a, b, "r1"), abs=1e-12)

    def test_partial_similarity_in_range(self):
        def emb(tokens):
            base = {"lake": [1, 0], "pond": [0.8, 0.6], "hill": [0, 1]}
            return np.array([base[t] for t in tokens], float)

        s = semantic_accuracy("pond", "lake", emb)
        assert s == pytest.approx(0.8)

"""Overlap and similarity metrics between a candidate and a reference text."""

from __future__ import annotations

import math
import re
from collections import Counter
from typing import Callable, Sequence

import numpy as np

from .errors import DataError

_CJK = (
    r"\u2e80-\u2fdf\u3040-\u30ff\u3100-\u312f\u3190-\u31ff\u3400-\u4dbf"
    r"\u4e00-\u9fff\uac00-\ud7af\uf900-\ufaff"
)
_TOKEN = re.compile(rf"[{_CJK}]|(?:(?![{_CJK}])[^\W_])+")


def tokenize(text: str) -> list[str]:
    """Case-folded word tokens; each CJK character is its own token, punctuation is dropped."""
    return [t.casefold() for t in _TOKEN.findall(text or "")]


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: Sequence[str], reference: Sequence[str], max_n: int = 4) -> float:
    """Sentence BLEU with brevity penalty.

    Orders 2..max_n with no clipped matches use add-one smoothing on both
    numerator and denominator. Unigram precision is never smoothed, so a
    candidate sharing no token with the reference scores 0.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    if not candidate or not reference:
        return 0.0
    log_p = 0.0
    for n in range(1, max_n + 1):
        cand = ngrams(candidate, n)
        ref = ngrams(reference, n)
        matches = sum(min(c, ref[g]) for g, c in cand.items())
        total = sum(cand.values())
        if matches == 0:
            if n == 1:
                return 0.0
            matches, total = 1, total + 1
        log_p += math.log(matches / total)
    c, r = len(candidate), len(reference)
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return min(1.0, bp * math.exp(log_p / max_n))


def lcs_length(a: Sequence, b: Sequence) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def _f1(overlap: float, n_cand: int, n_ref: int) -> float:
    if overlap <= 0 or n_cand == 0 or n_ref == 0:
        return 0.0
    p, r = overlap / n_cand, overlap / n_ref
    return 2 * p * r / (p + r)


ROUGE_VARIANTS = ("r1", "r2", "rL")


def rouge(candidate: Sequence[str], reference: Sequence[str], variant: str = "r1") -> float:
    """ROUGE F1: ``r1``/``r2`` from clipped n-gram overlap, ``rL`` from the LCS."""
    if variant == "rL":
        return _f1(lcs_length(candidate, reference), len(candidate), len(reference))
    if variant not in ROUGE_VARIANTS:
        raise ValueError(f"unknown ROUGE variant {variant!r}")
    n = 1 if variant == "r1" else 2
    cand, ref = ngrams(candidate, n), ngrams(reference, n)
    overlap = sum((cand & ref).values())
    return _f1(overlap, sum(cand.values()), sum(ref.values()))


def _norm_label(s: str) -> str:
    return s.strip().casefold()


def exact_match_accuracy(predictions: Sequence[str], labels: Sequence[str]) -> float:
    if len(predictions) != len(labels):
        raise DataError(f"{len(predictions)} predictions vs {len(labels)} labels")
    if not labels:
        raise DataError("no labels to score")
    hits = sum(_norm_label(p) == _norm_label(l) for p, l in zip(predictions, labels))
    return hits / len(labels)


Embedder = Callable[[Sequence[str]], np.ndarray]


class OneHotEmbedder:
    """One axis per token type: cosine similarity is 1 for equal tokens, else 0."""

    def __init__(self):
        self._index: dict[str, int] = {}

    def __call__(self, tokens: Sequence[str]) -> np.ndarray:
        for t in tokens:
            self._index.setdefault(t, len(self._index))
        out = np.zeros((len(tokens), len(self._index)))
        for i, t in enumerate(tokens):
            out[i, self._index[t]] = 1.0
        return out


def _cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    width = max(a.shape[1], b.shape[1])
    a = np.pad(a, ((0, 0), (0, width - a.shape[1])))
    b = np.pad(b, ((0, 0), (0, width - b.shape[1])))
    na = np.linalg.norm(a, axis=1, keepdims=True)
    nb = np.linalg.norm(b, axis=1, keepdims=True)
    sim = (a / np.where(na == 0, 1, na)) @ (b / np.where(nb == 0, 1, nb)).T
    return np.clip(sim, 0.0, 1.0)


def semantic_accuracy(candidate: str, reference: str, embedder: Embedder | None = None) -> float:
    """Embedding-similarity F1 between two texts.

    Token pairs are matched greedily in order of decreasing cosine similarity,
    each token used at most once. Precision and recall divide the summed
    similarity of matched pairs by the candidate and reference lengths.
    """
    cand, ref = tokenize(candidate), tokenize(reference)
    if not cand or not ref:
        raise DataError("semantic_accuracy needs two non-empty texts")
    embedder = embedder or OneHotEmbedder()
    sim = _cosine_matrix(np.asarray(embedder(cand), float), np.asarray(embedder(ref), float))
    order = np.argsort(-sim, axis=None, kind="stable")
    used_c, used_r = set(), set()
    total = 0.0
    for flat in order:
        i, j = divmod(int(flat), sim.shape[1])
        if i in used_c or j in used_r:
            continue
        used_c.add(i)
        used_r.add(j)
        total += sim[i, j]
        if len(used_c) == min(sim.shape):
            break
    return min(1.0, _f1(total, len(cand), len(ref)))

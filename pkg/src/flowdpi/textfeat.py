"""Payload featurization: tri-gram TF-IDF plus linguistic counts.

A payload maps to a sparse vector of dimension |vocabulary| + 5: the
tri-gram TF-IDF block followed by five min-max-normalized linguistic
features (digits, consecutive digits, consecutive consonants, repeated
letters, vowels).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

N_LINGUISTIC = 5

_VOWELS = frozenset("aeiou")
_LETTERS = frozenset("abcdefghijklmnopqrstuvwxyz")
_CONSONANTS = _LETTERS - _VOWELS   # 'y' counts as a consonant


def trigrams(payload: str) -> list[str]:
    """All contiguous 3-character substrings, in order, with duplicates."""
    return [payload[i:i + 3] for i in range(len(payload) - 2)]


@dataclass(frozen=True)
class TfIdfModel:
    vocabulary: dict[str, int]    # trigram -> dense column index
    idf: tuple[float, ...]
    n_docs: int


def fit_tfidf(corpus: Sequence[str]) -> TfIdfModel:
    """Fit vocabulary (sorted tri-grams) and smoothed IDF weights.

    idf[t] = ln((1 + n_docs) / (1 + df(t))) + 1
    """
    if len(corpus) == 0:
        raise ValueError("cannot fit TF-IDF on an empty corpus")
    df: Counter[str] = Counter()
    for payload in corpus:
        df.update(set(trigrams(payload)))
    vocab = {t: i for i, t in enumerate(sorted(df))}
    n = len(corpus)
    idf = [0.0] * len(vocab)
    for t, i in vocab.items():
        idf[i] = math.log((1 + n) / (1 + df[t])) + 1.0
    return TfIdfModel(vocab, tuple(idf), n)


def transform_tfidf(model: TfIdfModel, payload: str) -> list[tuple[int, float]]:
    """Sparse (index, tf*idf) pairs for the payload's tri-gram block.

    TF is the relative frequency over all tri-grams of the payload
    (out-of-vocabulary ones included in the denominator).
    """
    grams = trigrams(payload)
    if not grams:
        return []
    total = len(grams)
    counts = Counter(grams)
    pairs = []
    for t, c in counts.items():
        idx = model.vocabulary.get(t)
        if idx is not None:
            pairs.append((idx, (c / total) * model.idf[idx]))
    pairs.sort()
    return pairs


@dataclass(frozen=True)
class LinguisticFeatures:
    n_digits: int
    n_consecutive_digits: int
    n_consecutive_consonants: int
    n_repeated_letters: int
    n_vowels: int

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.n_digits, self.n_consecutive_digits,
                self.n_consecutive_consonants, self.n_repeated_letters,
                self.n_vowels)


def _run_sum(chars: Iterable[bool]) -> int:
    """Sum of lengths of maximal True-runs of length >= 2."""
    total = 0
    run = 0
    for hit in chars:
        if hit:
            run += 1
        else:
            if run >= 2:
                total += run
            run = 0
    if run >= 2:
        total += run
    return total


def linguistic_features(payload: str) -> LinguisticFeatures:
    low = payload.lower()
    n_digits = sum(c.isdigit() and c.isascii() for c in low)
    n_cons_digits = _run_sum(c.isdigit() and c.isascii() for c in low)
    n_cons_consonants = _run_sum(c in _CONSONANTS for c in low)
    letter_counts = Counter(c for c in low if c in _LETTERS)
    n_repeated = sum(1 for c in letter_counts.values() if c > 1)
    n_vowels = sum(c in _VOWELS for c in low)
    return LinguisticFeatures(n_digits, n_cons_digits, n_cons_consonants,
                              n_repeated, n_vowels)


@dataclass(frozen=True)
class NormalizationParams:
    l_min: tuple[float, ...]
    l_max: tuple[float, ...]

    def __post_init__(self):
        if len(self.l_min) != N_LINGUISTIC or len(self.l_max) != N_LINGUISTIC:
            raise ValueError("normalization params must have 5 components")
        if any(lo > hi for lo, hi in zip(self.l_min, self.l_max)):
            raise ValueError("l_min must be <= l_max component-wise")


def fit_normalizer(rows: Sequence[LinguisticFeatures]) -> NormalizationParams:
    if len(rows) == 0:
        raise ValueError("cannot fit normalizer on empty input")
    cols = list(zip(*(r.as_tuple() for r in rows)))
    return NormalizationParams(tuple(float(min(c)) for c in cols),
                               tuple(float(max(c)) for c in cols))


def normalize(params: NormalizationParams,
              features: LinguisticFeatures) -> tuple[float, ...]:
    """Min-max rescale each count to [0,1]; constant features map to 0,
    transform-time out-of-range values are clamped."""
    out = []
    for value, lo, hi in zip(features.as_tuple(), params.l_min, params.l_max):
        if hi == lo:
            out.append(0.0)
        else:
            out.append(min(1.0, max(0.0, (value - lo) / (hi - lo))))
    return tuple(out)


@dataclass(frozen=True)
class FeatureVector:
    dim: int
    indices: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices/values length mismatch")
        prev = -1
        for i in self.indices:
            if not prev < i < self.dim:
                raise ValueError("indices must be strictly increasing "
                                 "and < dim")
            prev = i

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim)
        if self.indices:
            dense[list(self.indices)] = self.values
        return dense


@dataclass(frozen=True)
class Featurizer:
    """Fitted featurizer: TF-IDF model plus linguistic normalizer."""

    tfidf: TfIdfModel
    norm: NormalizationParams

    @property
    def dim(self) -> int:
        return len(self.tfidf.vocabulary) + N_LINGUISTIC

    def featurize(self, payload: str) -> FeatureVector:
        return featurize(self.tfidf, self.norm, payload)


def fit_featurizer(corpus: Sequence[str]) -> Featurizer:
    tfidf = fit_tfidf(corpus)
    norm = fit_normalizer([linguistic_features(p) for p in corpus])
    return Featurizer(tfidf, norm)


def featurize(tfidf_model: TfIdfModel, norm_params: NormalizationParams,
              payload: str) -> FeatureVector:
    """Tri-gram block at [0, |V|) followed by the 5 normalized linguistic
    components; zero entries omitted from the sparse form."""
    n_vocab = len(tfidf_model.vocabulary)
    pairs = transform_tfidf(tfidf_model, payload)
    ling = normalize(norm_params, linguistic_features(payload))
    for j, value in enumerate(ling):
        if value != 0.0:
            pairs.append((n_vocab + j, value))
    indices, values = zip(*pairs) if pairs else ((), ())
    return FeatureVector(n_vocab + N_LINGUISTIC, tuple(indices),
                         tuple(values))


def stack_dense(vectors: Sequence[FeatureVector]) -> np.ndarray:
    """Dense design matrix from featurized payloads."""
    if not vectors:
        raise ValueError("no vectors to stack")
    dim = vectors[0].dim
    X = np.zeros((len(vectors), dim))
    for i, v in enumerate(vectors):
        if v.dim != dim:
            raise ValueError("inconsistent feature dimensions")
        if v.indices:
            X[i, list(v.indices)] = v.values
    return X

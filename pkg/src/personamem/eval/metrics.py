"""Lexical and agreement metrics for evaluation runs."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import combinations

from ..errors import RaggedMatrix
from ..textutil import tokenize
from ..vectors import dot


def rouge1_f(candidate: str, reference: str) -> float:
    """Unigram overlap F1. Tokenization: lowercase, split on non-alphanumeric;
    overlap is the clipped multiset intersection."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    overlap = sum((Counter(cand) & Counter(ref)).values())
    precision = overlap / len(cand) if cand else 0.0
    recall = overlap / len(ref) if ref else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def token_sim_f(candidate: str, reference: str, embed) -> float:
    """Greedy token-level embedding similarity F1.

    Precision: mean over candidate tokens of the best cosine against any
    reference token; recall symmetric; harmonic mean, clamped to [0, 1].
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return 0.0
    vectors = {t: embed(t).values for t in set(cand) | set(ref)}
    precision = sum(max(dot(vectors[c], vectors[r]) for r in ref) for c in cand) / len(cand)
    recall = sum(max(dot(vectors[r], vectors[c]) for c in cand) for r in ref) / len(ref)
    if precision + recall == 0.0:
        return 0.0
    return min(1.0, max(0.0, 2 * precision * recall / (precision + recall)))


@dataclass
class AgreementResult:
    all_raters: float  # fraction of items where every rater agreed
    pairwise_mean: float

    def to_dict(self) -> dict:
        return {"all_raters": self.all_raters, "pairwise_mean": self.pairwise_mean}


def percent_agreement(matrix: list[list[float]]) -> AgreementResult:
    """Rows are items, columns are raters. Primary figure: fraction of rows
    on which all raters assigned the identical label."""
    if not matrix:
        raise ValueError("need at least one item")
    width = len(matrix[0])
    if width < 2:
        raise ValueError("need at least two raters")
    for i, row in enumerate(matrix):
        if len(row) != width:
            raise RaggedMatrix(f"row {i} has {len(row)} labels, expected {width}")

    unanimous = sum(1 for row in matrix if all(label == row[0] for label in row))
    all_raters = unanimous / len(matrix)

    pair_scores = []
    for a, b in combinations(range(width), 2):
        agree = sum(1 for row in matrix if row[a] == row[b])
        pair_scores.append(agree / len(matrix))
    return AgreementResult(all_raters=all_raters, pairwise_mean=sum(pair_scores) / len(pair_scores))

"""Small dense-vector helpers (plain lists; desk-scale linear algebra)."""

from __future__ import annotations

import math


def dot(a: list[float], b: list[float]) -> float:
    return sum(x * y for x, y in zip(a, b))


def l2_norm(a: list[float]) -> float:
    return math.sqrt(sum(x * x for x in a))


def normalize(a: list[float]) -> list[float]:
    n = l2_norm(a)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return [x / n for x in a]


def cosine(a: list[float], b: list[float]) -> float:
    """Cosine similarity. Inputs are unit vectors throughout the engine,
    so this is a plain dot product with a guard for non-normalized callers."""
    na, nb = l2_norm(a), l2_norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    if abs(na - 1.0) < 1e-9 and abs(nb - 1.0) < 1e-9:
        return dot(a, b)
    return dot(a, b) / (na * nb)

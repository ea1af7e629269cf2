"""Retrieval evaluation metrics and the manual-inspection sample-size formula."""

from __future__ import annotations

import json
import math
from typing import Sequence


def mrr(ranks: Sequence[int | None]) -> float:
    """Mean reciprocal rank; a missing rank (None) contributes zero."""
    if len(ranks) == 0:
        raise ValueError("mrr needs at least one query")
    total = 0.0
    for rank in ranks:
        if rank is None:
            continue
        if rank < 1:
            raise ValueError("ranks must be positive integers")
        total += 1.0 / rank
    return total / len(ranks)


def answered_at_k(ranks: Sequence[int | None], k: int) -> int:
    """Number of queries whose first hit appears within the top k results."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return sum(1 for rank in ranks if rank is not None and rank <= k)


def sample_size(population: float, confidence_z: float = 1.96, p: float = 0.5, c: float = 0.05) -> int:
    """Cochran sample size with finite-population correction, rounded up.

    ``population`` may be ``math.inf`` for the uncorrected limit.
    """
    if population < 1:
        raise ValueError("population must be >= 1")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if c <= 0 or confidence_z <= 0:
        raise ValueError("confidence_z and c must be positive")
    ss0 = confidence_z * confidence_z * p * (1.0 - p) / (c * c)
    ss = ss0 / (1.0 + (ss0 - 1.0) / population)
    return int(math.ceil(ss))


def read_rank_file(path) -> list[tuple[str, int | None]]:
    """Read a JSONL rank file with fields "query_id" and "rank" (int or null)."""
    out: list[tuple[str, int | None]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            obj = json.loads(stripped)
            rank = obj.get("rank")
            if rank is not None:
                rank = int(rank)
                if rank < 1:
                    raise ValueError(f"line {line_no}: rank must be >= 1 or null")
            out.append((obj["query_id"], rank))
    return out

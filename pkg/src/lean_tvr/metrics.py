"""Retrieval ranks and summary metrics."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class RetrievalMetrics:
    r1: float
    r5: float
    r10: float
    rsum: float
    mdr: float
    mnr: float

    def as_dict(self, decimals: int | None = 2) -> dict:
        d = asdict(self)
        if decimals is not None:
            d = {k: round(float(v), decimals) for k, v in d.items()}
        return d


def rank_of_target(scores, target: int) -> int:
    """1-based rank; equal scores at a lower index rank ahead of the target."""
    s = np.asarray(scores, dtype=np.float64)
    if not 0 <= target < s.shape[0]:
        raise IndexError(f"target {target} out of range for {s.shape[0]} candidates")
    st = s[target]
    return 1 + int(np.sum(s > st)) + int(np.sum(s[:target] == st))


def metrics(ranks) -> RetrievalMetrics:
    r = np.asarray(ranks, dtype=np.float64)
    if r.size == 0:
        raise ValueError("no ranks to summarize")
    if np.any(r < 1):
        raise ValueError("ranks are 1-based")
    r1, r5, r10 = (100.0 * float(np.mean(r <= k)) for k in (1, 5, 10))
    return RetrievalMetrics(r1, r5, r10, r1 + r5 + r10, float(np.median(r)), float(r.mean()))


def t2v_ranks(s) -> list[int]:
    """Rows are text queries over video candidates; target is the diagonal."""
    s = np.asarray(s)
    return [rank_of_target(s[i], i) for i in range(s.shape[0])]


def v2t_ranks(s) -> list[int]:
    s = np.asarray(s)
    return [rank_of_target(s[:, j], j) for j in range(s.shape[1])]


def both_directions(s) -> tuple[RetrievalMetrics, RetrievalMetrics]:
    return metrics(t2v_ranks(s)), metrics(v2t_ranks(s))

"""Split evaluation and single-query retrieval from a saved checkpoint."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from . import dataio
from .metrics import both_directions
from .pipeline import similarity_matrix
from .trainer import load_checkpoint, load_pairs


def evaluate(checkpoint, manifest, split: str = "test", backend: str | None = None) -> dict:
    """Score every (text, video) pair of ``split`` in eval mode and report
    both retrieval directions, rounded to two decimals."""
    params, _, config, meta = load_checkpoint(checkpoint)
    records = dataio.select_split(dataio.load_manifest(manifest), split)
    if not records:
        raise ValueError(f"split {split!r} is empty")
    data = load_pairs(records, config.frames)
    s = similarity_matrix(data.texts, data.videos, params, mode="eval", backend=backend)
    t2v, v2t = both_directions(s)
    return {
        "t2v": t2v.as_dict(),
        "v2t": v2t.as_dict(),
        "pairs": len(records),
        "checkpoint": str(Path(checkpoint)),
        "seed": meta["seed"],
    }


def retrieve(checkpoint, manifest, query_id: str, topk: int = 5, direction: str = "t2v",
             backend: str | None = None) -> list[tuple[str, float]]:
    """Rank every opposite-modality item in the manifest for one query.

    ``t2v`` uses the record's text as the query against all videos, ``v2t``
    the reverse. Ties keep manifest id order. Cost is one pair graph per
    candidate, so this is meant for desk-scale corpora.
    """
    if direction not in ("t2v", "v2t"):
        raise ValueError(f"direction must be 't2v' or 'v2t', got {direction!r}")
    if topk < 1:
        raise ValueError("topk must be >= 1")
    params, _, config, _ = load_checkpoint(checkpoint)
    records = sorted(dataio.load_manifest(manifest), key=lambda r: r.id)
    ids = [r.id for r in records]
    if query_id not in ids:
        raise KeyError(f"query id {query_id!r} not in manifest")
    data = load_pairs(records, config.frames)
    q = ids.index(query_id)
    if direction == "t2v":
        scores = similarity_matrix([data.texts[q]], data.videos, params, backend=backend)[0]
    else:
        scores = similarity_matrix(data.texts, [data.videos[q]], params, backend=backend)[:, 0]
    order = sorted(range(len(ids)), key=lambda j: (-scores[j], j))
    return [(ids[j], float(scores[j])) for j in order[:topk]]


def checkpoint_summary(checkpoint) -> dict:
    params, state, config, meta = load_checkpoint(checkpoint)
    return {
        "checkpoint": str(Path(checkpoint)),
        "epoch": meta["epoch"],
        "best_metric": meta["best_metric"],
        "optimizer_step": None if state is None else state.t,
        "config": meta["config"],
        "params": {k: list(v.shape) for k, v in params.items()},
        "param_count": int(sum(np.prod(v.shape) for v in params.values())),
    }

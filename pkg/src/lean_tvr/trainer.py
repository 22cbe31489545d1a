"""AdamW, the training loop and checkpoints.

A checkpoint is a directory holding ``meta.json`` (format version, config,
parameter index, seed, epoch, best metric) and ``params.bin``: model tensors
followed by the AdamW moments, each as a float64 tensor record.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import dataio
from .dataio import DTYPE_F64, Record, decode_tensor, encode_tensor
from .errors import (CheckpointError, DimensionError, TruncatedCheckpointError,
                     UnknownParameterError, VersionMismatchError)
from .hypergraph import select_keyframes
from .metrics import both_directions
from .numerics import SeededRng
from .params import ModelParams, init_params, param_shapes
from .pipeline import loss_and_grad, similarity_matrix
from .scoring import LossWeights

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
BETA1, BETA2, ADAM_EPS = 0.9, 0.999, 1e-8


@dataclass
class TrainConfig:
    hidden_dim: int = 256
    layers: int = 2
    lr: float = 3e-5
    weight_decay: float = 0.01
    batch: int = 16
    epochs: int = 30
    lambda_v2t: float = 0.5
    lambda_t2v: float = 0.5
    lambda_v: float = 0.6
    gamma: float = 1.0
    frames: int = 10
    seed: int = 0
    eval_start_epoch: int = 1
    val_split: str = "val"

    def __post_init__(self):
        for name in ("hidden_dim", "batch", "epochs", "frames"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.layers < 0 or self.lr < 0 or self.weight_decay < 0 or self.gamma <= 0:
            raise ValueError("layers, lr, weight_decay must be >= 0 and gamma > 0")

    @property
    def loss_weights(self) -> LossWeights:
        return LossWeights(self.lambda_v2t, self.lambda_t2v, self.lambda_v)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class OptimizerState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def fresh(cls, params: ModelParams) -> "OptimizerState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()}, 0)


def adamw_step(params: ModelParams, grads, state: OptimizerState, lr: float, wd: float):
    """In-place AdamW update with decoupled weight decay; returns
    ``(params, state)``."""
    for k, g in grads.items():
        if k not in params or params[k].shape != np.shape(g):
            raise DimensionError(f"gradient {k!r} does not match any parameter shape")
    state.t += 1
    bc1 = 1.0 - BETA1 ** state.t
    bc2 = 1.0 - BETA2 ** state.t
    for k, theta in params.items():
        g = grads[k]
        m = state.m[k]
        v = state.v[k]
        m *= BETA1
        m += (1.0 - BETA1) * g
        v *= BETA2
        v += (1.0 - BETA2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        theta -= lr * (m_hat / (np.sqrt(v_hat) + ADAM_EPS) + wd * theta)
    return params, state


# -- data -------------------------------------------------------------------------

@dataclass
class PairData:
    ids: list[str]
    texts: list[np.ndarray]
    videos: list[np.ndarray]

    def __len__(self):
        return len(self.ids)


def load_pairs(records: list[Record], frames: int) -> PairData:
    """Read features and reduce each video to its keyframes."""
    texts, videos = [], []
    for r in records:
        texts.append(r.load_text())
        raw = r.load_video()
        videos.append(raw[select_keyframes(raw, frames)])
    return PairData([r.id for r in records], texts, videos)


def split_metrics(params: ModelParams, data: PairData):
    s = similarity_matrix(data.texts, data.videos, params, mode="eval")
    return both_directions(s), s


# -- checkpoints ------------------------------------------------------------------

def save_checkpoint(params: ModelParams, state: OptimizerState | None, config: TrainConfig,
                    path, epoch: int = 0, best_metric: float | None = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    index = []
    blobs = []
    offset = 0
    tensors = list(params.items())
    if state is not None:
        tensors += [(f"adam.m.{k}", state.m[k]) for k in params]
        tensors += [(f"adam.v.{k}", state.v[k]) for k in params]
    for name, arr in tensors:
        blob = encode_tensor(arr, DTYPE_F64)
        index.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(blob)})
        blobs.append(blob)
        offset += len(blob)
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "text_dim": params.text_dim,
        "video_dim": params.video_dim,
        "seed": config.seed,
        "epoch": epoch,
        "best_metric": best_metric,
        "optimizer_step": None if state is None else state.t,
        "params": index,
    }
    (path / "params.bin").write_bytes(b"".join(blobs))
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def load_checkpoint(path):
    """Returns ``(params, optimizer_state_or_None, config, meta)``."""
    path = Path(path)
    meta_path, bin_path = path / "meta.json", path / "params.bin"
    if not meta_path.is_file() or not bin_path.is_file():
        raise FileNotFoundError(f"no checkpoint at {path}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt meta.json: {exc}") from None
    if meta.get("version") != CHECKPOINT_VERSION:
        raise VersionMismatchError(
            f"checkpoint version {meta.get('version')!r}, expected {CHECKPOINT_VERSION}")
    config = TrainConfig.from_dict(meta["config"])
    shapes = param_shapes(config.hidden_dim, meta["text_dim"], meta["video_dim"], config.layers)
    buf = bin_path.read_bytes()
    expected = sum(e["nbytes"] for e in meta["params"])
    if len(buf) < expected:
        raise TruncatedCheckpointError(f"params.bin has {len(buf)} bytes, index needs {expected}")
    if len(buf) > expected:
        raise CheckpointError(f"params.bin has {len(buf) - expected} trailing bytes")
    params = ModelParams(layers=config.layers, gamma=config.gamma)
    m, v = {}, {}
    for entry in meta["params"]:
        name = entry["name"]
        if name.startswith("adam.m."):
            base, dest = name[7:], m
        elif name.startswith("adam.v."):
            base, dest = name[7:], v
        else:
            base, dest = name, None
        if base not in shapes:
            raise UnknownParameterError(name)
        chunk = buf[entry["offset"]:entry["offset"] + entry["nbytes"]]
        arr, _ = decode_tensor(chunk)
        if arr.shape != tuple(shapes[base]):
            raise CheckpointError(f"{name}: shape {arr.shape}, expected {tuple(shapes[base])}")
        (params if dest is None else dest)[base] = arr
    missing = [k for k in shapes if k not in params]
    if missing:
        raise CheckpointError(f"checkpoint lacks parameters {missing}")
    # restore canonical order
    params = ModelParams(((k, params[k]) for k in shapes), layers=config.layers, gamma=config.gamma)
    state = None
    if m or v:
        if set(m) != set(shapes) or set(v) != set(shapes):
            raise CheckpointError("incomplete optimizer state")
        state = OptimizerState(m, v, int(meta.get("optimizer_step") or 0))
    return params, state, config, meta


# -- training loop ----------------------------------------------------------------

def train(manifest, config: TrainConfig, out_dir, backend: str | None = None) -> Path:
    """Train on the manifest's train split; returns the best checkpoint path.

    Validation RSUM (t2v + v2t) picks the checkpoint; ties go to the later
    epoch. Without a validation split the last epoch is kept.
    """
    records = dataio.load_manifest(manifest)
    train_recs = dataio.select_split(records, "train")
    if not train_recs:
        raise ValueError("manifest has no training pairs")
    if len(train_recs) < config.batch:
        raise ValueError(f"{len(train_recs)} training pairs is fewer than batch={config.batch}; "
                         f"use a smaller batch")
    val_recs = dataio.select_split(records, config.val_split)
    train_data = load_pairs(train_recs, config.frames)
    val_data = load_pairs(val_recs, config.frames) if val_recs else None

    params = init_params(config.hidden_dim, train_data.texts[0].shape[1],
                         train_data.videos[0].shape[1], config.layers, config.seed, config.gamma)
    state = OptimizerState.fresh(params)
    weights = config.loss_weights
    master = SeededRng(config.seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    best_path = out / "best"
    best = -np.inf
    history = []
    step = 0
    for epoch in range(1, config.epochs + 1):
        order = master.child(1_000_000 + epoch).generator.permutation(len(train_data))
        losses, parts = [], []
        for start in range(0, len(order), config.batch):
            idx = order[start:start + config.batch]
            texts = [train_data.texts[i] for i in idx]
            videos = [train_data.videos[i] for i in idx]
            res, grads = loss_and_grad(texts, videos, params, weights, master.child(step), backend)
            adamw_step(params, grads, state, config.lr, config.weight_decay)
            losses.append(res.loss)
            parts.append((res.l_t2v, res.l_v2t, res.l_kl))
            step += 1
        mean_parts = np.mean(parts, axis=0)
        entry = {"epoch": epoch, "loss": float(np.mean(losses)), "l_t2v": float(mean_parts[0]),
                 "l_v2t": float(mean_parts[1]), "l_kl": float(mean_parts[2])}
        if val_data is not None and epoch >= config.eval_start_epoch:
            (t2v, v2t), _ = split_metrics(params, val_data)
            rsum = t2v.rsum + v2t.rsum
            entry.update(val_t2v=t2v.as_dict(), val_v2t=v2t.as_dict(), val_rsum=rsum)
            if rsum >= best:
                best = rsum
                save_checkpoint(params, state, config, best_path, epoch, best)
        elif val_data is None:
            save_checkpoint(params, state, config, best_path, epoch, None)
        history.append(entry)
        log.info("epoch %d loss %.6f (t2v %.4f v2t %.4f kl %.4f)%s", epoch, entry["loss"],
                 entry["l_t2v"], entry["l_v2t"], entry["l_kl"],
                 f" val_rsum {entry['val_rsum']:.2f}" if "val_rsum" in entry else "")
    final_metric = None if not np.isfinite(best) else best
    save_checkpoint(params, state, config, out / "last", config.epochs, final_metric)
    if not (best_path / "meta.json").is_file():
        save_checkpoint(params, state, config, best_path, config.epochs, final_metric)
    (out / "history.json").write_text(json.dumps(history, indent=2, sort_keys=True) + "\n")
    return best_path

"""Tensor files, dataset manifests and the synthetic pair generator.

Tensor file layout (all integers little-endian u32)::

    b"LEANTNSR" | version=1 | dtype | rank | dims[rank] | payload

``dtype`` 0 is float32 (feature files); 1 is float64, used only inside
checkpoints so parameters survive a save/load bit-exactly. The payload is
row-major and must be exactly ``itemsize * prod(dims)`` bytes.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import DTypeError, MagicError, ManifestError, SizeError, VersionError
from .numerics import SeededRng

MAGIC = b"LEANTNSR"
VERSION = 1
DTYPE_F32 = 0
DTYPE_F64 = 1
_DTYPES = {DTYPE_F32: np.dtype("<f4"), DTYPE_F64: np.dtype("<f8")}
SPLITS = ("train", "val", "test")


def encode_tensor(array, dtype: int = DTYPE_F32) -> bytes:
    if dtype not in _DTYPES:
        raise DTypeError(f"unsupported dtype code {dtype}")
    a = np.asarray(array)
    if not np.all(np.isfinite(a)):
        raise ValueError("refusing to write non-finite tensor")
    header = MAGIC + struct.pack(f"<III{a.ndim}I", VERSION, dtype, a.ndim, *a.shape)
    return header + np.ascontiguousarray(a, dtype=_DTYPES[dtype]).tobytes()


def _parse_header(buf: bytes, offset: int = 0):
    if len(buf) - offset < 20:
        raise SizeError("truncated tensor header")
    if buf[offset:offset + 8] != MAGIC:
        raise MagicError(f"bad magic {bytes(buf[offset:offset + 8])!r}")
    version, dtype, rank = struct.unpack_from("<III", buf, offset + 8)
    if version != VERSION:
        raise VersionError(f"unsupported tensor version {version}")
    if dtype not in _DTYPES:
        raise DTypeError(f"unsupported dtype code {dtype}")
    start = offset + 20
    if len(buf) < start + 4 * rank:
        raise SizeError("truncated tensor dims")
    dims = struct.unpack_from(f"<{rank}I", buf, start)
    return dtype, tuple(dims), start + 4 * rank


def decode_tensor(buf: bytes, offset: int = 0, exact: bool = True):
    """Parse one tensor at ``offset``; returns ``(array, end_offset)``.

    With ``exact`` the record must end at the end of ``buf``.
    """
    dtype, dims, start = _parse_header(buf, offset)
    dt = _DTYPES[dtype]
    nbytes = dt.itemsize * int(np.prod(dims, dtype=np.int64))
    end = start + nbytes
    if len(buf) < end or (exact and len(buf) != end):
        raise SizeError(f"dims {dims} need {nbytes} payload bytes, found {len(buf) - start}")
    arr = np.frombuffer(buf, dtype=dt, count=nbytes // dt.itemsize, offset=start)
    return arr.reshape(dims).astype(np.float64), end


def write_tensor(path, matrix) -> None:
    Path(path).write_bytes(encode_tensor(matrix, DTYPE_F32))


def read_tensor(path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())[0]


def read_tensor_dims(path) -> tuple[int, ...]:
    with open(path, "rb") as fh:
        head = fh.read(20 + 4 * 8)
    return _parse_header(head)[1]


# -- manifests -------------------------------------------------------------------

@dataclass
class Record:
    id: str
    split: str
    tokens: list[str]
    text_path: Path
    text_rows: int
    video_path: Path
    video_rows: int

    def load_text(self) -> np.ndarray:
        return read_tensor(self.text_path)

    def load_video(self) -> np.ndarray:
        return read_tensor(self.video_path)


def _parse_record(obj, base: Path, lineno: int) -> Record:
    rid = obj.get("id") if isinstance(obj, dict) else None
    if not isinstance(rid, str) or not rid:
        raise ManifestError(f"line {lineno}", "missing or empty id")
    try:
        split = obj["split"]
        text, video = obj["text"], obj["video"]
        rec = Record(rid, split, list(text.get("tokens", [])), base / text["features"],
                     int(text["rows"]), base / video["features"], int(video["rows"]))
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ManifestError(rid, f"malformed record ({exc})") from None
    if split not in SPLITS:
        raise ManifestError(rid, f"unknown split {split!r}")
    if rec.text_rows < 1 or rec.video_rows < 1:
        raise ManifestError(rid, "rows must be >= 1")
    for kind, path, rows in (("text", rec.text_path, rec.text_rows),
                             ("video", rec.video_path, rec.video_rows)):
        if not path.is_file():
            raise ManifestError(rid, f"missing {kind} feature file {path}")
        try:
            dims = read_tensor_dims(path)
        except Exception as exc:
            raise ManifestError(rid, f"unreadable {kind} tensor: {exc}") from None
        if len(dims) != 2 or dims[0] != rows:
            raise ManifestError(rid, f"{kind} rows={rows} but tensor has dims {dims}")
    return rec


def validate_manifest(path):
    """Returns ``(records, errors)``; every line lands in exactly one list."""
    path = Path(path)
    base = path.parent
    records, errors, seen = [], [], set()
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.append((f"line {lineno}", f"invalid JSON: {exc}"))
            continue
        try:
            rec = _parse_record(obj, base, lineno)
        except ManifestError as exc:
            errors.append((exc.record_id, str(exc)))
            continue
        if rec.id in seen:
            errors.append((rec.id, f"record {rec.id!r}: duplicate id"))
            continue
        seen.add(rec.id)
        records.append(rec)
    return records, errors


def load_manifest(path) -> list[Record]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    records, errors = validate_manifest(path)
    if errors:
        rid, msg = errors[0]
        raise ManifestError(rid, msg.split(": ", 1)[-1], errors)
    return records


def select_split(records: list[Record], split: str) -> list[Record]:
    """``split`` may name several splits joined by ``,`` or ``+``."""
    wanted = set(split.replace("+", ",").split(","))
    unknown = wanted - set(SPLITS)
    if unknown:
        raise ValueError(f"unknown split(s) {sorted(unknown)}")
    return [r for r in records if r.split in wanted]


# -- synthetic data ---------------------------------------------------------------

@dataclass
class SynthSpec:
    pairs: int = 32
    clusters: int = 8
    text_dim: int = 768
    video_dim: int = 4096
    frames: int = 6
    tokens: int = 3
    noise: float = 0.05
    spread: float = 0.5
    latent_dim: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.pairs < 1:
            raise ValueError("need at least one pair")
        if not 1 <= self.clusters <= self.pairs:
            raise ValueError("clusters must lie in [1, pairs]")
        if self.noise < 0 or self.spread < 0:
            raise ValueError("noise and spread must be nonnegative")
        if min(self.text_dim, self.video_dim, self.frames, self.tokens, self.latent_dim) < 1:
            raise ValueError("dimensions and counts must be positive")


def split_for(k: int, pairs: int) -> str:
    """Last quarter of the pairs is held out, half val and half test."""
    held = pairs // 4
    n_val = held // 2
    first_held = pairs - held
    if k < first_held:
        return "train"
    return "val" if k < first_held + n_val else "test"


def synth_generate(spec: SynthSpec, out_dir) -> Path:
    """Clustered text/video pairs sharing a latent code.

    Pair ``k`` sits in cluster ``k % clusters`` with latent
    ``center + spread * jitter``; text rows are ``latent @ A_t + noise`` and
    frames ``latent @ A_v + noise`` for fixed random maps ``A_t``, ``A_v``.
    """
    out = Path(out_dir)
    feat_dir = out / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)
    gen = SeededRng(spec.seed).generator
    r = spec.latent_dim
    centers = gen.standard_normal((spec.clusters, r))
    a_t = gen.standard_normal((r, spec.text_dim)) / np.sqrt(r)
    a_v = gen.standard_normal((r, spec.video_dim)) / np.sqrt(r)
    lines = []
    width = len(str(spec.pairs - 1))
    for k in range(spec.pairs):
        c = k % spec.clusters
        latent = centers[c] + spec.spread * gen.standard_normal(r)
        text = latent @ a_t + spec.noise * gen.standard_normal((spec.tokens, spec.text_dim))
        video = latent @ a_v + spec.noise * gen.standard_normal((spec.frames, spec.video_dim))
        rid = f"pair{k:0{width}d}"
        write_tensor(feat_dir / f"{rid}_text.bin", text)
        write_tensor(feat_dir / f"{rid}_video.bin", video)
        tokens = [f"subj{c}", f"rel{k}", f"obj{c}"][: spec.tokens]
        tokens += [f"tok{t}" for t in range(len(tokens), spec.tokens)]
        lines.append(json.dumps({
            "id": rid,
            "split": split_for(k, spec.pairs),
            "cluster": c,
            "text": {"tokens": tokens, "features": f"features/{rid}_text.bin", "rows": spec.tokens},
            "video": {"features": f"features/{rid}_video.bin", "rows": spec.frames},
        }, sort_keys=True))
    manifest = out / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n")
    (out / "synth_spec.json").write_text(json.dumps(asdict(spec), indent=2, sort_keys=True) + "\n")
    return manifest

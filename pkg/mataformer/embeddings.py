import hashlib
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mataformer.consts import EMBEDDING_MAGIC, EMBEDDING_NORM_REPAIR
from mataformer.errors import DataError
from mataformer.events import Trajectory

logger = logging.getLogger(__name__)

_HEADER = struct.Struct("<IQ")
_KEY_LEN = struct.Struct("<I")


def _text_stream(text: str, dim: int, seed: int) -> np.random.Generator:
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=16).digest()
    words = np.frombuffer(digest, dtype="<u4").tolist()
    return np.random.default_rng([seed, dim, *words])


def embed_synthetic(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """embed_synthetic maps text to a deterministic unit vector

    The text is hashed into a PRNG stream, ``dim`` standard normals are drawn
    and the result is scaled to unit L2 norm. Identical (text, dim, seed)
    give bit-identical vectors.
    """
    if dim < 2:
        raise ValueError(f"embedding dim must be >= 2, got {dim}")
    vec = _text_stream(text, dim, seed).standard_normal(dim)
    return vec / np.linalg.norm(vec)


@dataclass
class EmbeddingStore:
    """EmbeddingStore maps event keys (textualized events) to unit vectors"""

    dim: int = field(kw_only=True)
    vectors: dict[str, np.ndarray] = field(kw_only=True, default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"embedding dim must be positive, got {self.dim}")
        for key, vec in list(self.vectors.items()):
            self.add(key, vec)

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, key: str) -> bool:
        return key in self.vectors

    def add(self, key: str, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise DataError(f"vector for {key!r} has shape {vec.shape}, want ({self.dim},)")
        if abs(np.linalg.norm(vec) - 1.0) > 1e-6:
            raise DataError(f"vector for {key!r} is not unit norm")
        self.vectors[key] = vec

    def get(self, key: str) -> np.ndarray:
        try:
            return self.vectors[key]
        except KeyError:
            raise DataError(f"no embedding for event text {key!r}")

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as f:
            f.write(EMBEDDING_MAGIC)
            f.write(_HEADER.pack(self.dim, len(self.vectors)))
            for key, vec in self.vectors.items():
                raw = key.encode("utf-8")
                f.write(_KEY_LEN.pack(len(raw)))
                f.write(raw)
                f.write(vec.astype("<f4").tobytes())


def _repair_norm(key: str, vec: np.ndarray, path: str) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    deviation = abs(norm - 1.0)
    if deviation >= EMBEDDING_NORM_REPAIR:
        raise DataError(f"vector for {key!r} has norm {norm:.6f}", path)
    if deviation > 1e-6:
        logger.warning("re-normalizing embedding %r with norm %.6f", key, norm)
    return vec / norm


def load_precomputed(path: str | Path) -> EmbeddingStore:
    """load_precomputed reads the binary embedding format into a store

    Vectors whose norm deviates from 1 by less than 1e-3 are re-normalized with
    a warning; larger deviations are rejected.
    """
    where = str(path)
    data = Path(path).read_bytes()
    if data[: len(EMBEDDING_MAGIC)] != EMBEDDING_MAGIC:
        raise DataError("bad magic, not an embedding file", where)
    offset = len(EMBEDDING_MAGIC)
    if len(data) < offset + _HEADER.size:
        raise DataError("truncated header", where)
    dim, count = _HEADER.unpack_from(data, offset)
    offset += _HEADER.size
    if dim < 1:
        raise DataError(f"invalid dim {dim}", where)

    row_bytes = 4 * dim
    store = EmbeddingStore(dim=dim)
    for row in range(count):
        if len(data) < offset + _KEY_LEN.size:
            raise DataError(f"truncated at row {row}", where)
        (key_len,) = _KEY_LEN.unpack_from(data, offset)
        offset += _KEY_LEN.size
        if len(data) < offset + key_len + row_bytes:
            raise DataError(f"truncated at row {row}", where)
        try:
            key = data[offset : offset + key_len].decode("utf-8")
        except UnicodeDecodeError as e:
            raise DataError(f"entry {row}: key is not valid UTF-8 ({e.reason} at byte {e.start})", where)
        offset += key_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).astype(np.float64)
        offset += row_bytes
        store.vectors[key] = _repair_norm(key, vec, where)
    if offset != len(data):
        logger.warning("%s: %d trailing bytes ignored", where, len(data) - offset)
    logger.debug("loaded %d embeddings of dim %d from %s", count, dim, where)
    return store


def embed_trajectory(traj: Trajectory, store: EmbeddingStore, separator: str = "") -> Trajectory:
    """embed_trajectory attaches the stored vector of every textualized event to the trajectory"""
    traj.attach(np.stack([store.get(text) for text in traj.texts(separator)]))
    return traj

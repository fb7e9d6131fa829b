"""Codebook learning and frame quantization.

A codebook is trained with seeded k-means++ initialization followed by Lloyd
iterations; quantization maps each feature frame to the index of the nearest
centroid (squared Euclidean, ties to the smallest index). Training is fully
deterministic given (frames, config).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import accel
from .corpus import TokenSequence
from .errors import ArgumentError, FormatError, ValidationError

_CODEBOOK_MAGIC = b"CDBK"
_CODEBOOK_VERSION = 1

DEFAULT_VOCAB_SIZE = 1024
DEFAULT_FRAME_CAP = 1_000_000


@dataclass(frozen=True)
class QuantizerConfig:
    vocab_size: int = DEFAULT_VOCAB_SIZE
    max_iters: int = 50
    tolerance: float = 1e-4  # relative distortion change that counts as converged
    seed: int = 0
    collapse_repeats: bool = False

    def validate(self) -> None:
        if self.vocab_size < 2:
            raise ArgumentError("vocab_size must be >= 2")
        if self.max_iters < 1:
            raise ArgumentError("max_iters must be >= 1")
        if self.tolerance < 0:
            raise ArgumentError("tolerance must be >= 0")


@dataclass
class Codebook:
    vocab_size: int
    dim: int
    centroids: np.ndarray  # (vocab_size, dim) float32
    seed: int
    distortion_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.centroids = np.ascontiguousarray(self.centroids, dtype=np.float32)
        if self.centroids.shape != (self.vocab_size, self.dim):
            raise ArgumentError(
                f"centroids shape {self.centroids.shape} != ({self.vocab_size}, {self.dim})"
            )


def _kmeans_pp_init(frames: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = frames.shape[0]
    centroids = np.empty((k, frames.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = frames[first]
    d2 = np.sum((frames - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))  # all remaining mass on duplicates
        centroids[j] = frames[idx]
        d2 = np.minimum(d2, np.sum((frames - centroids[j]) ** 2, axis=1))
    return centroids


def train_codebook(frames: np.ndarray, config: QuantizerConfig) -> Codebook:
    """Learn a codebook over feature frames with seeded k-means.

    Recorded per-iteration distortion (mean squared distance after each
    assignment) is non-increasing; iteration stops on convergence, the
    max_iters cap, or when floating-point noise would break monotonicity.
    """
    config.validate()
    frames = np.ascontiguousarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise ArgumentError("frames must be a 2-D (n, dim) array")
    if not np.all(np.isfinite(frames)):
        raise ValidationError("frames contain NaN or Inf")
    n, dim = frames.shape
    k = config.vocab_size
    if n < k:
        raise ArgumentError(f"need at least vocab_size={k} frames, got {n}")

    rng = np.random.default_rng(config.seed)
    centroids = _kmeans_pp_init(frames, k, rng)

    history: list[float] = []
    for iteration in range(config.max_iters):
        labels, d2 = accel.nearest_centroid(frames, centroids)
        distortion = float(d2.mean())
        if history and distortion > history[-1]:
            break  # numerical plateau; converged
        history.append(distortion)
        if len(history) >= 2:
            prev = history[-2]
            if prev == 0.0 or (prev - distortion) <= config.tolerance * prev:
                break
        if iteration == config.max_iters - 1:
            break  # keep centroids consistent with the last recorded assignment
        sums, counts = accel.accumulate_clusters(frames, labels, k)
        empty = np.flatnonzero(counts == 0)
        nonzero = counts > 0
        centroids[nonzero] = sums[nonzero] / counts[nonzero, None]
        if empty.size:
            # re-seed each empty cluster at the point farthest from its centroid
            d2_work = d2.copy()
            for cluster in empty:
                far = int(np.argmax(d2_work))
                centroids[cluster] = frames[far]
                d2_work[far] = -1.0

    assert history, "at least one assignment pass must run"
    return Codebook(
        vocab_size=k,
        dim=dim,
        centroids=centroids.astype(np.float32),
        seed=config.seed,
        distortion_history=history,
    )


def quantize(
    frames: np.ndarray,
    codebook: Codebook,
    collapse_repeats: bool = False,
    utterance_id: str = "",
) -> TokenSequence:
    """Map frames to nearest-centroid token ids.

    With ``collapse_repeats``, consecutive duplicate tokens merge into one.
    An empty frame matrix yields an empty sequence.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise ArgumentError("frames must be a 2-D (n, dim) array")
    if frames.shape[0] == 0:
        return TokenSequence(utterance_id, np.zeros(0, dtype=np.int32))
    if frames.shape[1] != codebook.dim:
        raise ArgumentError(f"frame dim {frames.shape[1]} != codebook dim {codebook.dim}")
    labels, _ = accel.nearest_centroid(frames, codebook.centroids.astype(np.float64))
    tokens = labels.astype(np.int32)
    if collapse_repeats and tokens.size:
        keep = np.empty(tokens.size, dtype=bool)
        keep[0] = True
        keep[1:] = tokens[1:] != tokens[:-1]
        tokens = tokens[keep]
    return TokenSequence(utterance_id, tokens)


def sample_frames(
    matrices: Iterable[np.ndarray],
    cap: int = DEFAULT_FRAME_CAP,
    seed: int = 0,
) -> np.ndarray:
    """Reservoir-sample up to ``cap`` frames across a stream of frame matrices.

    Single-pass and seeded, so memory stays bounded on large pools and the
    sample is reproducible for a fixed stream order.
    """
    if cap < 1:
        raise ArgumentError("cap must be >= 1")
    rng = np.random.default_rng(seed)
    reservoir: list[np.ndarray] = []
    seen = 0
    for mat in matrices:
        mat = np.asarray(mat, dtype=np.float64)
        for row in mat:
            if seen < cap:
                reservoir.append(row.copy())
            else:
                j = int(rng.integers(seen + 1))
                if j < cap:
                    reservoir[j] = row.copy()
            seen += 1
    if not reservoir:
        return np.zeros((0, 0))
    return np.stack(reservoir)


# ---------------------------------------------------------------------------
# codebook file
# ---------------------------------------------------------------------------


def write_codebook(codebook: Codebook, path: str | Path) -> None:
    """Binary codebook: magic, version u16, vocab u32, dim u32, seed u64, f32 rows."""
    with open(path, "wb") as fh:
        fh.write(_CODEBOOK_MAGIC)
        fh.write(struct.pack("<HIIQ", _CODEBOOK_VERSION, codebook.vocab_size, codebook.dim, codebook.seed))
        fh.write(np.ascontiguousarray(codebook.centroids, dtype="<f4").tobytes())


def read_codebook(path: str | Path) -> Codebook:
    with open(path, "rb") as fh:
        if fh.read(4) != _CODEBOOK_MAGIC:
            raise FormatError(f"{path}: not a codebook file")
        header = fh.read(18)
        if len(header) != 18:
            raise FormatError(f"{path}: truncated codebook header")
        version, vocab_size, dim, seed = struct.unpack("<HIIQ", header)
        if version != _CODEBOOK_VERSION:
            raise FormatError(f"{path}: unsupported codebook version {version}")
        data = fh.read(vocab_size * dim * 4)
        if len(data) != vocab_size * dim * 4:
            raise FormatError(f"{path}: truncated centroid data")
    centroids = np.frombuffer(data, dtype="<f4").reshape(vocab_size, dim)
    return Codebook(vocab_size=vocab_size, dim=dim, centroids=centroids.copy(), seed=seed)

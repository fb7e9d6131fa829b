"""Corpus plumbing: manifests, token files, WAV access, segmentation.

A corpus is a JSONL manifest of utterances plus (depending on the pipeline
stage) WAV audio, feature files, or a binary token file. Token files dominate
I/O for large pools, so they use a compact little-endian container with ids
stored as uint16 whenever the vocabulary allows it.
"""

from __future__ import annotations

import json
import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArgumentError, FormatError, ValidationError

SAMPLE_RATE = 16000
DEFAULT_MAX_SEGMENT_S = 32.0

_TOKEN_MAGIC = b"TKNS"
_TOKEN_VERSION = 1


@dataclass
class Utterance:
    """One corpus item. At least one of audio_path / token_path must be set."""

    id: str
    audio_path: str | None = None
    token_path: str | None = None
    duration_s: float = 0.0
    domain_tag: str | None = None

    def validate(self) -> None:
        if not self.id:
            raise ValidationError("utterance id must be non-empty")
        if self.audio_path is None and self.token_path is None:
            raise ValidationError(f"utterance {self.id!r}: needs audio_path or token_path")
        if not (self.duration_s >= 0.0):
            raise ValidationError(f"utterance {self.id!r}: duration_s must be >= 0")


@dataclass
class TokenSequence:
    """Discrete-token rendering of one utterance."""

    utterance_id: str
    tokens: np.ndarray  # int32 ids in [0, vocab_size)

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int32)

    def __len__(self) -> int:
        return int(self.tokens.shape[0])


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------

_MANIFEST_FIELDS = ("id", "audio_path", "token_path", "duration_s", "domain_tag")
_SELECTION_EXTRAS = ("score", "selected")  # selection manifests read back as corpora


def read_manifest(path: str | Path) -> list[Utterance]:
    """Read a JSONL manifest, preserving file order. Duplicate ids are rejected."""
    utterances: list[Utterance] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"manifest parse error: {exc.msg}", line=lineno) from exc
            if not isinstance(rec, dict) or "id" not in rec:
                raise FormatError("manifest record must be an object with an 'id'", line=lineno)
            unknown = set(rec) - set(_MANIFEST_FIELDS) - set(_SELECTION_EXTRAS)
            if unknown:
                raise FormatError(f"unknown manifest fields {sorted(unknown)}", line=lineno)
            utt = Utterance(
                id=str(rec["id"]),
                audio_path=rec.get("audio_path"),
                token_path=rec.get("token_path"),
                duration_s=float(rec.get("duration_s", 0.0)),
                domain_tag=rec.get("domain_tag"),
            )
            try:
                utt.validate()
            except ValidationError as exc:
                raise FormatError(str(exc), line=lineno) from exc
            if utt.id in seen:
                raise ValidationError(f"duplicate utterance id {utt.id!r} (line {lineno})")
            seen.add(utt.id)
            utterances.append(utt)
    return utterances


def write_manifest(utterances: list[Utterance], path: str | Path) -> None:
    seen: set[str] = set()
    with open(path, "w", encoding="utf-8") as fh:
        for utt in utterances:
            utt.validate()
            if utt.id in seen:
                raise ValidationError(f"duplicate utterance id {utt.id!r}")
            seen.add(utt.id)
            rec: dict = {"id": utt.id}
            if utt.audio_path is not None:
                rec["audio_path"] = utt.audio_path
            if utt.token_path is not None:
                rec["token_path"] = utt.token_path
            rec["duration_s"] = utt.duration_s
            if utt.domain_tag is not None:
                rec["domain_tag"] = utt.domain_tag
            fh.write(json.dumps(rec) + "\n")


# ---------------------------------------------------------------------------
# token files
# ---------------------------------------------------------------------------


def write_tokens(sequences: list[TokenSequence], vocab_size: int, path: str | Path) -> None:
    """Write sequences to a binary token file.

    Layout (little-endian): magic, version u16, vocab_size u32, count u64,
    then per sequence: id_len u16 + utf-8 id, n_tokens u32, ids as u16 when
    vocab_size <= 65536 else u32.
    """
    if vocab_size < 1:
        raise ArgumentError("vocab_size must be positive")
    wide = vocab_size > 65536
    dtype = "<u4" if wide else "<u2"
    with open(path, "wb") as fh:
        fh.write(_TOKEN_MAGIC)
        fh.write(struct.pack("<HIQ", _TOKEN_VERSION, vocab_size, len(sequences)))
        for seq in sequences:
            toks = np.asarray(seq.tokens)
            if toks.size and (toks.min() < 0 or toks.max() >= vocab_size):
                raise ValidationError(
                    f"sequence {seq.utterance_id!r}: token id outside [0, {vocab_size})"
                )
            ident = seq.utterance_id.encode("utf-8")
            fh.write(struct.pack("<H", len(ident)))
            fh.write(ident)
            fh.write(struct.pack("<I", toks.size))
            fh.write(toks.astype(dtype).tobytes())


def read_tokens(path: str | Path) -> tuple[list[TokenSequence], int]:
    """Read a token file back. Returns (sequences, vocab_size)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _TOKEN_MAGIC:
            raise FormatError(f"not a token file (bad magic {magic!r})")
        header = fh.read(14)
        if len(header) != 14:
            raise FormatError("truncated token file header")
        version, vocab_size, count = struct.unpack("<HIQ", header)
        if version != _TOKEN_VERSION:
            raise FormatError(f"unsupported token file version {version}")
        wide = vocab_size > 65536
        dtype = np.dtype("<u4") if wide else np.dtype("<u2")
        sequences: list[TokenSequence] = []
        for i in range(count):
            raw = fh.read(2)
            if len(raw) != 2:
                raise FormatError(f"truncated token file at sequence {i}")
            (id_len,) = struct.unpack("<H", raw)
            ident = fh.read(id_len).decode("utf-8")
            (n_tokens,) = struct.unpack("<I", fh.read(4))
            data = fh.read(n_tokens * dtype.itemsize)
            if len(data) != n_tokens * dtype.itemsize:
                raise FormatError(f"truncated token data for sequence {ident!r}")
            toks = np.frombuffer(data, dtype=dtype).astype(np.int32)
            if toks.size and toks.max() >= vocab_size:
                raise FormatError(
                    f"sequence {ident!r}: token id {int(toks.max())} >= header vocab_size {vocab_size}"
                )
            sequences.append(TokenSequence(ident, toks))
        if fh.read(1):
            raise FormatError("trailing bytes after last sequence")
    return sequences, vocab_size


# ---------------------------------------------------------------------------
# WAV access (16 kHz, 16-bit mono PCM only)
# ---------------------------------------------------------------------------


def read_wav(path: str | Path) -> np.ndarray:
    """Read a 16 kHz 16-bit mono PCM WAV into float64 samples in [-1, 1)."""
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getnchannels() != 1:
                raise FormatError(f"{path}: expected mono audio, got {wf.getnchannels()} channels")
            if wf.getsampwidth() != 2:
                raise FormatError(f"{path}: expected 16-bit PCM, got {8 * wf.getsampwidth()}-bit")
            if wf.getframerate() != SAMPLE_RATE:
                raise FormatError(f"{path}: expected {SAMPLE_RATE} Hz, got {wf.getframerate()} Hz")
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise FormatError(f"{path}: not a readable WAV file ({exc})") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64)
    return samples / 32768.0


def write_wav(samples: np.ndarray, path: str | Path) -> None:
    """Write float samples in [-1, 1) as 16 kHz 16-bit mono PCM."""
    pcm = np.clip(np.asarray(samples, dtype=np.float64) * 32768.0, -32768, 32767)
    pcm = pcm.astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(SAMPLE_RATE)
        wf.writeframes(pcm.tobytes())


# ---------------------------------------------------------------------------
# segmentation
# ---------------------------------------------------------------------------


def split_samples(samples: np.ndarray, max_segment_s: float, sample_rate: int = SAMPLE_RATE) -> list[np.ndarray]:
    """Chunk a sample vector into consecutive pieces of at most max_segment_s.

    The concatenation of the output equals the input; the boundary length is
    inclusive (a 32 s signal at a 32 s limit stays one segment).
    """
    if max_segment_s <= 0:
        raise ArgumentError("max_segment_s must be > 0")
    limit = int(round(max_segment_s * sample_rate))
    if samples.shape[0] <= limit:
        return [samples]
    return [samples[i : i + limit] for i in range(0, samples.shape[0], limit)]


def energy_regions(
    samples: np.ndarray,
    threshold: float,
    frame_samples: int = 400,
    hop_samples: int = 160,
) -> list[tuple[int, int]]:
    """Contiguous sample regions whose short-time RMS energy exceeds threshold.

    Minimal energy gate standing in for a production voice-activity detector;
    adjacent active frames merge into one region.
    """
    n = samples.shape[0]
    if n < frame_samples:
        rms = float(np.sqrt(np.mean(samples**2))) if n else 0.0
        return [(0, n)] if rms >= threshold else []
    regions: list[tuple[int, int]] = []
    start = None
    for lo in range(0, n - frame_samples + 1, hop_samples):
        frame = samples[lo : lo + frame_samples]
        active = float(np.sqrt(np.mean(frame**2))) >= threshold
        if active and start is None:
            start = lo
        elif not active and start is not None:
            regions.append((start, lo + frame_samples - hop_samples))
            start = None
    if start is not None:
        regions.append((start, n))
    return regions


def segment_audio(
    utterance: Utterance,
    max_segment_s: float,
    out_dir: str | Path,
    vad_threshold: float | None = None,
) -> list[Utterance]:
    """Split an utterance's audio into bounded-length segment WAV files.

    Default behavior is plain fixed-length chunking, which preserves every
    sample: the concatenation of the written segments equals the input. With
    ``vad_threshold`` set, sub-threshold audio between energy regions is
    dropped before chunking. Each segment is written as ``<id>_NNNN.wav``
    under ``out_dir`` and the returned utterances point at those files.
    """
    if utterance.audio_path is None:
        raise ArgumentError(f"utterance {utterance.id!r} has no audio_path")
    samples = read_wav(utterance.audio_path)
    if vad_threshold is not None:
        pieces: list[np.ndarray] = []
        for lo, hi in energy_regions(samples, vad_threshold):
            pieces.extend(split_samples(samples[lo:hi], max_segment_s))
    else:
        pieces = split_samples(samples, max_segment_s)

    out: list[Utterance] = []
    for i, piece in enumerate(pieces):
        seg_id = f"{utterance.id}_{i:04d}"
        seg_path = Path(out_dir) / f"{seg_id}.wav"
        write_wav(piece, seg_path)
        out.append(
            Utterance(
                seg_id,
                audio_path=str(seg_path),
                duration_s=piece.shape[0] / SAMPLE_RATE,
                domain_tag=utterance.domain_tag,
            )
        )
    return out

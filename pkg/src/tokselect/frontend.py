"""Log-mel filterbank frontend: 16 kHz PCM in, T x n_mels log-energy frames out.

Defaults follow common ASR practice: 25 ms periodic-Hann windows every 10 ms,
0.97 pre-emphasis, 512-point FFT, 80 triangular mel filters spanning
125-7600 Hz, natural log with a 1e-10 energy floor. Everything is a pure
function of (samples, config), so outputs are deterministic byte-for-byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import accel
from .errors import ArgumentError, FormatError

_FEAT_MAGIC = b"FEAT"
_FEAT_VERSION = 1


@dataclass(frozen=True)
class FrontendConfig:
    sample_rate: int = 16000
    n_mels: int = 80
    window_s: float = 0.025
    shift_s: float = 0.010
    n_fft: int = 512
    fmin_hz: float = 125.0
    fmax_hz: float = 7600.0
    preemphasis: float = 0.97
    energy_floor: float = 1e-10
    per_utt_norm: bool = False

    @property
    def window_samples(self) -> int:
        return int(round(self.window_s * self.sample_rate))

    @property
    def shift_samples(self) -> int:
        return int(round(self.shift_s * self.sample_rate))

    def validate(self) -> None:
        if self.sample_rate != 16000:
            raise ArgumentError("only 16 kHz input is supported")
        if self.n_mels < 1:
            raise ArgumentError("n_mels must be >= 1")
        if self.n_fft < self.window_samples:
            raise ArgumentError("n_fft must cover the analysis window")
        if not 0.0 < self.fmin_hz < self.fmax_hz <= self.sample_rate / 2:
            raise ArgumentError("filter range must satisfy 0 < fmin < fmax <= Nyquist")
        if self.energy_floor <= 0.0:
            raise ArgumentError("energy_floor must be > 0")


@dataclass
class FeatureFrameMatrix:
    utterance_id: str
    frames: np.ndarray  # (T, n_mels) float64
    frame_shift_s: float = 0.010
    frame_length_s: float = 0.025


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config: FrontendConfig) -> np.ndarray:
    """Triangular mel filters as an (n_mels, n_fft//2 + 1) weight matrix."""
    n_bins = config.n_fft // 2 + 1
    bin_hz = np.arange(n_bins) * (config.sample_rate / config.n_fft)
    edges_mel = np.linspace(hz_to_mel(config.fmin_hz), hz_to_mel(config.fmax_hz), config.n_mels + 2)
    edges_hz = mel_to_hz(edges_mel)
    lower, center, upper = edges_hz[:-2], edges_hz[1:-1], edges_hz[2:]
    up = (bin_hz[None, :] - lower[:, None]) / (center - lower)[:, None]
    down = (upper[:, None] - bin_hz[None, :]) / (upper - center)[:, None]
    return np.maximum(0.0, np.minimum(up, down))


def mel_filter_centers(config: FrontendConfig) -> np.ndarray:
    """Center frequency (Hz) of each triangular filter."""
    edges_mel = np.linspace(hz_to_mel(config.fmin_hz), hz_to_mel(config.fmax_hz), config.n_mels + 2)
    return mel_to_hz(edges_mel)[1:-1]


def frame_count(num_samples: int, config: FrontendConfig) -> int:
    if num_samples < config.window_samples:
        return 0
    return (num_samples - config.window_samples) // config.shift_samples + 1


def fft(signal: np.ndarray, n: int) -> np.ndarray:
    """Radix-2 FFT of a zero-padded signal; ``n`` must be a power of two."""
    return accel.fft(signal, n)


def logmel(samples: np.ndarray, config: FrontendConfig | None = None, utterance_id: str = "") -> FeatureFrameMatrix:
    """Log-mel filterbank features for a 16 kHz sample vector.

    Returns an empty (0, n_mels) matrix when the input is shorter than one
    analysis window. All outputs are finite: filterbank energies are floored
    at ``config.energy_floor`` before the natural log.
    """
    config = config or FrontendConfig()
    config.validate()
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise ArgumentError("logmel expects a 1-D sample vector")
    if not np.all(np.isfinite(samples)):
        raise ArgumentError("samples contain NaN or Inf")

    t = frame_count(samples.shape[0], config)
    if t == 0:
        return FeatureFrameMatrix(utterance_id, np.zeros((0, config.n_mels)), config.shift_s, config.window_s)

    if config.preemphasis:
        emphasized = np.empty_like(samples)
        emphasized[0] = samples[0]
        emphasized[1:] = samples[1:] - config.preemphasis * samples[:-1]
    else:
        emphasized = samples

    win = config.window_samples
    hop = config.shift_samples
    idx = np.arange(win)[None, :] + hop * np.arange(t)[:, None]
    frames = emphasized[idx]
    # periodic Hann
    hann = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(win) / win)
    frames = frames * hann[None, :]

    spectrum = accel.fft_batch(frames, config.n_fft)[:, : config.n_fft // 2 + 1]
    power = spectrum.real**2 + spectrum.imag**2
    energies = power @ mel_filterbank(config).T
    feats = np.log(np.maximum(energies, config.energy_floor))
    if config.per_utt_norm:
        feats = feats - feats.mean(axis=0, keepdims=True)
        std = feats.std(axis=0, keepdims=True)
        feats = feats / np.maximum(std, 1e-8)
    return FeatureFrameMatrix(utterance_id, feats, config.shift_s, config.window_s)


# ---------------------------------------------------------------------------
# feature file dump (pipeline checkpointing)
# ---------------------------------------------------------------------------


def write_features(mat: FeatureFrameMatrix, path: str | Path) -> None:
    """Dump features as float32: magic, version u16, id, T u32, dim u32, data."""
    frames32 = np.ascontiguousarray(mat.frames, dtype="<f4")
    ident = mat.utterance_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_FEAT_MAGIC)
        fh.write(struct.pack("<HH", _FEAT_VERSION, len(ident)))
        fh.write(ident)
        fh.write(struct.pack("<II", frames32.shape[0], frames32.shape[1]))
        fh.write(frames32.tobytes())


def read_features(path: str | Path) -> FeatureFrameMatrix:
    with open(path, "rb") as fh:
        if fh.read(4) != _FEAT_MAGIC:
            raise FormatError(f"{path}: not a feature file")
        version, id_len = struct.unpack("<HH", fh.read(4))
        if version != _FEAT_VERSION:
            raise FormatError(f"{path}: unsupported feature file version {version}")
        ident = fh.read(id_len).decode("utf-8")
        t, dim = struct.unpack("<II", fh.read(8))
        data = fh.read(t * dim * 4)
        if len(data) != t * dim * 4:
            raise FormatError(f"{path}: truncated feature data")
    frames = np.frombuffer(data, dtype="<f4").reshape(t, dim).astype(np.float64)
    return FeatureFrameMatrix(ident, frames)

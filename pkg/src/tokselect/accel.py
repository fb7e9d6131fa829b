"""Hot numeric kernels: numba-compiled loops with a pure-numpy fallback.

The backend is chosen once at import from the TOKSELECT_NO_NUMBA environment
variable (any non-empty value forces numpy) or by numba being unavailable.
Tests and benchmarks can switch explicitly with :func:`set_backend`. Both
backends implement the same arithmetic; per-backend output is deterministic
(no fastmath, no parallel reductions).

Kernels:
  * nearest_centroid  -- squared-Euclidean argmin assignment (k-means, quantize)
  * accumulate_clusters -- per-cluster sums/counts for the Lloyd update
  * fft / fft_batch   -- iterative radix-2 Cooley-Tukey on power-of-two sizes
"""

from __future__ import annotations

import functools
import os

import numpy as np

from .errors import ArgumentError

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    njit = None
    HAVE_NUMBA = False

_ENV_FLAG = "TOKSELECT_NO_NUMBA"
_backend = "numpy" if (not HAVE_NUMBA or os.environ.get(_ENV_FLAG)) else "numba"


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numba", "numpy"):
        raise ArgumentError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise ArgumentError("numba backend requested but numba is not installed")
    _backend = name


# ---------------------------------------------------------------------------
# nearest-centroid assignment
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _nearest_centroid_nb(frames, centroids):
        n, d = frames.shape
        k = centroids.shape[0]
        labels = np.empty(n, dtype=np.int64)
        dists = np.empty(n, dtype=np.float64)
        for i in range(n):
            best = np.inf
            best_j = 0
            for j in range(k):
                s = 0.0
                t = 0
                # prune in blocks of 8 once the partial sum exceeds the best
                while t + 8 <= d:
                    for u in range(t, t + 8):
                        diff = frames[i, u] - centroids[j, u]
                        s += diff * diff
                    t += 8
                    if s >= best:
                        break
                if s < best:
                    while t < d:
                        diff = frames[i, t] - centroids[j, t]
                        s += diff * diff
                        t += 1
                    if s < best:
                        best = s
                        best_j = j
            labels[i] = best_j
            dists[i] = best
        return labels, dists

    @njit(cache=True)
    def _accumulate_clusters_nb(frames, labels, k):
        n, d = frames.shape
        sums = np.zeros((k, d), dtype=np.float64)
        counts = np.zeros(k, dtype=np.int64)
        for i in range(n):
            j = labels[i]
            counts[j] += 1
            for t in range(d):
                sums[j, t] += frames[i, t]
        return sums, counts

    @njit(cache=True)
    def _fft_batch_nb(buf, twiddles):
        # buf: (rows, n) complex128, modified in place; n is a power of two.
        rows, n = buf.shape
        for r in range(rows):
            # bit-reversal permutation
            j = 0
            for i in range(1, n):
                bit = n >> 1
                while j & bit:
                    j ^= bit
                    bit >>= 1
                j |= bit
                if i < j:
                    tmp = buf[r, i]
                    buf[r, i] = buf[r, j]
                    buf[r, j] = tmp
            length = 2
            while length <= n:
                half = length >> 1
                step = n // length
                for start in range(0, n, length):
                    for kk in range(half):
                        w = twiddles[kk * step]
                        u = buf[r, start + kk]
                        v = buf[r, start + kk + half] * w
                        buf[r, start + kk] = u + v
                        buf[r, start + kk + half] = u - v
                length <<= 1
        return buf


def _nearest_centroid_np(frames, centroids, chunk=4096):
    n = frames.shape[0]
    c_sq = np.einsum("ij,ij->i", centroids, centroids)
    labels = np.empty(n, dtype=np.int64)
    dists = np.empty(n, dtype=np.float64)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        block = frames[lo:hi]
        # argmin via ||x||^2 - 2 x.c + ||c||^2 (BLAS); then recompute the
        # winning distance directly so exact matches report exactly zero
        d2 = np.einsum("ij,ij->i", block, block)[:, None] - 2.0 * (block @ centroids.T) + c_sq[None, :]
        won = np.argmin(d2, axis=1)
        labels[lo:hi] = won
        diff = block - centroids[won]
        dists[lo:hi] = np.einsum("ij,ij->i", diff, diff)
    return labels, dists


def _accumulate_clusters_np(frames, labels, k):
    d = frames.shape[1]
    sums = np.zeros((k, d), dtype=np.float64)
    np.add.at(sums, labels, frames)
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    return sums, counts


def _bit_reversal(n: int) -> np.ndarray:
    idx = np.zeros(n, dtype=np.int64)
    j = 0
    for i in range(1, n):
        bit = n >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j |= bit
        idx[i] = j
    return idx


@functools.lru_cache(maxsize=32)
def _fft_tables(n: int):
    # Full twiddle table exp(-2i pi k / n), k = 0..n/2-1, shared by both backends.
    k = np.arange(n // 2)
    twiddles = np.exp(-2j * np.pi * k / n)
    return _bit_reversal(n), np.ascontiguousarray(twiddles)


def _fft_batch_np(buf, twiddles):
    rows, n = buf.shape
    rev, _ = _fft_tables(n)
    buf = buf[:, rev]
    length = 2
    while length <= n:
        half = length >> 1
        step = n // length
        w = twiddles[: half * step : step]
        work = buf.reshape(rows, n // length, length)
        u = work[:, :, :half]
        v = work[:, :, half:] * w
        buf = np.concatenate((u + v, u - v), axis=2).reshape(rows, n)
        length <<= 1
    return buf


def nearest_centroid(frames: np.ndarray, centroids: np.ndarray):
    """Assign every row of ``frames`` to its nearest centroid.

    Returns (labels, squared distances). Ties break toward the smallest
    centroid index in both backends.
    """
    frames = np.ascontiguousarray(frames, dtype=np.float64)
    centroids = np.ascontiguousarray(centroids, dtype=np.float64)
    if frames.shape[1] != centroids.shape[1]:
        raise ArgumentError(
            f"frame dim {frames.shape[1]} != centroid dim {centroids.shape[1]}"
        )
    if _backend == "numba":
        return _nearest_centroid_nb(frames, centroids)
    return _nearest_centroid_np(frames, centroids)


def accumulate_clusters(frames: np.ndarray, labels: np.ndarray, k: int):
    """Per-cluster coordinate sums and member counts for a Lloyd update."""
    frames = np.ascontiguousarray(frames, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if _backend == "numba":
        return _accumulate_clusters_nb(frames, labels, k)
    return _accumulate_clusters_np(frames, labels, k)


def _check_fft_size(n: int) -> None:
    if n < 1 or (n & (n - 1)) != 0:
        raise ArgumentError(f"FFT size must be a power of two, got {n}")


def fft_batch(frames: np.ndarray, n: int) -> np.ndarray:
    """Radix-2 FFT of every row, zero-padded to length ``n`` (power of two)."""
    _check_fft_size(n)
    if frames.ndim != 2:
        raise ArgumentError("fft_batch expects a 2-D array of frames")
    if frames.shape[1] > n:
        raise ArgumentError(f"FFT size {n} is smaller than frame length {frames.shape[1]}")
    buf = np.zeros((frames.shape[0], n), dtype=np.complex128)
    buf[:, : frames.shape[1]] = frames
    if n == 1:
        return buf
    _, twiddles = _fft_tables(n)
    if _backend == "numba":
        return _fft_batch_nb(buf, twiddles)
    return _fft_batch_np(buf, twiddles)


def fft(signal: np.ndarray, n: int) -> np.ndarray:
    """Discrete Fourier transform of a single real or complex signal.

    ``n`` must be a power of two and at least ``len(signal)``; the signal is
    zero-padded to ``n``.
    """
    signal = np.asarray(signal)
    if signal.ndim != 1:
        raise ArgumentError("fft expects a 1-D signal")
    return fft_batch(signal[None, :], n)[0]

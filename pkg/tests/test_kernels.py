"""The numba and pure-numpy kernel paths must agree."""

import numpy as np
import pytest

from tokselect import accel

BACKENDS = ["numpy"] + (["numba"] if accel.HAVE_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    previous = accel.get_backend()
    accel.set_backend(request.param)
    yield request.param
    accel.set_backend(previous)


def _both(fn):
    """Run fn under each backend, return list of results."""
    previous = accel.get_backend()
    out = []
    try:
        for name in BACKENDS:
            accel.set_backend(name)
            out.append(fn())
    finally:
        accel.set_backend(previous)
    return out


class TestNearestCentroid:
    def test_backends_agree(self):
        rng = np.random.default_rng(0)
        frames = rng.normal(size=(500, 12))
        cents = rng.normal(size=(32, 12))
        results = _both(lambda: accel.nearest_centroid(frames, cents))
        for labels, dists in results[1:]:
            np.testing.assert_array_equal(labels, results[0][0])
            np.testing.assert_allclose(dists, results[0][1], rtol=1e-9, atol=1e-12)

    def test_exact_tie_breaks_to_smaller_index(self, backend):
        cents = np.array([[0.0, 0.0], [4.0, 0.0], [2.0, 2.0]])
        frame = np.array([[2.0, 0.0]])  # equidistant to centroids 0 and 1
        labels, dists = accel.nearest_centroid(frame, cents)
        assert labels[0] == 0
        assert dists[0] == 4.0

    def test_zero_distance_match(self, backend):
        cents = np.arange(12.0).reshape(4, 3)
        labels, dists = accel.nearest_centroid(cents[2:3], cents)
        assert labels[0] == 2
        assert dists[0] == 0.0


class TestAccumulate:
    def test_backends_agree(self):
        rng = np.random.default_rng(1)
        frames = rng.normal(size=(300, 7))
        labels = rng.integers(0, 9, size=300)
        results = _both(lambda: accel.accumulate_clusters(frames, labels, 9))
        for sums, counts in results[1:]:
            np.testing.assert_allclose(sums, results[0][0], rtol=1e-12)
            np.testing.assert_array_equal(counts, results[0][1])

    def test_counts_and_sums(self, backend):
        frames = np.array([[1.0], [2.0], [3.0]])
        labels = np.array([0, 0, 2])
        sums, counts = accel.accumulate_clusters(frames, labels, 3)
        np.testing.assert_array_equal(counts, [2, 0, 1])
        np.testing.assert_array_equal(sums[:, 0], [3.0, 0.0, 3.0])


class TestFFTKernels:
    def test_backends_agree(self):
        rng = np.random.default_rng(2)
        frames = rng.normal(size=(20, 400))
        results = _both(lambda: accel.fft_batch(frames, 512))
        for spec in results[1:]:
            np.testing.assert_allclose(spec, results[0], rtol=1e-9, atol=1e-12)

    def test_single_matches_numpy_reference(self, backend):
        rng = np.random.default_rng(3)
        x = rng.normal(size=256)
        got = accel.fft(x, 256)
        np.testing.assert_allclose(got, np.fft.fft(x, 256), rtol=1e-9, atol=1e-10)

    def test_trivial_size_one(self, backend):
        out = accel.fft(np.array([3.5]), 1)
        np.testing.assert_array_equal(out, [3.5 + 0.0j])

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tsgc.features import (
    MedianScalar,
    Multiscale,
    TimeSeries,
    compute_features,
    median_scalar_features,
    multiscale_features,
    parse_mode,
    smooth_volume,
    time_series_features,
)
from tsgc.volume_io import TimeSeriesVolume

frames = arrays(
    np.float32,
    st.tuples(st.integers(1, 4), st.integers(1, 9), st.integers(1, 9)),
    elements=st.integers(-1000, 3000).map(float),
)


def vol_of(img):
    return TimeSeriesVolume(np.asarray(img, dtype=np.float32)[None])


def test_time_series_direct_gather():
    data = np.zeros((3, 2, 2), np.float32)
    data[:, 0, 0] = [10, 20, 30]
    f = time_series_features(TimeSeriesVolume(data))
    assert f.shape == (2, 2, 3)
    assert f[0, 0].tolist() == [10, 20, 30]


def test_time_series_constant():
    f = time_series_features(TimeSeriesVolume(np.full((4, 3, 2), 7.5)))
    assert (f == 7.5).all()


def test_time_series_matches_reshape_oracle(rng):
    data = rng.normal(size=(5, 6, 7)).astype(np.float32)
    f = time_series_features(TimeSeriesVolume(data))
    # build the (H*W) x T matrix pixel by pixel
    t, h, w = data.shape
    matrix = np.empty((h * w, t))
    for r in range(h):
        for c in range(w):
            for k in range(t):
                matrix[r * w + c, k] = data[k, r, c]
    assert np.array_equal(f.reshape(h * w, t), matrix)


@given(frames)
def test_time_series_is_a_permutation(data):
    f = time_series_features(TimeSeriesVolume(data))
    assert sorted(f.ravel().tolist()) == sorted(data.astype(np.float64).ravel().tolist())


def multiscale_oracle(img, r, c, k):
    off = (k - 1) // 2
    vals = [
        img[i, j]
        for i in range(r - off, r - off + k)
        for j in range(c - off, c - off + k)
        if 0 <= i < img.shape[0] and 0 <= j < img.shape[1]
    ]
    return sum(vals) / len(vals)


def test_multiscale_constant():
    f = multiscale_features(vol_of(np.full((5, 6), 42.0)))
    assert f.shape == (5, 6, 10)
    assert np.allclose(f, 42.0)


def test_multiscale_first_entry_is_pixel(rng):
    img = rng.integers(-100, 100, size=(8, 9)).astype(float)
    assert np.array_equal(multiscale_features(vol_of(img))[:, :, 0], img)


def test_multiscale_2x2_anchor():
    f = multiscale_features(vol_of([[1, 2], [3, 4]]))
    assert f[0, 0, 1] == 2.5
    # window for k=2 at (1,1) is clipped to the single pixel 4
    assert f[1, 1, 1] == 4.0


def test_multiscale_matches_oracle(rng):
    img = rng.normal(0, 50, size=(13, 11))
    f = multiscale_features(vol_of(img))
    img32 = img.astype(np.float32).astype(float)
    for r in range(13):
        for c in range(11):
            for k in range(1, 11):
                assert f[r, c, k - 1] == pytest.approx(multiscale_oracle(img32, r, c, k), abs=1e-9)


def test_multiscale_uses_last_frame():
    data = np.stack([np.zeros((3, 3)), np.ones((3, 3))])
    assert np.allclose(multiscale_features(TimeSeriesVolume(data)), 1.0)


@given(frames)
def test_multiscale_within_image_bounds(data):
    img = data[-1]
    f = multiscale_features(TimeSeriesVolume(data), 6)
    assert f.min() >= img.min() and f.max() <= img.max()


def test_median_center_of_1_to_9():
    f = median_scalar_features(vol_of(np.arange(1, 10).reshape(3, 3)))
    assert f.shape == (3, 3, 1)
    assert f[1, 1, 0] == 5


def test_median_constant():
    assert np.array_equal(median_scalar_features(vol_of(np.full((4, 4), 3.0)))[..., 0], np.full((4, 4), 3.0))


def test_median_replicate_corner():
    f = median_scalar_features(vol_of([[1, 2], [3, 4]]))
    assert np.median([1, 1, 2, 1, 1, 2, 3, 3, 4]) == 2
    assert f[0, 0, 0] == 2


def test_smooth_identity_and_constant():
    vol = TimeSeriesVolume(np.arange(18, dtype=float).reshape(2, 3, 3))
    assert smooth_volume(vol, 1) == vol
    const = TimeSeriesVolume(np.full((2, 5, 4), -12.0))
    for k in (3, 5, 7):
        assert smooth_volume(const, k) == const


def test_smooth_box_center():
    vol = TimeSeriesVolume(np.arange(1, 10, dtype=float).reshape(1, 3, 3))
    assert smooth_volume(vol, 3).data[0, 1, 1] == 5.0


@pytest.mark.parametrize("k", [0, 2, 4, -1])
def test_smooth_rejects_even(k):
    with pytest.raises(ValueError):
        smooth_volume(TimeSeriesVolume(np.zeros((1, 3, 3))), k)


@settings(max_examples=40)
@given(frames, st.integers(-2, 2), st.integers(-2, 2))
def test_translation_equivariance(data, dr, dc):
    """Shifting the image shifts feature vectors away from borders."""
    t, h, w = data.shape
    pad = 12
    big = np.zeros((t, h + 2 * pad, w + 2 * pad), np.float32)
    big[:, pad:pad + h, pad:pad + w] = data
    shifted = np.roll(big, (dr, dc), axis=(1, 2))
    for mode in (TimeSeries(), Multiscale(), MedianScalar()):
        fa = compute_features(TimeSeriesVolume(big), mode)
        fb = compute_features(TimeSeriesVolume(shifted), mode)
        inner = slice(6, -6)
        a = fa[inner, inner]
        b = np.roll(fb, (-dr, -dc), axis=(0, 1))[inner, inner]
        assert np.allclose(a, b, atol=1e-9)


def test_parse_mode():
    assert parse_mode("timeseries") == TimeSeries()
    assert parse_mode("multiscale") == Multiscale(10)
    assert parse_mode("median") == MedianScalar()
    with pytest.raises(ValueError):
        parse_mode("median3x3")
    with pytest.raises(ValueError):
        Multiscale(0)


def test_feature_dims():
    vol = TimeSeriesVolume(np.zeros((7, 4, 5)))
    assert compute_features(vol, TimeSeries()).shape == (4, 5, 7)
    assert compute_features(vol, Multiscale()).shape == (4, 5, 10)
    assert compute_features(vol, MedianScalar()).shape == (4, 5, 1)

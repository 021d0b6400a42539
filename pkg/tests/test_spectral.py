import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mass_staging.spectral import (
    FLOOR_DB,
    SpectralEpochs,
    WrongLength,
    batch_psd,
    dump_features,
    epoch_psd,
    hamming_window,
    load_features,
)

import oracles


def test_hamming_endpoints_and_symmetry():
    w = hamming_window(100)
    assert w[0] == pytest.approx(0.08, abs=1e-15)
    np.testing.assert_array_equal(w, w[::-1])
    np.testing.assert_allclose(hamming_window(3), [0.08, 1.0, 0.08], atol=1e-15)
    with pytest.raises(ValueError):
        hamming_window(1)


def test_zero_epoch_is_floor():
    psd = epoch_psd(np.zeros(3000))
    assert psd.shape == (30, 128)
    assert FLOOR_DB == -160.0
    assert np.all(psd == -160.0)


def test_tone_peak_bin_32():
    t = np.arange(3000) / 100
    psd = epoch_psd(np.sin(2 * np.pi * 12.5 * t))
    assert np.all(psd.argmax(axis=1) == 32)


def test_scaling_adds_20db():
    x = np.random.default_rng(0).normal(size=3000)
    base = epoch_psd(x)
    scaled = epoch_psd(10 * x)
    mag = 10 ** (base / 20) - 1e-8
    ok = mag >= 1e-5
    assert ok.mean() > 0.99
    np.testing.assert_allclose(scaled[ok] - base[ok], 20.0, atol=1e-3)


def test_wrong_length():
    with pytest.raises(WrongLength):
        epoch_psd(np.zeros(2999))


def test_naive_dft_oracle():
    rng = np.random.default_rng(42)
    for _ in range(3):
        seg = rng.normal(scale=50, size=100)
        epoch = np.zeros(3000)
        epoch[1700:1800] = seg
        got = epoch_psd(epoch)[17]
        np.testing.assert_allclose(got, oracles.dft_db(list(seg)), atol=1e-6)


@settings(max_examples=25, deadline=None)
@given(j=st.integers(0, 29), k=st.integers(0, 2999), delta=st.floats(-1e3, 1e3).filter(lambda v: v != 0))
def test_patch_locality(j, k, delta):
    x = np.random.default_rng(j).normal(size=3000)
    y = x.copy()
    y[k] += delta
    a, b = epoch_psd(x), epoch_psd(y)
    if k // 100 != j:
        np.testing.assert_array_equal(a[j], b[j])


@settings(max_examples=20, deadline=None)
@given(arrays(np.float64, 3000, elements=st.floats(-1e4, 1e4)))
def test_output_shape_and_floor(x):
    psd = epoch_psd(x)
    assert psd.shape == (30, 128)
    assert np.all(np.isfinite(psd))
    assert psd.min() >= -160.0


def test_batch_matches_single():
    x = np.random.default_rng(1).normal(size=(3, 3000))
    np.testing.assert_array_equal(batch_psd(x)[1], epoch_psd(x[1]))


@pytest.mark.parametrize("dtype,code", [(np.float64, 2), (np.float32, 1)])
def test_feature_cache_roundtrip(tmp_path, dtype, code):
    psd = np.random.default_rng(0).normal(size=(4, 30, 128)) * 20
    feats = SpectralEpochs(psd, [0, 1, 4, 2], "rec")
    path = tmp_path / "rec.mpsd"
    dump_features(feats, path, dtype=dtype)
    raw = path.read_bytes()
    assert raw[:4] == b"MPSD"
    assert int.from_bytes(raw[4:8], "little") == 4
    assert int.from_bytes(raw[8:10], "little") == 30
    assert int.from_bytes(raw[10:12], "little") == 128
    assert raw[12] == code
    assert len(raw) == 16 + psd.size * np.dtype(dtype).itemsize + 4
    back = load_features(path)
    np.testing.assert_array_equal(back.psd, psd.astype(dtype).astype(np.float64))
    np.testing.assert_array_equal(back.labels, [0, 1, 4, 2])


def test_feature_cache_rejects_garbage(tmp_path):
    p = tmp_path / "bad"
    p.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(ValueError):
        load_features(p)

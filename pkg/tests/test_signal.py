import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hvabss.signal import Audio, StftConfig, analysis_window, istft, spectrogram_energy, stft

CONFIGS = [
    StftConfig(64),
    StftConfig(64, hop=16),
    StftConfig(2048),
    StftConfig(4096),
    StftConfig(8192, hop=2048),
    StftConfig(64, fft_length=128),
]


def _rel_err(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.mark.parametrize("cfg", CONFIGS, ids=lambda c: f"{c.window_length}/{c.hop}/{c.fft_length}")
def test_round_trip_white_noise(cfg):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 3 * cfg.window_length + 17))
    y = istft(stft(x, cfg), cfg, length=x.shape[1])
    assert _rel_err(y, x) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(length=st.integers(64, 700), quarter=st.booleans(), seed=st.integers(0, 2**31))
def test_round_trip_any_length(length, quarter, seed):
    cfg = StftConfig(64, hop=16 if quarter else 32)
    x = np.random.default_rng(seed).standard_normal(length)
    y = istft(stft(x, cfg), cfg, length=length)[0]
    assert _rel_err(y, x) <= 1e-10


def test_zero_signal_and_zero_spectrogram():
    cfg = StftConfig(64)
    spec = stft(np.zeros((1, 300)), cfg)
    assert spec.shape == (1, cfg.n_frames(300), 33)
    assert not np.any(spec)
    assert not np.any(istft(spec, cfg, 300))


def test_frame_count_and_padding():
    cfg = StftConfig(64)
    assert cfg.padding == 32
    assert cfg.n_frames(300) == int(np.ceil((300 + 32) / 32))


def test_frames_match_direct_dft():
    # naive per-frame DFT of the zero-padded signal
    cfg = StftConfig(32, hop=8, fft_length=40)
    x = np.random.default_rng(1).standard_normal(100)
    spec = stft(x, cfg)[0]
    padded = np.concatenate([np.zeros(cfg.padding), x, np.zeros(200)])
    win = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(32) / 32)
    k = np.arange(cfg.n_bins)[:, None]
    n = np.arange(32)[None, :]
    basis = np.exp(-2j * np.pi * k * n / cfg.fft_length)
    for t in range(spec.shape[0]):
        frame = padded[t * cfg.hop : t * cfg.hop + 32] * win
        np.testing.assert_allclose(spec[t], basis @ frame, atol=1e-12)


def test_bin_centered_sinusoid_concentrates_energy():
    cfg = StftConfig(256)
    k0 = 20
    t = np.arange(4096)
    x = np.cos(2 * np.pi * k0 * t / 256)
    spec = stft(x, cfg)[0]
    interior = np.abs(spec[2:-2]) ** 2  # frames fully inside the signal
    near = interior[:, k0 - 1 : k0 + 2].sum(axis=1)
    assert np.all(near / interior.sum(axis=1) > 1 - 1e-12)


def test_linearity():
    cfg = StftConfig(128, hop=32)
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal((2, 1000))
    lhs = stft(2.5 * x - 0.75 * y, cfg)
    rhs = 2.5 * stft(x, cfg) - 0.75 * stft(y, cfg)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_parseval_constant_quarter_hop():
    # the squared Hann window sums to 3 wl / (8 hop) at 75% overlap
    cfg = StftConfig(256, hop=64)
    x = np.random.default_rng(3).standard_normal(3000)
    ratio = spectrogram_energy(stft(x, cfg), cfg.fft_length) / np.sum(x**2)
    assert ratio == pytest.approx(cfg.fft_length * 3 * 256 / (8 * 64), rel=1e-10)


def test_parseval_bounds_half_hop():
    cfg = StftConfig(256)
    x = np.random.default_rng(4).standard_normal(3000)
    ratio = spectrogram_energy(stft(x, cfg), cfg.fft_length) / np.sum(x**2)
    assert 0.5 * cfg.fft_length <= ratio <= cfg.fft_length


def test_analysis_window_is_periodic_hann():
    cfg = StftConfig(16)
    n = np.arange(16)
    np.testing.assert_allclose(analysis_window(cfg), 0.5 - 0.5 * np.cos(2 * np.pi * n / 16), atol=1e-15)


def test_signal_too_short():
    with pytest.raises(ValueError, match="signal too short"):
        stft(np.zeros(100), StftConfig(128))


@pytest.mark.parametrize("kwargs", [dict(window_length=96, hop=32), dict(window_length=64, hop=8),
                                    dict(window_length=64, fft_length=32), dict(window_length=64, window="hamming")])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        StftConfig(**kwargs)


def test_istft_bin_mismatch():
    with pytest.raises(ValueError, match="bins"):
        istft(np.zeros((1, 4, 10), complex), StftConfig(64))


def test_istft_pads_to_length():
    cfg = StftConfig(64)
    spec = stft(np.ones(200), cfg)
    out = istft(spec, cfg, length=1000)
    assert out.shape == (1, 1000)


def test_audio_validation():
    with pytest.raises(ValueError):
        Audio(np.array([[np.nan, 1.0]]), 16000)
    with pytest.raises(ValueError):
        Audio(np.zeros((1, 4)), 0)
    a = Audio(np.zeros(8), 8000)
    assert a.n_channels == 1 and len(a) == 8 and a.duration == 0.001

"""Time-domain audio container and the STFT/ISTFT pair.

Spectrograms are plain complex arrays of shape ``(n_channels, n_frames, n_bins)``
with ``n_bins = fft_length // 2 + 1``. The forward DFT is unscaled; the
synthesis window is the canonical dual of the Hann analysis window, so

    istft(stft(x)) == x

up to rounding for every allowed configuration.

Energy: with the periodic Hann window and 75% overlap the squared window
sums to ``3 * window_length / (8 * hop)`` at every sample, hence the
two-sided spectrogram energy equals ``fft_length * 3 * window_length /
(8 * hop) * ||x||^2``. At 50% overlap the squared-window sum oscillates
between 0.5 and 1, so the same ratio lies in ``[0.5, 1] * fft_length``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import get_window

__all__ = [
    "Audio",
    "StftConfig",
    "stft",
    "istft",
    "analysis_window",
    "synthesis_window",
    "spectrogram_energy",
]


@dataclass(frozen=True)
class Audio:
    """Multichannel time-domain signal.

    Attributes
    ----------
    samples : ndarray of shape (n_channels, n_samples)
    sample_rate : int
        Sampling rate in Hz.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim == 1:
            samples = samples[np.newaxis, :]
        if samples.ndim != 2:
            raise ValueError(f"samples must be 2-D (channels, length), got shape {samples.shape}")
        if samples.shape[0] < 1 or samples.shape[1] < 1:
            raise ValueError("audio needs at least one channel and one sample")
        if not np.all(np.isfinite(samples)):
            raise ValueError("audio samples must be finite")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    def __len__(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class StftConfig:
    """STFT parameters.

    Only the Hann window with half (``hop = window_length / 2``) or
    three-quarter (``hop = window_length / 4``) overlap is supported.
    """

    window_length: int = 2048
    hop: int | None = None
    fft_length: int | None = None
    window: str = field(default="hann")

    def __post_init__(self):
        wl = int(self.window_length)
        hop = wl // 2 if self.hop is None else int(self.hop)
        nfft = wl if self.fft_length is None else int(self.fft_length)
        if wl <= 0 or hop <= 0:
            raise ValueError("window_length and hop must be positive")
        if wl % hop != 0 or wl // hop not in (2, 4):
            raise ValueError(
                f"window_length / hop must be 2 or 4, got {wl}/{hop}"
            )
        if nfft < wl:
            raise ValueError(f"fft_length ({nfft}) must be >= window_length ({wl})")
        if self.window.lower() != "hann":
            raise ValueError(f"unsupported window {self.window!r}; only 'hann' is available")
        object.__setattr__(self, "window_length", wl)
        object.__setattr__(self, "hop", hop)
        object.__setattr__(self, "fft_length", nfft)
        object.__setattr__(self, "window", "hann")

    @property
    def n_bins(self) -> int:
        return self.fft_length // 2 + 1

    @property
    def padding(self) -> int:
        """Zeros prepended (and at least appended) to the signal."""
        return self.window_length - self.hop

    def n_frames(self, length: int) -> int:
        return math.ceil((length + self.padding) / self.hop)


def analysis_window(cfg: StftConfig) -> np.ndarray:
    return get_window("hann", cfg.window_length, fftbins=True)


def synthesis_window(cfg: StftConfig) -> np.ndarray:
    """Canonical dual of the analysis window for the configured hop."""
    win = analysis_window(cfg)
    folded = (win**2).reshape(-1, cfg.hop).sum(axis=0)
    return win / np.tile(folded, cfg.window_length // cfg.hop)


def _as_samples(audio) -> np.ndarray:
    if isinstance(audio, Audio):
        return audio.samples
    samples = np.asarray(audio, dtype=float)
    if samples.ndim == 1:
        samples = samples[np.newaxis, :]
    if samples.ndim != 2:
        raise ValueError(f"expected (channels, length) samples, got shape {samples.shape}")
    return samples


def stft(audio, cfg: StftConfig | None = None) -> np.ndarray:
    """One-sided STFT of every channel.

    Parameters
    ----------
    audio : Audio or array_like of shape (n_channels, n_samples) or (n_samples,)
    cfg : StftConfig, optional

    Returns
    -------
    spec : ndarray of shape (n_channels, n_frames, n_bins), complex
    """
    cfg = StftConfig() if cfg is None else cfg
    x = _as_samples(audio)
    n_channels, length = x.shape
    if cfg.window_length > length:
        raise ValueError(
            f"signal too short: {length} samples for a {cfg.window_length}-sample window"
        )
    n_frames = cfg.n_frames(length)
    total = (n_frames - 1) * cfg.hop + cfg.window_length
    padded = np.zeros((n_channels, total), dtype=x.dtype)
    padded[:, cfg.padding : cfg.padding + length] = x

    frames = np.lib.stride_tricks.sliding_window_view(padded, cfg.window_length, axis=-1)
    frames = frames[:, :: cfg.hop, :]
    return np.fft.rfft(frames * analysis_window(cfg), n=cfg.fft_length, axis=-1)


def istft(spec: np.ndarray, cfg: StftConfig | None = None, length: int | None = None) -> np.ndarray:
    """Inverse of :func:`stft` by weighted overlap-add.

    Parameters
    ----------
    spec : ndarray of shape (n_channels, n_frames, n_bins)
    cfg : StftConfig, optional
    length : int, optional
        Output length in samples. Defaults to everything the frames cover
        after removing the leading padding.

    Returns
    -------
    samples : ndarray of shape (n_channels, length)
    """
    cfg = StftConfig() if cfg is None else cfg
    spec = np.asarray(spec)
    if spec.ndim == 2:
        spec = spec[np.newaxis]
    if spec.ndim != 3:
        raise ValueError(f"spectrogram must be 3-D, got shape {spec.shape}")
    n_channels, n_frames, n_bins = spec.shape
    if n_bins != cfg.n_bins:
        raise ValueError(
            f"spectrogram has {n_bins} bins but fft_length {cfg.fft_length} implies {cfg.n_bins}"
        )
    if n_frames < 1:
        raise ValueError("spectrogram has no frames")

    frames = np.fft.irfft(spec, n=cfg.fft_length, axis=-1)[..., : cfg.window_length]
    frames = frames * synthesis_window(cfg)

    total = (n_frames - 1) * cfg.hop + cfg.window_length
    out = np.zeros((n_channels, total))
    for t in range(n_frames):
        start = t * cfg.hop
        out[:, start : start + cfg.window_length] += frames[:, t]

    out = out[:, cfg.padding :]
    if length is None:
        return out
    if length <= out.shape[1]:
        return out[:, :length]
    return np.pad(out, ((0, 0), (0, length - out.shape[1])))


def spectrogram_energy(spec: np.ndarray, fft_length: int) -> float:
    """Two-sided energy of a one-sided spectrogram."""
    power = np.abs(np.asarray(spec)) ** 2
    weights = np.full(power.shape[-1], 2.0)
    weights[0] = 1.0
    if fft_length % 2 == 0:
        weights[-1] = 1.0
    return float(np.sum(power * weights))

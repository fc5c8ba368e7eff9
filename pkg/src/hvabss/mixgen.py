"""Synthetic sources and mixtures for desk-scale experiments."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import butter, fftconvolve, sosfilt

from .signal import Audio

__all__ = [
    "HarmonicTone",
    "FilteredNoise",
    "FileSource",
    "Instantaneous",
    "Convolutive",
    "MixSpec",
    "synthesize",
    "det2_harmonic",
    "random_fir",
]


@dataclass(frozen=True)
class HarmonicTone:
    """Harmonic tone with ``n_partials`` partials of amplitude ``k ** -decay``.

    ``envelope="notes"`` gates the tone with a seeded sequence of decaying
    notes separated by short rests; ``"constant"`` keeps it stationary.
    ``hnr_db`` adds an aperiodic (breath) component, Gaussian noise whose
    spectrum falls off like the partials (``min(1, f0/f) ** decay``), at the
    given harmonic-to-noise ratio; ``None`` gives a purely periodic tone.
    """

    f0: float
    n_partials: int = 10
    decay: float = 1.0
    vibrato_depth: float = 0.005
    vibrato_rate: float = 5.0
    envelope: str = "notes"
    hnr_db: float | None = 12.0


@dataclass(frozen=True)
class FilteredNoise:
    low_hz: float = 100.0
    high_hz: float = 4000.0
    order: int = 4


@dataclass(frozen=True)
class FileSource:
    path: str
    channel: int = 0


@dataclass(frozen=True)
class Instantaneous:
    matrix: tuple = ((1.0, 0.6), (0.6, 1.0))

    def array(self) -> np.ndarray:
        return np.asarray(self.matrix)


@dataclass(frozen=True)
class Convolutive:
    """Per-pair FIR mixing.

    Either give ``filters`` of shape (M, N, length) or let them be drawn as
    unit-energy Gaussian taps with an exponential envelope of time constant
    ``decay_ms``, scaled by ``gains[m][n]``.
    """

    filters: np.ndarray | None = None
    length: int = 512
    decay_ms: float = 20.0
    gains: tuple = ((1.0, 0.6), (0.6, 1.0))


_SOURCE_TYPES = {"harmonic": HarmonicTone, "noise": FilteredNoise, "file": FileSource}
_MIXING_TYPES = {"instantaneous": Instantaneous, "convolutive": Convolutive}


@dataclass(frozen=True)
class MixSpec:
    sources: tuple
    mixing: Instantaneous | Convolutive = field(default_factory=Instantaneous)
    snr_db: float | None = 30.0
    duration: float = 5.0
    sample_rate: int = 16000
    seed: int = 0
    window_length: int | None = 2048

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if len(self.sources) < 1:
            raise ValueError("at least one source is required")
        if self.duration <= 0 or self.sample_rate <= 0:
            raise ValueError("duration and sample_rate must be positive")
        m = self.n_channels
        if m != self.n_sources:
            warnings.warn(
                f"{m} microphones for {self.n_sources} sources: not a determined mixture",
                RuntimeWarning,
                stacklevel=3,
            )
        if isinstance(self.mixing, Convolutive) and self.window_length:
            if self.fir_length >= self.window_length / 2:
                warnings.warn(
                    f"FIR length {self.fir_length} is not below half the STFT window "
                    f"({self.window_length}); the per-bin mixing model is a poor approximation",
                    RuntimeWarning,
                    stacklevel=3,
                )

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def n_channels(self) -> int:
        if isinstance(self.mixing, Instantaneous):
            a = self.mixing.array()
        elif self.mixing.filters is not None:
            a = np.asarray(self.mixing.filters)
        else:
            a = np.asarray(self.mixing.gains)
        if a.shape[1] != self.n_sources:
            raise ValueError(f"mixing has {a.shape[1]} source columns for {self.n_sources} sources")
        return a.shape[0]

    @property
    def fir_length(self) -> int:
        if self.mixing.filters is not None:
            return np.asarray(self.mixing.filters).shape[-1]
        return self.mixing.length

    @classmethod
    def from_dict(cls, d: dict) -> "MixSpec":
        d = dict(d)
        sources = []
        for s in d.pop("sources"):
            s = dict(s)
            kind = s.pop("type", "harmonic")
            if kind not in _SOURCE_TYPES:
                raise ValueError(f"unknown source type {kind!r}")
            sources.append(_SOURCE_TYPES[kind](**s))
        mixing = dict(d.pop("mixing", {"type": "instantaneous"}))
        kind = mixing.pop("type", "instantaneous")
        if kind not in _MIXING_TYPES:
            raise ValueError(f"unknown mixing type {kind!r}")
        for key in ("matrix", "gains"):
            if key in mixing:
                mixing[key] = tuple(tuple(float(v) for v in row) for row in mixing[key])
        if "filters" in mixing and mixing["filters"] is not None:
            mixing["filters"] = np.asarray(mixing["filters"], dtype=float)
        return cls(sources=tuple(sources), mixing=_MIXING_TYPES[kind](**mixing), **d)


def _note_envelope(n: int, fs: int, rng: np.random.Generator) -> np.ndarray:
    env = np.zeros(n)
    pos = int(rng.uniform(0.0, 0.2) * fs)
    attack = max(int(0.01 * fs), 1)
    while pos < n:
        dur = int(rng.uniform(0.25, 0.7) * fs)
        rest = int(rng.uniform(0.05, 0.3) * fs)
        tau = rng.uniform(0.2, 0.6) * fs
        seg = np.arange(min(dur, n - pos))
        shape = np.exp(-seg / tau) * np.minimum(1.0, seg / attack)
        env[pos : pos + seg.size] = shape * rng.uniform(0.6, 1.0)
        pos += dur + rest
    return env


def _harmonic(src: HarmonicTone, n: int, fs: int, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / fs
    vib_phase = rng.uniform(0, 2 * np.pi)
    inst_f0 = src.f0 * (1.0 + src.vibrato_depth * np.sin(2 * np.pi * src.vibrato_rate * t + vib_phase))
    phase = 2 * np.pi * np.cumsum(inst_f0) / fs
    out = np.zeros(n)
    for k in range(1, src.n_partials + 1):
        if k * src.f0 * (1 + src.vibrato_depth) >= fs / 2:
            break
        out += k ** (-src.decay) * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    if src.hnr_db is not None:
        freqs = np.fft.rfftfreq(n, 1.0 / fs)
        tilt = np.minimum(1.0, src.f0 / np.maximum(freqs, 1e-12)) ** src.decay
        breath = np.fft.irfft(np.fft.rfft(rng.standard_normal(n)) * tilt, n)
        breath *= np.sqrt(np.mean(out**2) / np.mean(breath**2) * 10 ** (-src.hnr_db / 10))
        out = out + breath
    if src.envelope == "notes":
        out *= _note_envelope(n, fs, rng)
    elif src.envelope != "constant":
        raise ValueError(f"unknown envelope {src.envelope!r}")
    return out


def _noise(src: FilteredNoise, n: int, fs: int, rng: np.random.Generator) -> np.ndarray:
    sos = butter(src.order, [src.low_hz, src.high_hz], btype="bandpass", fs=fs, output="sos")
    return sosfilt(sos, rng.standard_normal(n))


def _file(src: FileSource, n: int, fs: int) -> np.ndarray:
    from .io import read_wav

    audio = read_wav(Path(src.path))
    if audio.sample_rate != fs:
        raise ValueError(f"{src.path}: sample rate {audio.sample_rate} != {fs}")
    x = audio.samples[src.channel]
    return x[:n] if x.size >= n else np.pad(x, (0, n - x.size))


def random_fir(n_channels: int, n_sources: int, length: int, decay_ms: float, fs: int,
               rng: np.random.Generator, gains=None) -> np.ndarray:
    """Exponentially decaying Gaussian FIRs of shape (M, N, length), unit energy times gain."""
    env = np.exp(-np.arange(length) / (decay_ms * 1e-3 * fs))
    h = rng.standard_normal((n_channels, n_sources, length)) * env
    h /= np.linalg.norm(h, axis=-1, keepdims=True)
    if gains is not None:
        h *= np.asarray(gains, dtype=float)[:, :, np.newaxis]
    return h


def synthesize(spec: MixSpec) -> tuple[Audio, Audio]:
    """Render ``spec`` into a mixture and the source images at microphone 1.

    Returns
    -------
    mixture : Audio with ``n_channels`` channels
    references : Audio with one channel per source
    """
    fs = spec.sample_rate
    n = int(round(spec.duration * fs))
    root = np.random.default_rng(spec.seed)
    src_rngs = [np.random.default_rng(s) for s in root.spawn(spec.n_sources)]
    mix_rng, noise_rng = (np.random.default_rng(s) for s in root.spawn(2))

    sources = np.empty((spec.n_sources, n))
    for i, (src, rng) in enumerate(zip(spec.sources, src_rngs)):
        if isinstance(src, HarmonicTone):
            sig = _harmonic(src, n, fs, rng)
        elif isinstance(src, FilteredNoise):
            sig = _noise(src, n, fs, rng)
        elif isinstance(src, FileSource):
            sig = _file(src, n, fs)
        else:
            raise TypeError(f"unsupported source descriptor {type(src).__name__}")
        rms = np.sqrt(np.mean(sig**2))
        sources[i] = sig / rms * 0.1 if rms > 0 else sig

    m = spec.n_channels
    if isinstance(spec.mixing, Instantaneous):
        a = spec.mixing.array()
        images = a[:, :, np.newaxis] * sources[np.newaxis]
    else:
        if spec.mixing.filters is not None:
            h = np.asarray(spec.mixing.filters, dtype=float)
        else:
            h = random_fir(m, spec.n_sources, spec.mixing.length, spec.mixing.decay_ms, fs,
                           mix_rng, spec.mixing.gains)
        images = np.empty((m, spec.n_sources, n))
        for i in range(m):
            for j in range(spec.n_sources):
                images[i, j] = fftconvolve(sources[j], h[i, j])[:n]

    mixture = images.sum(axis=1)
    if spec.snr_db is not None:
        noise = noise_rng.standard_normal(mixture.shape)
        p_sig = np.mean(mixture**2, axis=1, keepdims=True)
        p_noise = np.mean(noise**2, axis=1, keepdims=True)
        mixture = mixture + noise * np.sqrt(p_sig / p_noise * 10 ** (-spec.snr_db / 10))
    return Audio(mixture, fs), Audio(images[0], fs)


def det2_harmonic(seed: int = 0, convolutive: bool = False, **overrides) -> MixSpec:
    """Two harmonic tones at 220 Hz and 311 Hz, 5 s at 16 kHz, 30 dB ambient noise."""
    sources = (HarmonicTone(220.0), HarmonicTone(311.0))
    mixing = Convolutive(length=512, decay_ms=20.0) if convolutive else Instantaneous()
    params = dict(sources=sources, mixing=mixing, snr_db=30.0, duration=5.0, sample_rate=16000, seed=seed)
    params.update(overrides)
    return MixSpec(**params)

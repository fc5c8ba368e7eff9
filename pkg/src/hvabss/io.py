"""WAV reading and writing (16-bit PCM and 32-bit IEEE float)."""
from __future__ import annotations

import os
import struct
import tempfile
import warnings
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .signal import Audio

__all__ = ["UnsupportedEncodingError", "read_wav", "write_wav", "atomic_write_text"]

_PCM16_SCALE = 32768.0


class UnsupportedEncodingError(ValueError):
    pass


def read_wav(path) -> Audio:
    """Read a WAV file into an :class:`Audio` of shape (channels, samples).

    16-bit PCM is scaled by ``1/32768``; float32 is returned unchanged
    (as float64, which round-trips exactly).
    """
    path = Path(path)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except wavfile.WavFileWarning as exc:
        raise ValueError(f"{path}: malformed WAV file ({exc})") from exc
    except (EOFError, OSError, struct.error) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise ValueError(f"{path}: truncated or unreadable WAV file ({exc})") from exc
    except ValueError as exc:
        msg = str(exc)
        if "format" in msg.lower() and "not supported" in msg.lower():
            raise UnsupportedEncodingError(f"{path}: {msg}") from exc
        raise ValueError(f"{path}: invalid WAV file ({msg})") from exc

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / _PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"{path}: unsupported sample encoding {data.dtype} "
            "(supported: 16-bit PCM, 32-bit IEEE float)"
        )
    samples = samples.T if samples.ndim == 2 else samples[np.newaxis]
    return Audio(np.ascontiguousarray(samples), int(rate))


def write_wav(audio: Audio, path, encoding: str = "float32") -> None:
    """Write ``audio`` as ``"float32"`` or ``"pcm16"`` (clipped to [-1, 1))."""
    path = Path(path)
    samples = audio.samples
    if encoding == "float32":
        data = samples.astype(np.float32)
    elif encoding == "pcm16":
        data = np.clip(np.round(samples * _PCM16_SCALE), -32768, 32767).astype(np.int16)
    else:
        raise UnsupportedEncodingError(f"unsupported output encoding {encoding!r}")
    data = data.T if data.shape[0] > 1 else data[0]
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".wav.tmp")
    os.close(fd)
    try:
        wavfile.write(tmp, audio.sample_rate, np.ascontiguousarray(data))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)

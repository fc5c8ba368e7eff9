"""Proximity and shrinkage operators.

Entrywise operators act on spectrogram-shaped arrays ``(N, T, F)`` and only
rescale magnitudes, so the phase of every entry is preserved. Each one is
written as ``factor * z`` where ``factor`` is the matching mask from
:mod:`hvabss.masks`; a zero magnitude gets factor 0.
"""
from __future__ import annotations

import numpy as np
from scipy.signal import convolve

from ._validation import check_scalar

__all__ = [
    "shrink_factor",
    "prox_l1",
    "prox_l21",
    "p_shrinkage",
    "social_shrinkage",
    "prox_weighted_l2",
    "prox_neglog",
    "prox_logdet",
]


def shrink_factor(threshold, magnitude) -> np.ndarray:
    """``(1 - threshold / magnitude)_+`` with value 0 where ``magnitude == 0``."""
    magnitude = np.asarray(magnitude, dtype=float)
    out = np.zeros(np.broadcast(threshold, magnitude).shape)
    nz = magnitude > 0
    ratio = np.divide(threshold, magnitude, out=np.full_like(out, np.inf), where=nz)
    np.maximum(1.0 - ratio, 0.0, out=out, where=nz)
    return out


def prox_l1(z, lam: float) -> np.ndarray:
    """Bin-wise soft thresholding: prox of ``lam * ||.||_1``."""
    lam = check_scalar(lam, "lam", min_val=0)
    z = np.asarray(z)
    return shrink_factor(lam, np.abs(z)) * z


def prox_l21(z, lam: float) -> np.ndarray:
    """Group thresholding with one group per (source, frame) over frequency."""
    lam = check_scalar(lam, "lam", min_val=0)
    z = np.asarray(z)
    group = np.linalg.norm(z, axis=-1, keepdims=True)
    return shrink_factor(lam, group) * z


def p_shrinkage(z, lam: float, p: float) -> np.ndarray:
    """Entrywise ``(1 - lam^(2-p) / |z|^(2-p))_+ z``; ``p = 1`` is soft thresholding."""
    lam = check_scalar(lam, "lam", min_val=0)
    p = check_scalar(p, "p", max_val=1)
    z = np.asarray(z)
    q = 2.0 - p
    return shrink_factor(lam**q, np.abs(z) ** q) * z


def _smoothed_power(z: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    kernel = np.asarray(kernel, dtype=float)
    if kernel.ndim != 2:
        raise ValueError(f"kernel must be 2-D over (time, frequency), got shape {kernel.shape}")
    if np.any(kernel < 0) or not np.all(np.isfinite(kernel)):
        raise ValueError("kernel entries must be finite and non-negative")
    power = np.abs(z) ** 2
    smoothed = convolve(power, kernel[np.newaxis], mode="same")
    return np.maximum(smoothed, 0.0)


def social_shrinkage(z, lam: float, kernel) -> np.ndarray:
    """Social-sparsity shrinkage ``(1 - lam / sqrt(h * |z|^2))_+ z``.

    ``h * .`` is a zero-padded 2-D convolution over (time, frequency) with
    the output aligned as in ``scipy.signal.convolve(..., mode="same")``.
    """
    lam = check_scalar(lam, "lam", min_val=0)
    z = np.asarray(z)
    return shrink_factor(lam, np.sqrt(_smoothed_power(z, kernel))) * z


def prox_weighted_l2(z, variance, lam: float) -> np.ndarray:
    """Prox of ``(lam/2) sum |z|^2 / v``: entrywise Wiener gain ``v / (v + lam)``."""
    from .masks import mask_model_iva

    return mask_model_iva(variance, lam) * np.asarray(z)


def prox_neglog(sigma, mu: float) -> np.ndarray:
    """Prox of ``-mu * log`` on non-negative scalars: ``(s + sqrt(s^2 + 4 mu)) / 2``."""
    sigma = np.asarray(sigma, dtype=float)
    return (sigma + np.sqrt(sigma**2 + 4.0 * mu)) / 2.0


def prox_logdet(demix, mu: float) -> np.ndarray:
    """Prox of ``-mu * sum_f log|det W[f]|`` on a (F, N, M) demixing stack.

    Each matrix keeps its singular vectors while every singular value is
    replaced by ``prox_neglog(sigma, mu)``. For a zero matrix the result
    depends on the singular vectors the SVD routine picks; only its
    singular values (all ``sqrt(mu)``) are determined.
    """
    mu = check_scalar(mu, "mu", min_val=0, include_min=False)
    demix = np.asarray(demix)
    u, s, vh = np.linalg.svd(demix, full_matrices=False)
    s = prox_neglog(s, mu)
    return (u * s[..., np.newaxis, :]) @ vh

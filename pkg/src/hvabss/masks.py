"""Time-frequency mask generators for the masking solver.

Every generator maps a spectrogram-shaped array ``(N, T, F)`` to a real
mask of the same shape with entries in ``[0, 1]``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from ._validation import check_finite, check_positive_int, check_scalar
from .prox import _smoothed_power, shrink_factor

__all__ = [
    "HvaConfig",
    "mask_l1",
    "mask_l21",
    "mask_p_shrinkage",
    "mask_social",
    "mask_model_iva",
    "cepstrum_forward",
    "cepstrum_inverse",
    "cosine_shrink_mask",
    "wiener_like_mask",
    "hva_mask",
    "HvaMask",
]

logger = logging.getLogger(__name__)


def mask_l1(z, lam: float) -> np.ndarray:
    lam = check_scalar(lam, "lam", min_val=0)
    return shrink_factor(lam, np.abs(np.asarray(z)))


def mask_l21(z, lam: float) -> np.ndarray:
    lam = check_scalar(lam, "lam", min_val=0)
    z = np.asarray(z)
    group = np.linalg.norm(z, axis=-1, keepdims=True)
    return np.broadcast_to(shrink_factor(lam, group), z.shape).copy()


def mask_p_shrinkage(z, lam: float, p: float) -> np.ndarray:
    lam = check_scalar(lam, "lam", min_val=0)
    p = check_scalar(p, "p", max_val=1)
    q = 2.0 - p
    return shrink_factor(lam**q, np.abs(np.asarray(z)) ** q)


def mask_social(z, lam: float, kernel) -> np.ndarray:
    lam = check_scalar(lam, "lam", min_val=0)
    return shrink_factor(lam, np.sqrt(_smoothed_power(np.asarray(z), kernel)))


def mask_model_iva(variance, lam: float) -> np.ndarray:
    """Constant Gaussian-model mask ``v / (v + lam)``; zero where ``v == 0``."""
    lam = check_scalar(lam, "lam", min_val=0)
    v = check_finite(np.asarray(variance, dtype=float), "variance")
    if np.any(v < 0):
        raise ValueError("variance must be non-negative")
    out = np.zeros_like(v)
    np.divide(v, v + lam, out=out, where=v > 0)
    return out


def cepstrum_forward(logmag, n_quefrency: int | None = None) -> np.ndarray:
    """Frequency-direction DFT scaled by ``1/F`` and zero-padded to length ``C``.

    ``out[..., c] = (1/F) sum_f x[..., f] exp(-2j pi c f / C)``.
    """
    logmag = np.asarray(logmag)
    n_bins = logmag.shape[-1]
    C = n_bins if n_quefrency is None else int(n_quefrency)
    if C < n_bins:
        raise ValueError(f"quefrency length {C} must be >= number of bins {n_bins}")
    return np.fft.fft(logmag, n=C, axis=-1) / n_bins


def cepstrum_inverse(cep, n_bins: int, real: bool = True) -> np.ndarray:
    """Inverse of :func:`cepstrum_forward`, truncated to the first ``n_bins`` bins.

    ``out[..., f] = (F/C) sum_c cep[..., c] exp(2j pi c f / C)``. With
    ``real=True`` the (rounding-level) imaginary part is discarded.
    """
    cep = np.asarray(cep)
    out = np.fft.ifft(cep, axis=-1)[..., :n_bins] * n_bins
    return out.real if real else out


def cosine_shrink_mask(cep, lam: float, kappa: int = 1) -> np.ndarray:
    """Mask of the cosine shrinkage operator.

    ``Xi^kappa(min(1, |nu| / (2 lam)))`` with ``Xi(u) = (1 - cos(pi u)) / 2``;
    all ones when ``lam == 0``.
    """
    lam = check_scalar(lam, "lam", min_val=0)
    kappa = check_positive_int(kappa, "kappa")
    mag = np.abs(np.asarray(cep))
    if lam == 0:
        return np.ones(mag.shape)
    with np.errstate(over="ignore"):  # huge |nu| / tiny lam saturates to 1 anyway
        mask = np.minimum(1.0, mag / (2.0 * lam))
    for _ in range(kappa):
        # cos(pi u) written as sin(pi (1/2 - u)) so u = 0, 1/2, 1 map exactly to 0, 1/2, 1
        mask = (1.0 - np.sin(np.pi * (0.5 - mask))) / 2.0
    return mask


def wiener_like_mask(power, gamma: float = 1.0) -> np.ndarray:
    """``(p_n / sum_n p_n) ** gamma`` across the source axis.

    Bins where every source has zero power get the uniform value
    ``(1/N) ** gamma``.
    """
    gamma = check_scalar(gamma, "gamma", min_val=0, include_min=False)
    power = check_finite(np.asarray(power, dtype=float), "power")
    if np.any(power < 0):
        raise ValueError("power must be non-negative")
    n_sources = power.shape[0]
    total = power.sum(axis=0, keepdims=True)
    empty = total == 0
    if np.any(empty):
        logger.debug("wiener_like_mask: %d all-zero bins set uniform", int(empty.sum()))
    ratio = np.divide(power, total, out=np.full_like(power, 1.0 / n_sources), where=~empty)
    return np.clip(ratio, 0.0, 1.0) ** gamma


@dataclass(frozen=True)
class HvaConfig:
    """Parameters of the HVA mask.

    ``gamma=None`` means ``1 / N``; ``quefrency_length=None`` means ``C = F``.
    """

    lam: float = 0.08
    kappa: int = 3
    gamma: float | None = None
    eps: float = 1e-3
    quefrency_length: int | None = None

    def __post_init__(self):
        check_scalar(self.lam, "lam", min_val=0)
        check_positive_int(self.kappa, "kappa")
        if self.gamma is not None:
            check_scalar(self.gamma, "gamma", min_val=0, include_min=False)
        check_scalar(self.eps, "eps", min_val=0)
        if self.quefrency_length is not None:
            check_positive_int(self.quefrency_length, "quefrency_length")


def _enhanced_log_amplitude(z: np.ndarray, cfg: HvaConfig) -> np.ndarray:
    """Cepstrum-thresholded log-amplitude (mean restored), shape (N, T, F)."""
    n_bins = z.shape[-1]
    mag = np.abs(z)
    if cfg.eps == 0:
        mag = np.maximum(mag, np.finfo(float).tiny)
    zeta = np.log(mag + cfg.eps)
    mean = zeta.mean(axis=-1, keepdims=True)
    rho = zeta - mean
    if cfg.lam == 0:
        return rho + mean
    nu = cepstrum_forward(rho, cfg.quefrency_length)
    varsigma = cosine_shrink_mask(nu, cfg.lam, cfg.kappa)
    xi = cepstrum_inverse(varsigma * nu, n_bins, real=False)
    # the mask is even in |nu|, so only rounding-level imaginary parts survive
    imag, real = np.linalg.norm(xi.imag), np.linalg.norm(xi.real)
    if imag > 1e-8 * max(real, 1e-300):
        raise FloatingPointError(f"cepstral inverse has imaginary residue {imag:.3g} (real norm {real:.3g})")
    return xi.real + mean


def hva_mask(z, cfg: HvaConfig | None = None, **params) -> np.ndarray:
    """Harmonic vector analysis mask.

    Log-amplitudes are mean-normalized per (source, frame), cosine-shrunk in
    the cepstrum domain, mapped back to squared amplitudes and combined
    across sources by a Wiener-like rule with exponent ``gamma``.

    Parameters
    ----------
    z : ndarray of shape (n_sources, n_frames, n_bins)
    cfg : HvaConfig, optional
    **params
        Overrides for fields of ``cfg``.
    """
    if cfg is None:
        cfg = HvaConfig(**params)
    elif params:
        cfg = HvaConfig(**{**cfg.__dict__, **params})
    z = np.asarray(z)
    if z.ndim != 3:
        raise ValueError(f"z must have shape (sources, frames, bins), got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("hva_mask input contains non-finite values")
    n_sources = z.shape[0]
    gamma = 1.0 / n_sources if cfg.gamma is None else cfg.gamma

    varrho = _enhanced_log_amplitude(z, cfg)
    # upsilon_n / sum(upsilon) with upsilon = exp(2 varrho), evaluated stably
    ratio = softmax(2.0 * varrho, axis=0)
    return np.clip(ratio, 0.0, 1.0) ** gamma


class HvaMask:
    """Picklable callable wrapper around :func:`hva_mask` for the solver."""

    def __init__(self, cfg: HvaConfig | None = None):
        self.cfg = HvaConfig() if cfg is None else cfg

    def __call__(self, z):
        return hva_mask(z, self.cfg)

    def __repr__(self):
        return f"HvaMask({self.cfg!r})"

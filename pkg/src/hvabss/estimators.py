"""Scikit-learn style separators.

``fit`` estimates per-bin demixing matrices from a multichannel spectrogram
of shape ``(n_channels, n_frames, n_bins)`` and ``transform`` returns the
separated spectrogram ``(n_sources, n_frames, n_bins)``, back-projected to
the reference microphone by default. Hyper-parameters follow the usual
``get_params``/``set_params`` protocol so separators can be cloned and swept.

Example
-------
>>> from hvabss import HVA, stft, istft, StftConfig
>>> cfg = StftConfig(2048)
>>> spec = stft(mixture, cfg)                       # doctest: +SKIP
>>> est = HVA(lam=0.08, kappa=3).fit_transform(spec)  # doctest: +SKIP
>>> sources = istft(est, cfg, length=len(mixture))    # doctest: +SKIP
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive_int, check_scalar, check_spectrogram
from .linops import back_project, whiten as _whiten
from .masks import HvaConfig, HvaMask, mask_model_iva, wiener_like_mask
from .solver import PenaltyProx, SolverConfig, solve

__all__ = [
    "BaseSeparator",
    "ProxBSS",
    "FDICA",
    "LaplaceIVA",
    "MaskingBSS",
    "ModelBasedIVA",
    "HVA",
    "WienerOnly",
    "make_separator",
]


class BaseSeparator(TransformerMixin, BaseEstimator):
    """Shared fit/transform logic; subclasses provide the shrink step."""

    def __init__(
        self,
        n_iter: int = 200,
        mu1: float = 1.0,
        mu2: float = 1.0,
        alpha: float = 1.0,
        whiten: bool = True,
        back_projection: bool = True,
        ref_channel: int = 0,
        normalize: str = "power",
    ):
        self.n_iter = n_iter
        self.mu1 = mu1
        self.mu2 = mu2
        self.alpha = alpha
        self.whiten = whiten
        self.back_projection = back_projection
        self.ref_channel = ref_channel
        self.normalize = normalize

    # hooks -----------------------------------------------------------
    def _shrink(self, xw: np.ndarray) -> dict:
        """Return ``{"prox": ...}`` or ``{"mask": ...}`` for the solver."""
        raise NotImplementedError

    def _objective_penalty(self):
        return None, 1.0

    # API -------------------------------------------------------------
    def _check_input(self, X) -> np.ndarray:
        X = check_spectrogram(X, name="X")
        if X.shape[0] < 2:
            raise ValueError("determined BSS requires N >= 2 channels")
        return X

    def fit(self, X, y=None, callback=None):
        """Estimate demixing matrices.

        Parameters
        ----------
        X : array_like of shape (n_channels, n_frames, n_bins)
            Complex mixture spectrogram.
        y : ignored
        callback : callable, optional
            ``callback(iteration, w)`` with ``w`` the current demixing stack for
            the whitened, normalized data.
        """
        X = self._check_input(X)
        check_positive_int(self.n_iter, "n_iter", min_val=0)
        n_channels, _, n_bins = X.shape
        if self.whiten:
            xw, transform = _whiten(X)
        else:
            xw, transform = X, np.tile(np.eye(n_channels, dtype=complex), (n_bins, 1, 1))

        cfg = SolverConfig(self.mu1, self.mu2, self.alpha, self.n_iter, **self._shrink(xw))
        penalty, lam = self._objective_penalty()
        w, trace = solve(xw, cfg, penalty=penalty, lam=lam, normalize_method=self.normalize, callback=callback)

        self.whitening_ = transform
        self.scale_ = trace.scale
        self.demix_ = w
        self.demix_filter_ = self.compose(w)
        self.trace_ = trace
        self.n_features_in_ = n_channels
        self.n_sources_ = w.shape[1]
        return self

    def compose(self, w: np.ndarray) -> np.ndarray:
        """Demixing stack for the raw mixture from one for the whitened, normalized data."""
        return w @ self.whitening_ / self.scale_

    def transform(self, X, demix=None):
        """Separate ``X`` with the fitted (or given) demixing stack."""
        check_is_fitted(self, "demix_filter_")
        X = check_spectrogram(X, name="X")
        demix = self.demix_filter_ if demix is None else demix
        if X.shape[0] != demix.shape[2] or X.shape[2] != demix.shape[0]:
            raise ValueError(f"X of shape {X.shape} does not match the fitted demixing stack {demix.shape}")
        shat = np.einsum("fnm,mtf->ntf", demix, X)
        if self.back_projection:
            shat = back_project(shat, demix, self.ref_channel)
        return shat

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y, **fit_params).transform(X)


AUTO_SCALE = 4.0 / 3.0


def auto_lambda(x: np.ndarray, penalty: str, scale: float = AUTO_SCALE) -> float:
    """Penalty weight that puts the scale-optimal ``W = c I`` at ``c = scale``.

    Along ``W = c I`` the objective ``lam * c * P(x) - N F log c`` is minimal at
    ``c = N F / (lam P(x))``. The default ``scale`` of 4/3 keeps the singular
    values of the solution clear of ``sqrt(mu1) = 1``, the smallest value the
    log-det prox can return; at ``c = 1`` bins whose solution needs smaller
    singular values have no fixed point and the iterates flip sign forever.
    """
    from .solver import penalty_value

    return x.shape[0] * x.shape[2] / (scale * penalty_value(x, penalty))


class ProxBSS(BaseSeparator):
    """Exact primal-dual BSS with an ``l1`` or ``l21`` penalty of weight ``lam``.

    ``lam="auto"`` picks the weight from the data with :func:`auto_lambda`.
    ``p < 1`` swaps soft thresholding for p-shrinkage (see
    :class:`~hvabss.solver.PenaltyProx`); no objective is recorded then.
    """

    def __init__(self, penalty: str = "l21", lam="auto", p: float = 1.0, n_iter: int = 200, mu1: float = 1.0,
                 mu2: float = 1.0, alpha: float = 1.0, whiten: bool = True, back_projection: bool = True,
                 ref_channel: int = 0, normalize: str = "power"):
        super().__init__(n_iter, mu1, mu2, alpha, whiten, back_projection, ref_channel, normalize)
        self.penalty = penalty
        self.lam = lam
        self.p = p

    def _penalty(self) -> str:
        return self.penalty

    def _shrink(self, xw):
        lam = self.lam
        if isinstance(lam, str):
            if lam != "auto":
                raise ValueError(f"lam must be a number or 'auto', got {lam!r}")
            from .linops import DataOperator, normalize

            x = normalize(DataOperator(xw), method=self.normalize).observations if self.normalize else xw
            lam = auto_lambda(x, self._penalty())
        self.lam_ = lam
        return {"prox": PenaltyProx(self._penalty(), lam, self.p)}

    def _objective_penalty(self):
        if self.p != 1.0:
            return None, 1.0
        return self._penalty(), self.lam_


class FDICA(ProxBSS):
    """Laplace frequency-domain ICA (soft thresholding)."""

    def __init__(self, lam="auto", p: float = 1.0, n_iter: int = 200, mu1: float = 1.0, mu2: float = 1.0,
                 alpha: float = 1.0, whiten: bool = True, back_projection: bool = True,
                 ref_channel: int = 0, normalize: str = "power"):
        super().__init__("l1", lam, p, n_iter, mu1, mu2, alpha, whiten, back_projection, ref_channel, normalize)

    def _penalty(self) -> str:
        return "l1"


class LaplaceIVA(ProxBSS):
    """Independent vector analysis with the spherical Laplace model (group thresholding)."""

    def __init__(self, lam="auto", p: float = 1.0, n_iter: int = 200, mu1: float = 1.0, mu2: float = 1.0,
                 alpha: float = 1.0, whiten: bool = True, back_projection: bool = True,
                 ref_channel: int = 0, normalize: str = "power"):
        super().__init__("l21", lam, p, n_iter, mu1, mu2, alpha, whiten, back_projection, ref_channel, normalize)

    def _penalty(self) -> str:
        return "l21"


class MaskingBSS(BaseSeparator):
    """Masking-based BSS with an arbitrary mask generator ``mask_fn(z) -> [0, 1]``."""

    def __init__(self, mask_fn=None, n_iter: int = 200, mu1: float = 1.0, mu2: float = 1.0,
                 alpha: float = 1.0, whiten: bool = True, back_projection: bool = True,
                 ref_channel: int = 0, normalize: str = "power"):
        super().__init__(n_iter, mu1, mu2, alpha, whiten, back_projection, ref_channel, normalize)
        self.mask_fn = mask_fn

    def _shrink(self, xw):
        if self.mask_fn is None:
            raise ValueError("mask_fn must be set")
        return {"mask": self.mask_fn}


class _ConstantMask:
    def __init__(self, mask):
        self.mask = mask

    def __call__(self, z):
        return self.mask


class ModelBasedIVA(BaseSeparator):
    """Gaussian-model IVA: constant mask ``v / (v + lam)``.

    The variance is ``|enhancer(x)|^2`` for the whitened, normalized mixture
    ``x``; the default enhancer is the identity.
    """

    def __init__(self, lam: float = 1e-3, enhancer=None, n_iter: int = 200, mu1: float = 1.0,
                 mu2: float = 1.0, alpha: float = 1.0, whiten: bool = True, back_projection: bool = True,
                 ref_channel: int = 0, normalize: str = "power"):
        super().__init__(n_iter, mu1, mu2, alpha, whiten, back_projection, ref_channel, normalize)
        self.lam = lam
        self.enhancer = enhancer

    def _shrink(self, xw):
        check_scalar(self.lam, "lam", min_val=0)
        from .linops import DataOperator, normalize

        x = normalize(DataOperator(xw), method=self.normalize).observations if self.normalize else xw
        enhanced = x if self.enhancer is None else self.enhancer(x)
        return {"mask": _ConstantMask(mask_model_iva(np.abs(enhanced) ** 2, self.lam))}


class _WienerMask:
    def __init__(self, gamma):
        self.gamma = gamma

    def __call__(self, z):
        gamma = 1.0 / z.shape[0] if self.gamma is None else self.gamma
        return wiener_like_mask(np.abs(z) ** 2, gamma)


class WienerOnly(BaseSeparator):
    """Masking BSS with the plain Wiener-like mask of ``|z|^2`` (no source model)."""

    def __init__(self, gamma: float | None = None, n_iter: int = 200, mu1: float = 1.0, mu2: float = 1.0,
                 alpha: float = 1.0, whiten: bool = True, back_projection: bool = True,
                 ref_channel: int = 0, normalize: str = "power"):
        super().__init__(n_iter, mu1, mu2, alpha, whiten, back_projection, ref_channel, normalize)
        self.gamma = gamma

    def _shrink(self, xw):
        return {"mask": _WienerMask(self.gamma)}


class HVA(BaseSeparator):
    """Harmonic vector analysis.

    Parameters
    ----------
    lam : float
        Cosine-shrinkage threshold on the cepstrum.
    kappa : int
        Number of raised-cosine compositions.
    gamma : float, optional
        Mask exponent; ``1 / n_sources`` when omitted.
    eps : float
        Floor added to magnitudes before the logarithm.
    quefrency_length : int, optional
        Cepstrum length ``C >= n_bins``; defaults to ``n_bins``.
    """

    def __init__(self, lam: float = 0.08, kappa: int = 3, gamma: float | None = None, eps: float = 1e-3,
                 quefrency_length: int | None = None, n_iter: int = 200, mu1: float = 1.0, mu2: float = 1.0,
                 alpha: float = 1.0, whiten: bool = True, back_projection: bool = True,
                 ref_channel: int = 0, normalize: str = "power"):
        super().__init__(n_iter, mu1, mu2, alpha, whiten, back_projection, ref_channel, normalize)
        self.lam = lam
        self.kappa = kappa
        self.gamma = gamma
        self.eps = eps
        self.quefrency_length = quefrency_length

    def _shrink(self, xw):
        cfg = HvaConfig(self.lam, self.kappa, self.gamma, self.eps, self.quefrency_length)
        if cfg.quefrency_length is not None and cfg.quefrency_length < xw.shape[2]:
            raise ValueError(f"quefrency_length must be >= n_bins ({xw.shape[2]})")
        return {"mask": HvaMask(cfg)}


_METHODS = {
    "fdica": FDICA,
    "iva": LaplaceIVA,
    "model_iva": ModelBasedIVA,
    "hva": HVA,
    "wiener_only": WienerOnly,
}


def make_separator(method: str, **params) -> BaseSeparator:
    """Build a separator by method name (``fdica``, ``iva``, ``model_iva``, ``hva``, ``wiener_only``).

    Unknown parameter names raise ``ValueError``.
    """
    try:
        cls = _METHODS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(_METHODS)}") from None
    est = cls()
    valid = est.get_params()
    bad = sorted(set(params) - set(valid))
    if bad:
        raise ValueError(f"parameters {bad} are not valid for method {method!r}")
    return est.set_params(**params)

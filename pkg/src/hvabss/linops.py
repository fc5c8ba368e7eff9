"""The implicit data operator and the pre/post-processing around it.

Demixing matrices are stored as a stack of shape ``(n_bins, n_sources,
n_channels)``. The operator ``X`` maps such a stack to the separated
spectrogram ``s[n, t, f] = sum_m W[f, n, m] x[m, t, f]``; it is never
materialised as a matrix.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import check_spectrogram

__all__ = [
    "vec",
    "mat",
    "identity_stack",
    "DataOperator",
    "apply",
    "adjoint_apply",
    "inner",
    "spectral_norm",
    "normalize",
    "whiten",
    "back_project",
]

logger = logging.getLogger(__name__)


def vec(demix: np.ndarray) -> np.ndarray:
    """Stack of (F, N, M) matrices to the length-``N*M*F`` vector (row-major per bin)."""
    return np.asarray(demix).reshape(-1)


def mat(w: np.ndarray, n_sources: int, n_channels: int) -> np.ndarray:
    """Inverse of :func:`vec`; returns the full (F, N, M) stack."""
    return np.asarray(w).reshape(-1, n_sources, n_channels)


def identity_stack(n_bins: int, n_sources: int, n_channels: int | None = None) -> np.ndarray:
    n_channels = n_sources if n_channels is None else n_channels
    return np.tile(np.eye(n_sources, n_channels, dtype=complex), (n_bins, 1, 1))


@dataclass(frozen=True)
class DataOperator:
    """Observed mixture viewed as the linear map ``w -> X w``.

    Attributes
    ----------
    observations : ndarray of shape (n_channels, n_frames, n_bins)
    scale : float
        Factor the observations were divided by (1 until normalized).
    n_sources : int, optional
        Rows of each demixing matrix. Defaults to ``n_channels``.
    """

    observations: np.ndarray
    scale: float = 1.0
    n_sources: int | None = None

    def __post_init__(self):
        obs = check_spectrogram(self.observations, name="observations")
        object.__setattr__(self, "observations", obs)
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.n_sources is None:
            object.__setattr__(self, "n_sources", obs.shape[0])

    @property
    def n_channels(self) -> int:
        return self.observations.shape[0]

    @property
    def n_frames(self) -> int:
        return self.observations.shape[1]

    @property
    def n_bins(self) -> int:
        return self.observations.shape[2]

    @property
    def domain_shape(self) -> tuple[int, int, int]:
        return (self.n_bins, self.n_sources, self.n_channels)

    @property
    def range_shape(self) -> tuple[int, int, int]:
        return (self.n_sources, self.n_frames, self.n_bins)

    @property
    def conj_observations(self) -> np.ndarray:
        cached = self.__dict__.get("_conj")
        if cached is None:
            cached = self.observations.conj()
            object.__setattr__(self, "_conj", cached)
        return cached

    def __matmul__(self, demix):
        return apply(self, demix)


def apply(X: DataOperator, demix: np.ndarray) -> np.ndarray:
    """``X w``: apply each bin's demixing matrix to that bin's observations."""
    demix = np.asarray(demix)
    if demix.ndim != 3 or demix.shape[0] != X.n_bins or demix.shape[2] != X.n_channels:
        raise ValueError(
            f"demixing stack of shape {demix.shape} does not match operator domain "
            f"(F={X.n_bins}, N, M={X.n_channels})"
        )
    coef = demix.transpose(1, 2, 0)  # (N, M, F), broadcast over frames
    obs = X.observations
    out = np.empty((demix.shape[1],) + obs.shape[1:], dtype=np.result_type(obs, demix))
    tmp = np.empty(obs.shape[1:], dtype=out.dtype)
    for n in range(out.shape[0]):
        np.multiply(obs[0], coef[n, 0], out=out[n])
        for m in range(1, X.n_channels):
            np.multiply(obs[m], coef[n, m], out=tmp)
            out[n] += tmp
    return out


def adjoint_apply(X: DataOperator, y: np.ndarray) -> np.ndarray:
    """``X^H y``: correlate each source spectrogram with every observed channel."""
    y = np.asarray(y)
    if y.ndim != 3 or y.shape[1:] != (X.n_frames, X.n_bins):
        raise ValueError(
            f"array of shape {y.shape} does not match operator range "
            f"(N, T={X.n_frames}, F={X.n_bins})"
        )
    xc = X.conj_observations
    cols = [np.sum(y * xc[m], axis=1) for m in range(X.n_channels)]  # each (N, F)
    return np.stack(cols, axis=-1).transpose(1, 0, 2)


def inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Complex inner product ``sum(a * conj(b))``."""
    return complex(np.vdot(b, a))


def spectral_norm(
    X: DataOperator,
    tol: float = 1e-9,
    max_iter: int = 500,
    method: str = "power",
    return_info: bool = False,
):
    """Largest singular value of ``X`` (or a cheap upper bound).

    Parameters
    ----------
    X : DataOperator
    tol : float
        Relative change of successive Rayleigh quotients of ``X^H X`` at which
        the power method stops.
    max_iter : int
    method : {"power", "max", "l1inf"}
        ``"power"`` estimates the norm with the power method on ``X^H X``.
        ``"max"`` returns ``sqrt(T * M) * max|x|`` and ``"l1inf"`` returns the
        largest ``sqrt(||chi[f]||_1 ||chi[f]||_inf)`` over bins; both are upper
        bounds of the exact norm.
    return_info : bool
        Also return a dict with ``n_iter`` and ``converged``.
    """
    obs = X.observations
    if not np.any(obs):
        raise ValueError("spectral norm of an all-zero operator is zero; cannot normalize")

    if method == "max":
        est = float(np.sqrt(X.n_frames * X.n_channels) * np.abs(obs).max())
        info = {"n_iter": 0, "converged": True}
    elif method == "l1inf":
        mag = np.abs(obs)  # (M, T, F)
        col = mag.sum(axis=1).max(axis=0)  # max over m of sum over t
        row = mag.sum(axis=0).max(axis=0)  # max over t of sum over m
        est = float(np.sqrt(col * row).max())
        info = {"n_iter": 0, "converged": True}
    elif method == "power":
        v = np.ones(X.domain_shape, dtype=complex)
        v /= np.linalg.norm(v)
        prev = None
        converged = False
        n_iter = 0
        for n_iter in range(1, max_iter + 1):
            u = adjoint_apply(X, apply(X, v))
            rayleigh = float(np.real(np.vdot(v, u)))
            norm_u = np.linalg.norm(u)
            if norm_u == 0:
                break
            v = u / norm_u
            if prev is not None and abs(rayleigh - prev) <= tol * abs(rayleigh):
                converged = True
                break
            prev = rayleigh
        if not converged:
            warnings.warn(
                f"power method did not converge in {max_iter} iterations", RuntimeWarning, stacklevel=2
            )
        est = float(np.sqrt(max(rayleigh, 0.0)))
        info = {"n_iter": n_iter, "converged": converged}
    else:
        raise ValueError(f"unknown method {method!r}")

    if return_info:
        return est, info
    return est


def normalize(X: DataOperator, method: str = "power", **kwargs) -> DataOperator:
    """Divide the observations by the operator norm so that ``||X|| <= 1``."""
    norm = spectral_norm(X, method=method, **kwargs)
    if norm == 0:
        raise ValueError("cannot normalize an all-zero operator")
    return DataOperator(X.observations / norm, scale=X.scale * norm, n_sources=X.n_sources)


def whiten(x: np.ndarray, floor: float = 1e-12):
    """Per-bin PCA whitening.

    Parameters
    ----------
    x : ndarray of shape (n_channels, n_frames, n_bins)
    floor : float
        Eigenvalues below ``floor * largest`` are raised to that level before
        inversion, so rank-deficient bins are regularized instead of failing.

    Returns
    -------
    white : ndarray, same shape as ``x``
    transform : ndarray of shape (n_bins, n_channels, n_channels)
        ``white[:, t, f] = transform[f] @ x[:, t, f]``.
    """
    x = check_spectrogram(x)
    n_channels, n_frames, n_bins = x.shape
    if n_frames < n_channels:
        raise ValueError(f"whitening needs at least as many frames ({n_frames}) as channels ({n_channels})")
    xf = np.moveaxis(x, 2, 0)  # (F, M, T)
    cov = xf @ xf.conj().transpose(0, 2, 1) / n_frames
    eigval, eigvec = np.linalg.eigh(cov)
    top = eigval[:, -1:]
    lo = np.where(top > 0, floor * top, floor)
    n_floored = int(np.sum(eigval < lo))
    if n_floored:
        logger.debug("whiten: floored %d eigenvalues", n_floored)
    eigval = np.maximum(eigval, lo)
    transform = eigvec.conj().transpose(0, 2, 1) / np.sqrt(eigval)[:, :, np.newaxis]
    white = np.einsum("fij,jtf->itf", transform, x)
    return white, transform


def back_project(
    shat: np.ndarray,
    demix: np.ndarray,
    ref_channel: int = 0,
    return_flags: bool = False,
):
    """Rescale separated sources to their images at a reference microphone.

    ``out[n, t, f] = inv(W[f])[ref, n] * shat[n, t, f]``. Bins with a
    singular demixing matrix use the pseudo-inverse and are flagged.

    Parameters
    ----------
    shat : ndarray of shape (n_sources, n_frames, n_bins)
    demix : ndarray of shape (n_bins, n_sources, n_channels)
        The demixing matrices that produced ``shat`` from the mixture.
    ref_channel : int
        Zero-based reference microphone.
    """
    shat = np.asarray(shat)
    demix = np.asarray(demix)
    if demix.shape[0] != shat.shape[2] or demix.shape[1] != shat.shape[0]:
        raise ValueError(f"demixing stack {demix.shape} does not match estimates {shat.shape}")
    if not 0 <= ref_channel < demix.shape[2]:
        raise ValueError(f"reference channel {ref_channel} out of range")

    singular = np.zeros(demix.shape[0], dtype=bool)
    if demix.shape[1] == demix.shape[2]:
        cond = np.linalg.cond(demix)
        singular = ~np.isfinite(cond) | (cond > 1 / np.finfo(float).eps)
    inv = np.empty(demix.transpose(0, 2, 1).shape, dtype=np.result_type(demix, complex))
    regular = ~singular if demix.shape[1] == demix.shape[2] else np.zeros_like(singular)
    if np.any(regular):
        inv[regular] = np.linalg.inv(demix[regular])
    if np.any(~regular):
        inv[~regular] = np.linalg.pinv(demix[~regular])
    if np.any(singular):
        logger.warning("back_project: %d singular bins, used pseudo-inverse", int(singular.sum()))

    gains = inv[:, ref_channel, :]  # (F, N)
    out = shat * gains.T[:, np.newaxis, :]
    if return_flags:
        return out, singular
    return out

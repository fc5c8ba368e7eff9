"""Primal-dual splitting for determined BSS.

Each iteration updates the demixing stack ``w`` and a dual spectrogram ``y``::

    w~ = prox_logdet(w - mu1 * mu2 * X^H y, mu1)
    z  = y + X (2 w~ - w)
    y~ = z - S(z)
    (w, y) <- alpha (w~, y~) + (1 - alpha) (w, y)

where ``S`` is either the prox of ``P / mu2`` (exact mode) or ``M(z) * z``
for a time-frequency mask ``M`` (masking mode).
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ._validation import check_scalar
from .linops import DataOperator, adjoint_apply, apply, identity_stack, normalize
from .masks import mask_l1, mask_l21
from .prox import prox_l1, prox_l21, prox_logdet, shrink_factor

__all__ = [
    "DivergenceError",
    "SolverConfig",
    "SolverState",
    "Trace",
    "PenaltyProx",
    "objective",
    "penalty_value",
    "pds_step",
    "solve",
]


class DivergenceError(RuntimeError):
    """Raised when an iterate becomes non-finite; carries the partial trace."""

    def __init__(self, iteration: int, trace: "Trace | None" = None, where: str = ""):
        self.iteration = iteration
        self.trace = trace
        super().__init__(f"non-finite {where or 'iterate'} at iteration {iteration}")


class PenaltyProx:
    """Shrink step for an ``l1`` or ``l21`` penalty of weight ``lam``.

    Calling it with ``(z, step)`` returns ``prox_{step * lam * P}(z)`` for
    ``p = 1``. For ``p < 1`` the soft threshold is replaced by p-shrinkage
    of the entry (``l1``) or group (``l21``) magnitude, a non-convex
    generalization that has no closed-form penalty.
    """

    _PROX = {"l1": prox_l1, "l21": prox_l21}
    _MASK = {"l1": mask_l1, "l21": mask_l21}

    def __init__(self, penalty: str = "l21", lam: float = 1.0, p: float = 1.0):
        if penalty not in self._PROX:
            raise ValueError(f"penalty must be one of {sorted(self._PROX)}, got {penalty!r}")
        self.penalty = penalty
        self.lam = check_scalar(lam, "lam", min_val=0)
        self.p = check_scalar(p, "p", max_val=1)

    def _magnitude(self, z):
        if self.penalty == "l1":
            return np.abs(z)
        return np.linalg.norm(z, axis=-1, keepdims=True)

    def mask(self, z, step: float = 1.0):
        if self.p == 1.0:
            return self._MASK[self.penalty](z, self.lam * step)
        q = 2.0 - self.p
        factor = shrink_factor((self.lam * step) ** q, self._magnitude(np.asarray(z)) ** q)
        return np.broadcast_to(factor, np.shape(z))

    def __call__(self, z, step: float = 1.0):
        if self.p == 1.0:
            return self._PROX[self.penalty](z, self.lam * step)
        return self.mask(z, step) * z

    def __repr__(self):
        return f"PenaltyProx({self.penalty!r}, lam={self.lam}, p={self.p})"


@dataclass(frozen=True)
class SolverConfig:
    """Step sizes, relaxation, iteration count and the shrink step.

    Exactly one of ``prox`` and ``mask`` must be given. ``prox(z, step)``
    must return ``prox_{step * P}(z)``; ``mask(z)`` must return an array of
    mask values in ``[0, 1]``.
    """

    mu1: float = 1.0
    mu2: float = 1.0
    alpha: float = 1.0
    n_iter: int = 200
    prox: Callable | None = None
    mask: Callable | None = None

    def __post_init__(self):
        check_scalar(self.mu1, "mu1", min_val=0, include_min=False)
        check_scalar(self.mu2, "mu2", min_val=0, include_min=False)
        check_scalar(self.alpha, "alpha", min_val=0, max_val=2, include_min=False, include_max=False)
        if int(self.n_iter) < 0:
            raise ValueError(f"n_iter must be >= 0, got {self.n_iter}")
        if (self.prox is None) == (self.mask is None):
            raise ValueError("exactly one of prox and mask must be given")

    @property
    def mode(self) -> str:
        return "prox" if self.prox is not None else "mask"


@dataclass
class Trace:
    """Per-iteration diagnostics, append-only.

    ``records[k]`` describes the iterate after ``k + 1`` iterations.
    ``scale`` is the factor the observations were divided by.
    """

    records: list = field(default_factory=list)
    scale: float = 1.0

    def append(self, **record):
        self.records.append(record)

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, np.nan) for r in self.records], dtype=float)

    @property
    def objective(self) -> np.ndarray:
        return self.column("objective")

    def __len__(self):
        return len(self.records)


@dataclass(frozen=True)
class SolverState:
    """Primal and dual iterates; ``xw`` optionally caches ``X w`` to save one operator pass."""

    w: np.ndarray
    y: np.ndarray
    iteration: int = 0
    xw: np.ndarray | None = None


def penalty_value(shat: np.ndarray, penalty: str) -> float:
    if penalty == "l1":
        return float(np.abs(shat).sum())
    if penalty == "l21":
        return float(np.linalg.norm(shat, axis=-1).sum())
    raise ValueError(f"no closed-form objective for penalty {penalty!r}")


def objective(demix: np.ndarray, X: DataOperator, penalty: str = "l21", lam: float = 1.0,
              xw: np.ndarray | None = None) -> float:
    """``lam * P(X w) - sum_f log|det W[f]|``; ``+inf`` if some W[f] is singular.

    ``xw`` may pass a precomputed ``X w``.
    """
    demix = np.asarray(demix)
    data_term = lam * penalty_value(apply(X, demix) if xw is None else xw, penalty)
    if demix.shape[1] == demix.shape[2]:
        logabsdet = np.linalg.slogdet(demix)[1]
    else:
        logabsdet = np.log(np.linalg.svd(demix, compute_uv=False)).sum(axis=-1)
    if not np.all(np.isfinite(logabsdet)):
        return float("inf")
    return data_term - float(logabsdet.sum())


def pds_step(state: SolverState, X: DataOperator, cfg: SolverConfig, return_mask: bool = False):
    """One relaxed primal-dual iteration.

    Returns the next :class:`SolverState` (and the mask used in masking
    mode when ``return_mask``).
    """
    w, y = state.w, state.y
    xw = apply(X, w) if state.xw is None else state.xw
    w_tilde = prox_logdet(w - cfg.mu1 * cfg.mu2 * adjoint_apply(X, y), cfg.mu1)
    xw_tilde = apply(X, w_tilde)
    z = y + 2.0 * xw_tilde - xw  # X (2 w~ - w) by linearity
    if cfg.prox is not None:
        mask = None
        y_tilde = z - cfg.prox(z, 1.0 / cfg.mu2)
    else:
        mask = cfg.mask(z)
        y_tilde = z - mask * z
    a = cfg.alpha
    if a == 1.0:
        new_w, new_y, new_xw = w_tilde, y_tilde, xw_tilde
    else:
        new_w = a * w_tilde + (1.0 - a) * w
        new_y = a * y_tilde + (1.0 - a) * y
        new_xw = a * xw_tilde + (1.0 - a) * xw
    nxt = SolverState(new_w, new_y, state.iteration + 1, new_xw)
    if return_mask:
        return nxt, mask
    return nxt


def solve(
    x: np.ndarray,
    cfg: SolverConfig,
    *,
    penalty: str | None = None,
    lam: float = 1.0,
    normalize_method: str | None = "power",
    init: np.ndarray | None = None,
    callback: Callable | None = None,
    record: bool = True,
):
    """Run ``cfg.n_iter`` iterations from ``W[f] = I`` and ``y = 0``.

    Parameters
    ----------
    x : ndarray of shape (n_channels, n_frames, n_bins)
        Whitened observations.
    cfg : SolverConfig
    penalty : {"l1", "l21"}, optional
        Penalty whose objective ``lam * P(Xw) - sum log|det W|`` is recorded
        in the trace. Inferred from ``cfg.prox`` when it is a
        :class:`PenaltyProx`.
    lam : float
        Weight of the penalty in the recorded objective.
    normalize_method : str or None
        How the operator is normalized (see :func:`linops.spectral_norm`);
        ``None`` uses ``x`` as is.
    init : ndarray of shape (n_bins, n_sources, n_channels), optional
    callback : callable, optional
        Called as ``callback(iteration, w)`` after every iteration.
    record : bool
        Collect per-iteration diagnostics.

    Returns
    -------
    w : ndarray of shape (n_bins, n_sources, n_channels)
        Demixing stack for the normalized observations ``x / trace.scale``.
    trace : Trace
    """
    X = DataOperator(x)
    if normalize_method is not None:
        X = normalize(X, method=normalize_method)
    if cfg.mu1 * cfg.mu2 > 1.0 + 1e-12:
        warnings.warn(
            f"mu1 * mu2 = {cfg.mu1 * cfg.mu2:g} > 1 for a normalized operator; "
            "convergence is not guaranteed",
            RuntimeWarning,
            stacklevel=2,
        )
    if penalty is None and isinstance(cfg.prox, PenaltyProx) and cfg.prox.p == 1.0:
        penalty, lam = cfg.prox.penalty, cfg.prox.lam

    w = identity_stack(X.n_bins, X.n_sources, X.n_channels) if init is None else np.array(init, dtype=complex)
    state = SolverState(w, np.zeros(X.range_shape, dtype=complex))
    trace = Trace(scale=X.scale)

    for k in range(1, int(cfg.n_iter) + 1):
        t0 = time.perf_counter()
        state, mask = pds_step(state, X, cfg, return_mask=True)
        elapsed = time.perf_counter() - t0
        if not (np.all(np.isfinite(state.w)) and np.all(np.isfinite(state.y))):
            raise DivergenceError(k, trace)
        if record:
            rec = {"iteration": k, "w_norm": float(np.linalg.norm(state.w)), "time": elapsed}
            if penalty is not None:
                rec["objective"] = objective(state.w, X, penalty, lam, xw=state.xw)
            if mask is not None:
                rec.update(mask_mean=float(mask.mean()), mask_min=float(mask.min()), mask_max=float(mask.max()))
            trace.append(**rec)
        if callback is not None:
            callback(k, state.w)
    return state.w, trace


def with_params(cfg: SolverConfig, **changes) -> SolverConfig:
    return replace(cfg, **changes)

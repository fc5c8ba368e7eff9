"""SDR / SIR / SAR by time-invariant projection onto the reference signals.

For an estimate ``e`` and its assigned reference ``s_j``::

    s_target = <e, s_j> / ||s_j||^2 * s_j
    e_interf = P_S e - s_target        (P_S: projection onto span of all refs)
    e_artif  = e - P_S e

Infinite ratios are reported as :data:`DB_CAP`.
"""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass

import numpy as np

from .signal import Audio

__all__ = ["DB_CAP", "EvalReport", "decompose", "evaluate", "sdr_sir_sar"]

DB_CAP = 300.0


def _db(num: float, den: float) -> float:
    if num == 0:
        return -np.inf
    if den == 0:
        return DB_CAP
    return float(min(10.0 * np.log10(num / den), DB_CAP))


def _samples(x) -> np.ndarray:
    if isinstance(x, Audio):
        return x.samples
    x = np.asarray(x, dtype=float)
    return x[np.newaxis] if x.ndim == 1 else x


def decompose(estimate: np.ndarray, references: np.ndarray, index: int):
    """Split ``estimate`` into target, interference and artifact components."""
    refs = np.asarray(references, dtype=float)
    e = np.asarray(estimate, dtype=float)
    target_ref = refs[index]
    target = (e @ target_ref) / (target_ref @ target_ref) * target_ref
    coef, *_ = np.linalg.lstsq(refs.T, e, rcond=None)
    projected = refs.T @ coef
    return target, projected - target, e - projected


def sdr_sir_sar(estimate, references, index: int) -> tuple[float, float, float]:
    target, interf, artif = decompose(estimate, references, index)
    t2 = float(target @ target)
    return (
        _db(t2, float((interf + artif) @ (interf + artif))),
        _db(t2, float(interf @ interf)),
        _db(float((target + interf) @ (target + interf)), float(artif @ artif)),
    )


@dataclass
class EvalReport:
    """Per-source scores after resolving the permutation.

    ``permutation[j]`` is the index of the estimate assigned to reference
    ``j``; all score lists are indexed by reference.
    """

    sdr: list
    sir: list
    sar: list
    permutation: list
    sdr_improvement: list | None = None
    sdr_mixture: list | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def mean_sdr_improvement(self) -> float:
        return float(np.mean(self.sdr_improvement))


def evaluate(estimates, references, mixture=None) -> EvalReport:
    """Score estimates against references, choosing the best assignment.

    Parameters
    ----------
    estimates, references : Audio or ndarray of shape (n_sources, n_samples)
    mixture : Audio or ndarray, optional
        The unprocessed reference-microphone signal (1-D or first row used);
        when given, SDR improvements over it are reported.
    """
    est = _samples(estimates)
    refs = _samples(references)
    if est.shape != refs.shape:
        raise ValueError(f"estimates {est.shape} and references {refs.shape} differ in shape")
    n = refs.shape[0]
    if np.any(~np.any(refs, axis=1)):
        raise ValueError("a reference signal is all zeros")
    if n > 6:
        raise ValueError("brute-force permutation search supports at most 6 sources")

    scores = np.array([[sdr_sir_sar(est[i], refs, j) for j in range(n)] for i in range(n)])
    # scores[i, j] = (sdr, sir, sar) of estimate i against reference j
    best, best_val = None, -np.inf
    for perm in itertools.permutations(range(n)):
        val = np.mean([scores[perm[j], j, 1] for j in range(n)])
        if best is None or val > best_val:
            best, best_val = perm, val
    sdr = [float(scores[best[j], j, 0]) for j in range(n)]
    sir = [float(scores[best[j], j, 1]) for j in range(n)]
    sar = [float(scores[best[j], j, 2]) for j in range(n)]
    report = EvalReport(sdr, sir, sar, list(best))

    if mixture is not None:
        mix = _samples(mixture)[0]
        if mix.shape[0] != refs.shape[1]:
            raise ValueError("mixture length differs from references")
        base = [sdr_sir_sar(mix, refs, j)[0] for j in range(n)]
        report.sdr_mixture = base
        report.sdr_improvement = [s - b for s, b in zip(sdr, base)]
    return report

"""Time-domain separation: STFT -> separator -> ISTFT."""
from __future__ import annotations

from .estimators import BaseSeparator
from .metrics import EvalReport, evaluate
from .signal import Audio, StftConfig, istft, stft

__all__ = ["separate", "separate_and_evaluate"]


def separate(mixture: Audio, separator: BaseSeparator, stft_cfg: StftConfig | None = None,
             callback=None) -> Audio:
    """Separate a multichannel recording; returns one channel per source.

    ``separator`` is fitted in place, so its ``trace_`` and demixing
    matrices are available afterwards.
    """
    stft_cfg = StftConfig() if stft_cfg is None else stft_cfg
    spec = stft(mixture, stft_cfg)
    est = separator.fit(spec, callback=callback).transform(spec)
    return Audio(istft(est, stft_cfg, length=len(mixture)), mixture.sample_rate)


def separate_and_evaluate(mixture: Audio, references: Audio, separator: BaseSeparator,
                          stft_cfg: StftConfig | None = None) -> tuple[Audio, EvalReport]:
    """Separate and score against source images at the reference microphone."""
    estimates = separate(mixture, separator, stft_cfg)
    ref_mic = mixture.samples[separator.ref_channel]
    return estimates, evaluate(estimates, references, ref_mic)

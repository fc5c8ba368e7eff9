"""Determined blind source separation by primal-dual splitting and time-frequency masking."""
__version__ = "0.1.0"

from .bench import run_bench
from .config import BenchConfig, RunConfig
from .estimators import FDICA, HVA, BaseSeparator, LaplaceIVA, MaskingBSS, ModelBasedIVA, ProxBSS, WienerOnly, make_separator
from .io import read_wav, write_wav
from .linops import DataOperator, adjoint_apply, apply, back_project, normalize, spectral_norm, whiten
from .masks import HvaConfig, cosine_shrink_mask, hva_mask, mask_l1, mask_l21, mask_model_iva, wiener_like_mask
from .metrics import EvalReport, evaluate
from .mixgen import MixSpec, det2_harmonic, synthesize
from .pipeline import separate, separate_and_evaluate
from .prox import p_shrinkage, prox_l1, prox_l21, prox_logdet, prox_weighted_l2, social_shrinkage
from .signal import Audio, StftConfig, istft, stft
from .solver import DivergenceError, PenaltyProx, SolverConfig, SolverState, Trace, objective, pds_step, solve

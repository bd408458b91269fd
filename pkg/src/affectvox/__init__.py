"""Hurst-exponent and non-stationarity features for emotion recognition in speech."""

__version__ = "0.1.0"

from .alpha_gmm import AlphaGmmModel, alpha_log_likelihood, classify_sequence, train_alpha_gmm
from .emd import ImfSet, SiftConfig, decompose, eemd_decompose, emd_decompose, sift_once
from .evaluation import ClassifierConfig, ConfusionMatrix, FeatureConfig, run_evaluation
from .features import InsConfig, extract_hhhc, extract_hhhc_ins
from .hurst import HurstEstimate, estimate_hurst, extract_ph, hurst, wavelet_log_variances
from .ins import InsProfile, compute_ins, ins_profile, ins_vector_for_imfs, make_surrogate
from .signal_io import FeatureMatrix, Signal, load_wav, resample_to_8k, select_voiced
from .synth import fgn, synth_corpus

"""Diversified recommendation with personalized k-DPP sampling.

Set ``DPPREC_DISABLE_NUMBA=1`` to run every numeric kernel through the
pure-numpy fallback instead of numba.
"""

from ._accel import backend, backend_scope, set_backend
from .catalog import Catalog, InteractionRecord, Item, SynthConfig, UserProfile, generate_synthetic, ingest_catalog, ingest_users
from .embedding import ReductionModel, cosine, fit_reduction, project
from .errors import (
    ConfigError,
    DimensionError,
    DPPRecError,
    NumericalDegeneracyError,
    RankError,
    UndefinedSimilarityError,
    ValidationError,
)
from .kernel import EigenDecomposition, KernelFactor, QualityScores, build_kernel_factor, compute_quality_scores, dual_eigensystem, eig_sym
from .pipeline import PipelineConfig, RecommendationSet, recommend
from .sampler import KDPPSampler, SampleConfig, brute_force_k_dpp, greedy_map_select, sample_k_dpp

__version__ = "0.1.0"

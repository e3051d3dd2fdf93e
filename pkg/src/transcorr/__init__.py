"""Bias-corrected trans-ancestry genetic correlation from genetic-predicted traits.

A library and CLI for simulating paired two-population GWAS cohorts under a
polygenic model with population-specific block-diagonal LD, estimating the
genetic correlation from genetic-predicted traits, and correcting the
high-dimensional prediction-noise and LD-mismatch shrinkage via spectral
moments of the LD matrices (marginal route) or ridge resolvent traces
(reference-panel route).
"""

__version__ = "0.1.0"

from .blocks import BlockPartition, merge_ld_blocks, read_block_file, write_block_file
from .config import ExperimentConfig, load_config, parse_config
from .errors import (ConfigError, DataError, InfeasibleModelError,
                     NotPositiveDefiniteError, NumericalInconsistencyError,
                     SmallSampleWarning, StateError, TranscorrError)
from .estimators import (EffectEstimate, EstimationResult, VarianceInputs, VParams,
                         compute_v_params, convert_effect_correlation,
                         correct_marginal, correct_reference, marginal_summary_stats,
                         naive_correlation, predict_traits, ridge_adjust,
                         variance_corrected, variance_inputs, variance_naive)
from .harness import SummaryTable, estimate_from_files, run_experiment
from .ld import (CovarianceMatrix, build_ar_covariance, build_block_covariance,
                 estimate_covariance, matrix_sqrt, read_covariance, write_covariance)
from .moments import (DebiasedMoments, MomentEstimates, blockwise_moments,
                      debias_cross_trace, debias_sample_moments, product_moment,
                      read_moments, write_moments)
from .reproduce import biobank_moments, reproduce
from .shrinkage import (ShrinkageParams, marginal_limit, panel_limit,
                        shrinkage_curve, shrinkage_derivative, shrinkage_path)
from .simulate import (EffectModel, EffectPair, GenotypeMatrix, TraitVector,
                       sample_effect_pair, sample_genotypes, synthesize_traits)

"""Plaintext mathematics: condensation, tilting, surrogates, estimators, QP oracle."""

from .estimator import (effective_sample_size, estimate, estimate_or_fallback,
                        ratio_standard_error)
from .model import (CondensedQp, ConstraintSpec, LinearConstraints, MpcProblem,
                    PlantModel, build_constraints, build_prediction, condense_cost)
from .qp import QpResult, kkt_residuals, reference_qp_solve, solve_qp
from .rng import derive_seed, standard_normal
from .surrogate import (Surrogate, WeightRule, chebyshev_fit, horner, indicator_weight,
                        measure_delta, next_pow2, segment_sum, surrogate_score,
                        threshold_weight, violation_score)
from .tilt import (SampleBatch, TiltedGaussian, column_products, sample_tilted,
                   samples_from_noise, tilt)

__all__ = [
    "CondensedQp", "ConstraintSpec", "LinearConstraints", "MpcProblem", "PlantModel",
    "QpResult", "SampleBatch", "Surrogate", "TiltedGaussian", "WeightRule",
    "build_constraints", "build_prediction", "chebyshev_fit", "column_products", "condense_cost",
    "derive_seed", "effective_sample_size", "estimate", "estimate_or_fallback",
    "horner", "indicator_weight", "kkt_residuals", "measure_delta", "next_pow2", "ratio_standard_error",
    "reference_qp_solve", "sample_tilted", "samples_from_noise", "segment_sum", "solve_qp",
    "standard_normal", "surrogate_score", "threshold_weight", "tilt",
    "violation_score",
]

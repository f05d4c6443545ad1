"""Region-to-region acoustic transfer function interpolation.

Kernel ridge regression over source-receiver position pairs with
physics-constrained kernels: every kernel is built from plane-wave
superpositions, so interpolants satisfy the Helmholtz equation in both
arguments and acoustic reciprocity by construction. Directional weighting
functions (uniform, sunken-sphere, mixture of von Mises-Fisher lobes, and a
learned nonnegative residual) are tuned by minimizing a closed-form
leave-one-out error with analytic gradients.
"""

from .geometry import SPEED_OF_SOUND, FrequencyContext, PairSet, unit_vector
from .kernelcore import (BETA_MAX, DirectedWeighting, KernelModel,
                         NumericalError, ResidualWeighting, SumWeighting,
                         SunkenWeighting, UniformWeighting, cross_gram,
                         directed_weighting_for_axis, gram, gram_gradients,
                         kernel_vector, residual_weighting,
                         symmetrized_kernel)
from .hyperopt import (HyperState, OptimizerConfig, grad_eloo, optimize,
                       optimize_sunken, reduced_gradient_step, save_trace)
from .regress import (RegressionFit, fit, load_fit, loo_error,
                      loo_error_bruteforce, predict_full,
                      predict_reverberant, save_fit)
from .roomsim import (MeasurementSet, RoomConfig, atf, green,
                      image_sources, load_measurements, make_dataset,
                      reflection_from_t60, reverberant_atf,
                      save_measurements)
from .sphere import DirectionSet, integrate, lebedev, sample_ball, tdesign
from .harness import (ExperimentConfig, build_arrays, default_config,
                      export_field_slice, export_weighting, load_config,
                      nmse, run_experiment)

__version__ = "0.1.0"

__all__ = [
    "SPEED_OF_SOUND", "FrequencyContext", "PairSet", "unit_vector",
    "BETA_MAX", "DirectedWeighting", "KernelModel", "NumericalError",
    "ResidualWeighting", "SumWeighting", "SunkenWeighting",
    "UniformWeighting", "cross_gram", "directed_weighting_for_axis",
    "gram", "gram_gradients", "kernel_vector", "residual_weighting",
    "symmetrized_kernel",
    "HyperState", "OptimizerConfig", "grad_eloo", "optimize",
    "optimize_sunken", "reduced_gradient_step", "save_trace",
    "RegressionFit", "fit", "load_fit", "loo_error", "loo_error_bruteforce",
    "predict_full", "predict_reverberant", "save_fit",
    "MeasurementSet", "RoomConfig", "atf", "green", "image_sources",
    "load_measurements", "make_dataset", "reflection_from_t60",
    "reverberant_atf", "save_measurements",
    "DirectionSet", "integrate", "lebedev", "sample_ball", "tdesign",
    "ExperimentConfig", "build_arrays", "default_config",
    "export_field_slice", "export_weighting", "load_config", "nmse",
    "run_experiment",
]

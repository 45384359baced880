"""Radio map estimation from sparse spectrum observations.

A partially observed power map tensor (rows x cols x bands) is completed
as background + foreground: the background is low-rank across all three
unfoldings, the foreground holds sparse localized drops.  The package
ships the classical splitting solver, an unrolled trainable variant with
learned proximal mappers, simple interpolation baselines, a synthetic
scene generator, evaluation metrics, and bit-exact file formats behind
the `radiomap` command line tool.
"""

from .admm import AdmmHyperParams, AdmmResult, AdmmState, solve_admm, solve_halrtc
from .errors import (ConfigError, FormatError, InvalidArgumentError,
                     NumericalFailureError, RadioMapError)
from .metrics import EvalReport, cap_psnr, outage_error, psnr, rmse, sweep, zero_fill
from .propagation import (LdplParams, Scene, SceneSpec, generate_scene,
                          ldpl_interpolate, rbf_interpolate, sample_mask)
from .shrinkage import soft_threshold, svt
from .tensors import ObservationMask, fold, project, unfold
from .unrolled import MapperSpec, TrainConfig, UnrolledModel, infer, train

__version__ = "0.1.0"

__all__ = [
    "AdmmHyperParams", "AdmmResult", "AdmmState", "solve_admm", "solve_halrtc",
    "ConfigError", "FormatError", "InvalidArgumentError", "NumericalFailureError",
    "RadioMapError", "EvalReport", "cap_psnr", "outage_error", "psnr", "rmse",
    "sweep", "zero_fill", "LdplParams", "Scene", "SceneSpec", "generate_scene",
    "ldpl_interpolate", "rbf_interpolate", "sample_mask", "soft_threshold", "svt",
    "ObservationMask", "fold", "project", "unfold", "MapperSpec", "TrainConfig",
    "UnrolledModel", "infer", "train",
]

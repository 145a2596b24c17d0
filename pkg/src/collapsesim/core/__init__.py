from .constants import (CONST, GAMMA_CSL, LAMBDA0_QMUPL, LAMBDA_ADLER, LAMBDA_ADLER_LOW,
                        LAMBDA_CSL, LAMBDA_GRW, R_C, CollapseModelParams, ModelKind,
                        PhysicalConstants)
from .ensemble import MeanEstimate, binomial_sigma, default_workers, map_batches, mean_estimate
from .errors import (CollapseSimError, ContractError, DegenerateJumpError, DomainError,
                     GeometryError, InvalidArgumentError, NumericFailure, OutOfValidityError,
                     RunawayError, StepSizeError)
from .grid import (GaussianState, Grid, GridWavefunction, check_boundary, excess_kurtosis,
                   expectation_and_variance, make_gaussian_grid_state, overlap)
from .noise import GaussianStream, NoisePath, make_noise_path, stream_generator

__all__ = [
    "CONST", "GAMMA_CSL", "LAMBDA0_QMUPL", "LAMBDA_ADLER", "LAMBDA_ADLER_LOW", "LAMBDA_CSL", "LAMBDA_GRW",
    "R_C", "CollapseModelParams", "ModelKind", "PhysicalConstants",
    "MeanEstimate", "binomial_sigma", "default_workers", "map_batches", "mean_estimate",
    "CollapseSimError", "ContractError", "DegenerateJumpError", "DomainError", "GeometryError",
    "InvalidArgumentError", "NumericFailure", "OutOfValidityError", "RunawayError", "StepSizeError",
    "GaussianState", "Grid", "GridWavefunction", "check_boundary", "excess_kurtosis",
    "expectation_and_variance", "make_gaussian_grid_state", "overlap",
    "GaussianStream", "NoisePath", "make_noise_path", "stream_generator",
]

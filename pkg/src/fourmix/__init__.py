"""Density estimation by fitting Gaussian-Laplace mixtures to empirical characteristic functions."""

__version__ = "0.1.0"

from .ecf import EmpiricalCF, SampleSet, compute_ecf, empirical_cf
from .glmix import Bounds, EffectiveParams, MultiEffectiveParams, RawParams, load_model, save_model
from .grid import FourierGrid, FourierGridMulti, tensor_grid, uniform_grid
from .metrics import ErrorReport, error_report
from .train import TrainConfig, fit, fit_samples

__all__ = [
    "Bounds", "EffectiveParams", "EmpiricalCF", "ErrorReport", "FourierGrid", "FourierGridMulti",
    "MultiEffectiveParams", "RawParams", "SampleSet", "TrainConfig", "compute_ecf", "empirical_cf",
    "error_report", "fit", "fit_samples", "load_model", "save_model", "tensor_grid", "uniform_grid",
]

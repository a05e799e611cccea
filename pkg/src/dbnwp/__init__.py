"""Deep belief network toolkit for hour-ahead wind power forecasting."""

from .dataset import SampleSet, build_samples, parse_csv, synthesize
from .dbn import DbnArchitecture, DbnModel, FineTuneConfig, fit, predict
from .evaluation import ErrorTriple, metrics
from .rbm import CdConfig, RbmParams

__version__ = "0.1.0"

__all__ = [
    "CdConfig",
    "DbnArchitecture",
    "DbnModel",
    "ErrorTriple",
    "FineTuneConfig",
    "RbmParams",
    "SampleSet",
    "build_samples",
    "fit",
    "metrics",
    "parse_csv",
    "predict",
    "synthesize",
]

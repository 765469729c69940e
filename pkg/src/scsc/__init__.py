"""Supervised convolutional sparse coding: Fourier-domain ADMM solvers,
coordinate-descent training and evaluation tools."""

from .classifier import ClassifierParams, SampleSet
from .errors import (DegenerateLabelsError, FormatError, InvalidDimensionError,
                     InvalidLabelError, InvalidParameterError, NumericalError, SCSCError)
from .trainer import SolverConfig, TrainedModel, fit

__all__ = [
    "ClassifierParams", "SampleSet", "SolverConfig", "TrainedModel", "fit",
    "SCSCError", "InvalidDimensionError", "InvalidParameterError", "NumericalError",
    "DegenerateLabelsError", "FormatError", "InvalidLabelError",
]

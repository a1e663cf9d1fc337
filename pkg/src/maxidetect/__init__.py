"""Chi-square signal detection in the Gaussian sequence model with ill-posed operators."""

from .detectors import (
    Chebyshev,
    ConstantSet,
    ConstantTooSmall,
    DetectorConfig,
    ExplicitConstants,
    MonteCarloCalibration,
    c_max,
    c_min,
    resolve_constants,
    test_dp,
    test_ip,
)
from .model import (
    DEFAULT_GRID,
    DesignSchedule,
    DyadicBlock,
    EpsilonGrid,
    FiniteSupport,
    OperatorSpectrum,
    PowerDecay,
    RateSchedule,
    spike,
    zero_signal,
)

__version__ = "0.1.0"

__all__ = [
    "Chebyshev",
    "ConstantSet",
    "ConstantTooSmall",
    "DetectorConfig",
    "ExplicitConstants",
    "MonteCarloCalibration",
    "c_max",
    "c_min",
    "resolve_constants",
    "test_dp",
    "test_ip",
    "DEFAULT_GRID",
    "DesignSchedule",
    "DyadicBlock",
    "EpsilonGrid",
    "FiniteSupport",
    "OperatorSpectrum",
    "PowerDecay",
    "RateSchedule",
    "spike",
    "zero_signal",
]

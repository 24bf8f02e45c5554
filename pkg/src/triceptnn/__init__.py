"""Tricept 3-DoF parallel manipulator inverse kinematics and neural surrogates."""
from .dataset import Dataset, MinMaxNormalizer, NormalizationMap, generate, normalize, split
from .evaluation import EvalResult, evaluate
from .exceptions import TriceptError
from .kinematics import (
    DEFAULT_DOMAIN,
    DEFAULT_GEOMETRY,
    LegLengths,
    Pose,
    PoseDomain,
    TriceptGeometry,
    forward_kinematics,
    inverse_kinematics,
)
from .mlp import LevenbergMarquardtMLP, LmOptions, MlpModel
from .rbf import IncrementalRBF, RbfModel

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_DOMAIN",
    "DEFAULT_GEOMETRY",
    "Dataset",
    "EvalResult",
    "IncrementalRBF",
    "LegLengths",
    "LevenbergMarquardtMLP",
    "LmOptions",
    "MinMaxNormalizer",
    "MlpModel",
    "NormalizationMap",
    "Pose",
    "PoseDomain",
    "RbfModel",
    "TriceptError",
    "TriceptGeometry",
    "evaluate",
    "forward_kinematics",
    "generate",
    "inverse_kinematics",
    "normalize",
    "split",
]

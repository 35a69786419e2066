"""Trajectory simulation and Fisher information of sequential weak measurements
on an uncontrolled spin register."""

from .kernels import BACKEND
from .protocol import ProtocolParams, TrajectoryUnderflow, run_trajectory
from .states import DickeVector, SpinEnsembleSpec

__version__ = "0.1.0"

__all__ = ["BACKEND", "DickeVector", "ProtocolParams", "SpinEnsembleSpec", "TrajectoryUnderflow",
           "run_trajectory", "__version__"]

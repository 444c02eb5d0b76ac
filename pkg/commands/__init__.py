"""
Command-line subcommands of the toolkit.
"""

from .design import DesignCommand
from .fit import FitCommand
from .qkd import QkdSimCommand
from .simulate import SimulateCommand
from .sweep import SweepCommand

__all__ = ["DesignCommand", "FitCommand", "QkdSimCommand", "SimulateCommand", "SweepCommand"]

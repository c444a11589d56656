"""Tensor-model-parallel schedule simulator and planner."""

from tmpsim._core import *  # noqa: F401,F403
from tmpsim._core import __doc__  # noqa: F401

__version__ = "0.1.0"

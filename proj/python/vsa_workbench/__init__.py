"""Voltage security assessment workbench: power-flow labeling and optimizer comparison."""

from ._core import *  # noqa: F401,F403
from ._core import ALGORITHMS, VsaError

__all__ = [name for name in dir() if not name.startswith("_")]

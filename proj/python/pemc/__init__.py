"""Periodic single-layer economic MPC."""

from ._pemc import *  # noqa: F401,F403
from ._pemc import ballplate  # noqa: F401

__version__ = "0.1.0"

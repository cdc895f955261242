"""Interference and BER of carrier-sense mmWave networks with blockage."""

from ._core import *  # noqa: F401,F403
from ._core import __version__, NumericError, ValidationError  # noqa: F401

"""Flat import point for the forecasting protocol in :mod:`lvspill.ml`."""

from .ml import *  # noqa: F401,F403
from .ml import __all__  # noqa: F401

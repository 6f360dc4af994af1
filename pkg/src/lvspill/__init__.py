"""Liquidity/volatility spillover factors and leakage-safe market risk forecasting."""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]

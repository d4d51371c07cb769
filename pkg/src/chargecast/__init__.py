"""chargecast - probabilistic EV charging load forecasting with conditional diffusion."""

__version__ = "0.1.0"

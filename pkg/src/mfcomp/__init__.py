"""Multifractality of positive time series and its components."""

__version__ = "0.1.0"

"""Masked degradation-classification pre-training for image restoration, at desk scale."""

__version__ = "0.1.0"

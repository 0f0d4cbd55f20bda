"""Predict human decisions in strategic games from next-token log-probabilities and compare
base against aligned language models."""

__version__ = "0.1.0"

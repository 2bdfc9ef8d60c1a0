"""Run-time barren plateau analysis for variational quantum classifiers."""

__version__ = "0.1.0"

"""Distributional measures of phonosemantic alignment in a lexicon."""

__version__ = "0.1.0"

"""Unsupervised mining of language-exclusive concept clusters from multilingual corpora."""

__version__ = "0.1.0"

"""Survival-analysis re-ranking of collaborative-filtering course recommendations."""

__version__ = "0.1.0"

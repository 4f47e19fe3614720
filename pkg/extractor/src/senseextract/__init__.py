"""Turns text corpora into vector dumps for the sense induction pipeline."""

__version__ = "0.1.0"

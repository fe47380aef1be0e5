"""Kernel SVMs, transductive confidence, rule induction and probabilistic learners."""

__version__ = "0.1.0"
__author__ = "Learnkit Developers"
__email__ = "learnkit@example.com"

"""Fuzzy private set union: receiver learns X plus the sender points outside its balls."""

__version__ = "0.1.0"

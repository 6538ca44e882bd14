"""Dealer gamma-exposure structure, temporal obfuscation and LLM detection scoring."""

__version__ = "0.1.0"

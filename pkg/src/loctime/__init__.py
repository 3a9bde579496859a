"""Spectral and Monte Carlo tools for local times of Birkhoff sums over finite Markov shifts."""

__version__ = "0.1.0"

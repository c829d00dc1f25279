"""Orthogonal-polynomial asymptotics and Krylov iteration forecasts for
spiked sample covariance ensembles."""

__version__ = "0.1.0"

"""rategrid: spatio-temporal event-rate estimation.

Discretize a city into cells, bucket event timestamps into periodic or custom
time windows, aggregate arrival counts, and calibrate Poisson intensities by
penalized maximum likelihood (with or without covariates) using a projected
gradient method.
"""

__version__ = "0.1.0"

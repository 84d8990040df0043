"""Mean-square dwell-time analysis and synthesis for stochastic impulsive systems."""
__version__ = "0.1.0"

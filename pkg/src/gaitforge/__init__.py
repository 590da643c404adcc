"""GRF gait analysis: preprocessing, parameterization, discriminativity, classification."""

__version__ = "0.1.0"

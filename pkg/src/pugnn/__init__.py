"""PU-learning graph fraud detection on play-to-earn transaction networks."""

__version__ = "0.1.0"

"""Optimal adaptation paths, imitation-learned adaptation and playback simulation for HTTP adaptive streaming."""

__version__ = "0.1.0"

"""Discrete-TTI simulator of RAN slicing with two-timescale DQN control."""

__version__ = "0.1.0"

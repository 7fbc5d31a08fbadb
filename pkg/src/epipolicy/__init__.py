"""Lockdown- and vaccination-aware SIR calibration, a stringency/GDP model and
value-based reinforcement learning for daily stringency control."""

__version__ = "0.1.0"

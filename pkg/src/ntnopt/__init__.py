"""Integrated terrestrial + LEO satellite downlink simulator and resource optimizer."""

__version__ = "0.1.0"

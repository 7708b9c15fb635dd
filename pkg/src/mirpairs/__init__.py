"""Simulation and analysis toolkit for mid-infrared silicon photon-pair experiments."""

__version__ = "0.1.0"

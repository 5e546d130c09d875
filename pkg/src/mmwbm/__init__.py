"""Uplink beam management with hierarchical flat-top-beam codebooks for mmWave HBF."""

__version__ = "0.1.0"

"""Fock-space simulation and calibration of lossy MMI couplers and MZIs."""
__version__ = "0.1.0"

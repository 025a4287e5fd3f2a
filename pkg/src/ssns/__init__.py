"""Self-similar Navier-Stokes solutions: profiles, spectra, ancient solutions and localization."""

__version__ = "0.1.0"

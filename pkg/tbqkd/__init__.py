#!/usr/local/bin/env python
"""
tbqkd: simulation and finite-key analysis of time-bin QKD with a
quantum-dot single-photon source.
"""
__version__ = '0.1.0'
__short_version__ = '0.1'

# Add imports here
from tbqkd import utils, settings, optics, photostats, finitekey, montecarlo, sweeps, formats, reporters  # noqa: E402

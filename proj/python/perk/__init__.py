"""Dictionary-free MRI parameter estimation.

Simulation-trained kernel ridge regression with random Fourier features,
plus a grid-search baseline, Fisher/CRLB analysis, and digital phantoms.
"""

from ._core import *  # noqa: F401,F403

__version__ = "0.1.0"

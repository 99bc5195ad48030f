"""Two-fermion Feshbach gate in a double-well trap, in oscillator units (hbar*omega, a_ho, 1/omega)."""

from ._fbgate import *  # noqa: F401,F403
from ._fbgate import __doc__  # noqa: F401

__version__ = "0.1.0"

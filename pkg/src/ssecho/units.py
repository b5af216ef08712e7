"""Unit conventions.

Internally every frequency or rate is angular, in rad/us, and every time is in
us.  Files and configs carry linear frequencies in MHz; conversion happens only
through these helpers.
"""
import math

import numpy as np

TWO_PI = 2.0 * math.pi


def mhz_to_angular(f_mhz):
    """Linear frequency in MHz -> angular frequency in rad/us."""
    if np.ndim(f_mhz):
        return TWO_PI * np.asarray(f_mhz, dtype=float)
    return TWO_PI * float(f_mhz)


def angular_to_mhz(w):
    """Angular frequency in rad/us -> linear frequency in MHz."""
    if np.ndim(w):
        return np.asarray(w, dtype=float) / TWO_PI
    return float(w) / TWO_PI

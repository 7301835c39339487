"""Physical constants and the dB <-> linear conversions used across the package.

All internal arithmetic runs in SI units and linear power. dBm only appears at
file and command-line boundaries, and every conversion goes through here.
"""

import math

import numpy as np
from scipy import constants as const

C_LIGHT = const.c
HBAR = const.hbar
K_B = const.k
E_CHARGE = const.e

# Magnetic flux quantum h/2e in Wb.
PHI0 = const.h / (2 * const.e)
# Reduced flux quantum, L_J * I_C.
PHI0_RED = PHI0 / (2 * np.pi)

# BCS weak-coupling ratio Delta_0 / (k_B T_C).
BCS_GAP_RATIO = 1.75


def dbm_to_watt(p_dbm):
    return 1e-3 * 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0)


def watt_to_dbm(p_w):
    return 10.0 * np.log10(np.asarray(p_w, dtype=float) / 1e-3)


def db_to_ratio(db):
    """Power ratio for a level difference in dB."""
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def ratio_to_db(ratio):
    return 10.0 * np.log10(np.asarray(ratio, dtype=float))


def snr_db_to_sigma(snr_db, amplitude=1.0):
    """Per-quadrature Gaussian sigma for a power SNR in dB.

    SNR is |S|^2 over the total complex noise power 2 sigma^2.
    """
    return amplitude * 10.0 ** (-snr_db / 20.0) / math.sqrt(2.0)


def gap_from_tc(tc):
    """Superconducting gap in eV from T_C in K (Delta_0 = 1.75 k_B T_C)."""
    return BCS_GAP_RATIO * K_B * tc / E_CHARGE

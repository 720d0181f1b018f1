"""dBm conversions under the 1-ohm convention (V**2 == W)."""

from __future__ import annotations

import numpy as np


def dbm_to_watt(dbm):
    return 1e-3 * np.power(10.0, np.asarray(dbm, dtype=float) / 10.0)


def watt_to_dbm(watt):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(watt, dtype=float) / 1e-3)

"""Outward-rounded interval helpers used by enclosures and distance bounds.

Python exposes no directed-rounding control, so every operation that could
round toward the interval interior is followed by a fixed number of ULP
nudges outward (NUDGE_ULPS).  Dyadic grid data is exact in binary floating
point, so the nudges only matter for genuinely inexact quantities; they are
one-sided, hence always conservative.
"""

import numpy as np

# Outward inflation applied after inexact arithmetic, in units in the last place.
NUDGE_ULPS = 4

_TWO_PI = 2.0 * np.pi


def nudge_down(x, ulps=NUDGE_ULPS):
    """Largest-representable lower bound: x nudged `ulps` steps toward -inf."""
    out = np.asarray(x, dtype=float).copy()
    for _ in range(ulps):
        out = np.nextafter(out, -np.inf)
    return out


def nudge_up(x, ulps=NUDGE_ULPS):
    """Smallest-representable upper bound: x nudged `ulps` steps toward +inf."""
    out = np.asarray(x, dtype=float).copy()
    for _ in range(ulps):
        out = np.nextafter(out, np.inf)
    return out


def widen(lo, hi, ulps=NUDGE_ULPS):
    """Outward-rounded copy of an interval vector (lo, hi)."""
    return nudge_down(lo, ulps), nudge_up(hi, ulps)


def mat_interval(mat, lo, hi):
    """Enclosure of {M x : x in [lo, hi]} as (lo', hi'), outward rounded.

    Splits M into positive and negative parts so each output bound is a
    single dot product; exact when M and the bounds are small integers or
    dyadics, outward-nudged otherwise.
    """
    m = np.asarray(mat, dtype=float)
    pos = np.clip(m, 0.0, None)
    neg = np.clip(m, None, 0.0)
    out_lo = pos @ np.asarray(lo, float) + neg @ np.asarray(hi, float)
    out_hi = pos @ np.asarray(hi, float) + neg @ np.asarray(lo, float)
    return widen(out_lo, out_hi)


def sin_range(lo, hi):
    """Enclosure of {sin(t) : t in [lo, hi]} (scalar interval, radians)."""
    lo = float(lo)
    hi = float(hi)
    if hi - lo >= _TWO_PI:
        return -1.0, 1.0
    s_lo = min(np.sin(lo), np.sin(hi))
    s_hi = max(np.sin(lo), np.sin(hi))
    # Peak at pi/2 + 2*pi*k inside [lo, hi] forces the max to 1; trough likewise.
    k_hi = np.ceil((lo - np.pi / 2.0) / _TWO_PI)
    if np.pi / 2.0 + _TWO_PI * k_hi <= hi:
        s_hi = 1.0
    k_lo = np.ceil((lo + np.pi / 2.0) / _TWO_PI)
    if -np.pi / 2.0 + _TWO_PI * k_lo <= hi:
        s_lo = -1.0
    return max(-1.0, float(nudge_down(s_lo))), min(1.0, float(nudge_up(s_hi)))

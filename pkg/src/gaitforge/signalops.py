"""Exact calculus on uniformly sampled signals under linear interpolation.

Stance waveforms are stored as 1000 samples and treated everywhere as the
piecewise-linear function through those samples. Integrals, level crossings
and sign durations below are exact for that function, which is what makes
the closed-form oracles in the test suite meaningful.
"""

import numpy as np


def integrate(y, dt, t_end=None):
    """Trapezoid integral of the sampled signal from t=0 to t_end.

    ``t_end`` may fall between samples; the partial cell is integrated
    exactly. Defaults to the full support (len(y)-1)*dt.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    total_t = (n - 1) * dt
    if t_end is None or t_end >= total_t:
        return float(np.trapz(y, dx=dt))
    if t_end <= 0.0:
        return 0.0
    pos = t_end / dt
    k = int(pos)
    frac = pos - k
    full = float(np.trapz(y[: k + 1], dx=dt))
    if frac == 0.0:
        return full
    y_at = y[k] + frac * (y[k + 1] - y[k])
    return full + 0.5 * (y[k] + y_at) * frac * dt


def integrate_between(y, dt, t_start, t_end):
    """Exact integral over [t_start, t_end]."""
    return integrate(y, dt, t_end) - integrate(y, dt, t_start)


def positive_negative_integrals(y, dt):
    """(integral of max(y,0), integral of min(y,0)), splitting cells at zero crossings."""
    y0 = np.asarray(y[:-1], dtype=float)
    y1 = np.asarray(y[1:], dtype=float)
    both_pos = (y0 >= 0) & (y1 >= 0)
    both_neg = (y0 <= 0) & (y1 <= 0)
    area = 0.5 * (y0 + y1) * dt
    pos = np.where(both_pos, area, 0.0)
    neg = np.where(both_neg, area, 0.0)
    # mixed-sign cells: the chord crosses zero at fraction f = y0/(y0-y1)
    mixed = ~(both_pos | both_neg)
    if np.any(mixed):
        a, b = y0[mixed], y1[mixed]
        f = a / (a - b)
        tri_a = 0.5 * a * f * dt
        tri_b = 0.5 * b * (1.0 - f) * dt
        pos_m = np.where(a > 0, tri_a, tri_b)
        neg_m = np.where(a > 0, tri_b, tri_a)
        pos_part = np.zeros_like(pos)
        neg_part = np.zeros_like(neg)
        pos_part[mixed] = pos_m
        neg_part[mixed] = neg_m
        pos = pos + pos_part
        neg = neg + neg_part
    return float(pos.sum()), float(neg.sum())


def sign_durations(y, dt):
    """(duration y<0, duration y>0) of the PL interpolant; exact crossing split."""
    y0 = np.asarray(y[:-1], dtype=float)
    y1 = np.asarray(y[1:], dtype=float)
    neg = np.zeros_like(y0)
    pos = np.zeros_like(y0)
    both_neg = (y0 < 0) & (y1 <= 0) | (y0 <= 0) & (y1 < 0)
    both_pos = (y0 > 0) & (y1 >= 0) | (y0 >= 0) & (y1 > 0)
    neg[both_neg] = dt
    pos[both_pos] = dt
    mixed = (y0 * y1) < 0
    if np.any(mixed):
        a, b = y0[mixed], y1[mixed]
        f = a / (a - b)
        first = f * dt
        second = (1.0 - f) * dt
        neg[mixed] = np.where(a < 0, first, second)
        pos[mixed] = np.where(a > 0, first, second)
    return float(neg.sum()), float(pos.sum())


def first_reach_time(y, dt, level, start_index=0, rising=True):
    """Time at which the PL signal first reaches ``level`` from start_index on.

    For ``rising`` the first sample at/above the level is located (crossing
    interpolated within its cell); for falling, at/below. Returns the time of
    ``start_index`` itself when the condition already holds there, and None
    when the level is never reached.
    """
    y = np.asarray(y, dtype=float)
    seg = y[start_index:]
    hit = seg >= level if rising else seg <= level
    idx = np.flatnonzero(hit)
    if idx.size == 0:
        return None
    k = int(idx[0])
    if k == 0:
        return start_index * dt
    a, b = seg[k - 1], seg[k]
    frac = (level - a) / (b - a)
    return (start_index + k - 1 + frac) * dt


def upward_zero_crossing(y, lo, hi):
    """First negative-to-positive zero crossing index (fractional) in [lo, hi].

    Scans cells k -> k+1 for y[k] <= 0 < y[k+1] starting at ``lo``; the
    crossing position is linearly interpolated. Returns None when no such
    crossing exists.
    """
    y = np.asarray(y, dtype=float)
    y0 = y[lo:hi]
    y1 = y[lo + 1 : hi + 1]
    hit = (y0 <= 0) & (y1 > 0)
    idx = np.flatnonzero(hit)
    if idx.size == 0:
        return None
    k = int(idx[0])
    a, b = y0[k], y1[k]
    frac = 0.0 if a == 0.0 else (0.0 - a) / (b - a)
    return lo + k + frac


def argmax_window(y, lo, hi):
    """(value, index) of the maximum over the inclusive window; earliest tie wins."""
    win = np.asarray(y[lo : hi + 1], dtype=float)
    k = int(np.argmax(win))
    return float(win[k]), lo + k


def argmin_window(y, lo, hi):
    """(value, index) of the minimum over the inclusive window; earliest tie wins."""
    win = np.asarray(y[lo : hi + 1], dtype=float)
    k = int(np.argmin(win))
    return float(win[k]), lo + k

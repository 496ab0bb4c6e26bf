"""Compensated accumulation primitives for the prefix/suffix passes.

The evaluators sum many products of probabilities; Neumaier's variant of
Kahan summation keeps the running error at a few ulp so that exact equality
cases survive checks at 1e-12 and tighter.
"""
from __future__ import annotations

import numpy as np


def comp_sum(values) -> float:
    """Compensated sum of a 1-d array."""
    s = 0.0
    c = 0.0
    for v in np.asarray(values, dtype=float).ravel().tolist():
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


def prefix_exclusive(values) -> np.ndarray:
    """out[i] = values[0] + ... + values[i-1]; out[0] = 0."""
    vals = np.asarray(values, dtype=float).ravel().tolist()
    out = np.empty(len(vals))
    s = 0.0
    c = 0.0
    for i, v in enumerate(vals):
        out[i] = s + c
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return out


def suffix_exclusive(values) -> np.ndarray:
    """out[i] = values[i+1] + ... + values[-1]; out[-1] = 0."""
    vals = np.asarray(values, dtype=float).ravel().tolist()
    n = len(vals)
    out = np.empty(n)
    s = 0.0
    c = 0.0
    for i in range(n - 1, -1, -1):
        out[i] = s + c
        v = vals[i]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return out

"""Wrapping helpers for angular quantities."""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_two_pi(x):
    """Wrap angles into [0, 2*pi). Idempotent."""
    out = np.mod(x, TWO_PI)
    # np.mod rounds tiny negatives up to 2*pi itself; fold that back to 0.
    return np.where(out >= TWO_PI, 0.0, out)


def wrap_pi(x):
    """Wrap angular differences into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), TWO_PI)

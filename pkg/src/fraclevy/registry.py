"""Named built-in data functions for problem setup and the config file.

Keeping complement data to a small registry of analytically understood shapes
(zero, one, indicator, power, exponential decay) keeps the growth-envelope
checks sound: each builder declares the envelope its function actually
satisfies.
"""

from __future__ import annotations

import math

import numpy as np

from .operators import ExteriorData

__all__ = [
    "exterior_zero",
    "exterior_one",
    "exterior_indicator",
    "exterior_power",
    "exterior_exp_decay",
    "EXTERIOR_BUILDERS",
    "forcing_builder",
    "profile_builder",
    "FORCING_NAMES",
]


def _radius(point) -> float:
    if np.isscalar(point):
        return abs(point)
    return math.hypot(*point)


def exterior_zero(**kw) -> ExteriorData:
    """g identically zero (absorbing data)."""
    return ExteriorData(lambda point, t: 0.0, "polynomial", **kw)


def exterior_one(**kw) -> ExteriorData:
    """g identically one."""
    return ExteriorData(lambda point, t: 1.0, "polynomial", **kw)


def exterior_indicator(lo: float, hi: float, **kw) -> ExteriorData:
    """Indicator of the interval [lo, hi); half-open so partitions tile."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got ({lo}, {hi})")

    def ev(point, t):
        x = point if np.isscalar(point) else point[0]
        return 1.0 if lo <= x < hi else 0.0

    pts = tuple(p for p in (lo, hi) if math.isfinite(p))
    return ExteriorData(ev, "polynomial", breakpoints=pts, **kw)


def exterior_power(p: float, **kw) -> ExteriorData:
    """g(X) = |X|^p; admissible only below the operator order."""
    return ExteriorData(lambda point, t: _radius(point) ** p, "polynomial", **kw)


def exterior_exp_decay(c: float, **kw) -> ExteriorData:
    """g(X) = exp(-c |X|), c > 0."""
    if c <= 0:
        raise ValueError(f"decay rate must be positive, got {c}")
    return ExteriorData(lambda point, t: math.exp(-c * _radius(point)),
                        "polynomial", **kw)


EXTERIOR_BUILDERS = {
    "zero": exterior_zero,
    "one": exterior_one,
    "indicator": exterior_indicator,
    "power": exterior_power,
    "exp-decay": exterior_exp_decay,
}


def forcing_builder(name: str, params: tuple[float, ...] = ()):
    """Named forcing/profile f(x) -> array, vectorized over grid nodes."""
    if name == "zero":
        return lambda x, t=0.0: np.zeros_like(np.asarray(x, dtype=float))
    if name == "one":
        return lambda x, t=0.0: np.ones_like(np.asarray(x, dtype=float))
    if name == "indicator":
        lo, hi = params
        return lambda x, t=0.0: ((np.asarray(x) >= lo) & (np.asarray(x) < hi)) * 1.0
    if name == "power":
        (p,) = params
        return lambda x, t=0.0: np.abs(np.asarray(x, dtype=float)) ** p
    if name == "exp-decay":
        (c,) = params
        return lambda x, t=0.0: np.exp(-c * np.abs(np.asarray(x, dtype=float)))
    raise KeyError(f"unknown builtin {name!r}")


FORCING_NAMES = ("zero", "one", "indicator", "power", "exp-decay")

# initial profiles share the forcing registry
profile_builder = forcing_builder

"""Special functions, operator coefficients, and Fourier symbols.

Everything here is a pure scalar function; the rest of the package builds on
these. The two operator families are

* the fractional Laplacian of order ``beta`` in dimension ``n``, with kernel
  coefficient ``frac_lap_coeff`` and Fourier multiplier ``-|k|**beta``, and
* its exponentially tempered counterpart with tempering rate ``lambda``,
  coefficient ``tempered_coeff`` and a closed-form multiplier built from the
  Gauss hypergeometric function.

``tempered_coeff`` is independent of the tempering rate and changes sign at
``beta = 1`` (through the gamma function at ``-beta``), so the tempered kernel
carries a positive weight only for ``beta < 1``.  Callers that rely on a
positive kernel must check the sign themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp

__all__ = [
    "SymbolQuery",
    "gamma",
    "gauss_2f1",
    "frac_lap_coeff",
    "tempered_coeff",
    "fractional_symbol",
    "tempered_symbol",
    "upper_incomplete_gamma",
]

_MAX_SERIES_TERMS = 2000


class HypergeometricError(ArithmeticError):
    """Raised when the 2F1 evaluation cannot converge for the given inputs."""


def gamma(x: float) -> float:
    """Euler gamma function, rejecting the poles at 0, -1, -2, ...

    Backed by scipy's Lanczos-type implementation; accurate to better than
    1e-12 relative for |x| <= 20.
    """
    if x <= 0 and x == math.floor(x):
        raise ValueError(f"gamma pole at x={x}")
    return float(sp.gamma(x))


def _gauss_2f1_series(a: float, b: float, c: float, z: float) -> float:
    """Plain power series, reliable for |z| <= 1/2."""
    term = 1.0
    total = 1.0
    for m in range(_MAX_SERIES_TERMS):
        term *= (a + m) * (b + m) / ((c + m) * (m + 1.0)) * z
        total += term
        if abs(term) <= 1e-17 * max(1.0, abs(total)):
            return total
    raise HypergeometricError(
        f"2F1 series did not converge for a={a}, b={b}, c={c}, z={z}"
    )


def gauss_2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric function 2F1(a, b; c; z) for real z < 1.

    Evaluation regions:

    * ``z in [0, 1/2]``   -- power series;
    * ``z < 0``           -- Pfaff transformation onto ``z/(z-1) in (0, 1)``;
    * ``z in (1/2, 1)``   -- connection formula in ``1 - z``.

    The connection formula requires ``c - a - b`` non-integer; integer cases
    (log-type) are outside the supported range and raise
    ``HypergeometricError``.  ``c`` must not be a non-positive integer.
    """
    if c <= 0 and c == math.floor(c):
        raise ValueError(f"2F1 undefined for non-positive integer c={c}")
    if z >= 1.0:
        raise ValueError(f"2F1 requires z < 1, got z={z}")

    if z == 0.0:
        return 1.0
    if z < 0.0:
        # Pfaff: 2F1(a,b;c;z) = (1-z)^(-a) 2F1(a, c-b; c; z/(z-1))
        w = z / (z - 1.0)
        return (1.0 - z) ** (-a) * _gauss_2f1_series(a, c - b, c, w)
    if z <= 0.5:
        return _gauss_2f1_series(a, b, c, z)

    s = c - a - b
    if s == math.floor(s):
        raise HypergeometricError(
            f"connection formula needs non-integer c-a-b, got {s} "
            f"(a={a}, b={b}, c={c})"
        )
    w = 1.0 - z
    first = (
        gamma(c) * gamma(s) / (gamma(c - a) * gamma(c - b))
        * _gauss_2f1_series(a, b, 1.0 - s, w)
    )
    second = (
        w ** s * gamma(c) * gamma(-s) / (gamma(a) * gamma(b))
        * _gauss_2f1_series(c - a, c - b, 1.0 + s, w)
    )
    return first + second


def frac_lap_coeff(n: int, beta: float) -> float:
    """Kernel normalization of the fractional Laplacian in dimension n.

    Chosen so that the singular integral has Fourier multiplier -|k|**beta.
    Positive for every admissible (n, beta); diverges as beta -> 2.
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if not 0.0 < beta < 2.0:
        raise ValueError(f"order must lie in (0, 2), got beta={beta}")
    return (
        beta * gamma((n + beta) / 2.0)
        / (2.0 ** (1.0 - beta) * math.pi ** (n / 2.0) * gamma(1.0 - beta / 2.0))
    )


def tempered_coeff(n: int, beta: float) -> float:
    """Kernel normalization of the tempered fractional Laplacian.

    Equals -Gamma(n/2) / (2 pi^(n/2) Gamma(-beta)).  Does not depend on the
    tempering rate.  Sign: positive for beta in (0,1), negative for beta in
    (1,2), because Gamma(-beta) changes sign there.  beta = 1 is a pole and is
    rejected.
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if not 0.0 < beta < 2.0 or beta == 1.0:
        raise ValueError(
            f"tempered order must lie in (0,1) or (1,2), got beta={beta}"
        )
    return -gamma(n / 2.0) / (2.0 * math.pi ** (n / 2.0) * gamma(-beta))


@dataclass(frozen=True)
class SymbolQuery:
    """Point query for a Fourier multiplier.

    Attributes:
        n: spatial dimension, >= 1.
        beta: operator order; (0,2) for the fractional symbol, excluding 1
            for the tempered one.
        lam: tempering rate, >= 0 (0 means pure fractional).
        k: wavenumber magnitude, >= 0.
    """

    n: int
    beta: float
    lam: float
    k: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be >= 1, got {self.n}")
        if not 0.0 < self.beta < 2.0:
            raise ValueError(f"order must lie in (0, 2), got {self.beta}")
        if self.lam < 0.0:
            raise ValueError(f"tempering must be >= 0, got {self.lam}")
        if self.lam > 0.0 and self.beta == 1.0:
            raise ValueError("tempered symbol is undefined at beta = 1")
        if self.k < 0.0:
            raise ValueError(f"wavenumber magnitude must be >= 0, got {self.k}")


def fractional_symbol(q: SymbolQuery) -> float:
    """Multiplier of the fractional Laplacian: -|k|**beta."""
    if q.lam != 0.0:
        raise ValueError("fractional symbol requires lam = 0")
    return -(q.k ** q.beta)


def tempered_symbol(q: SymbolQuery) -> float:
    """Multiplier of the tempered fractional Laplacian.

    Returns ``lam**beta - (lam^2 + k^2)^(beta/2) * 2F1(-beta/2,
    (n+beta-1)/2; n/2; k^2/(lam^2+k^2))``, which is exactly the Fourier
    transform of the tempered singular-integral operator normalized by
    ``tempered_coeff``.  Vanishes at k = 0 (probability conservation).

    Note the lam -> 0 limit is ``-cos(pi*beta/2) * |k|**beta``, not
    ``-|k|**beta``: the pure fractional operator uses a different
    normalizing constant, which is why lam = 0 queries are rejected here.
    """
    if q.lam <= 0.0:
        raise ValueError("tempered symbol requires lam > 0; "
                         "use fractional_symbol for the untempered operator")
    if q.beta == 1.0:
        raise ValueError("tempered symbol is undefined at beta = 1")
    if q.k == 0.0:
        return 0.0
    lam2 = q.lam * q.lam
    k2 = q.k * q.k
    z = k2 / (lam2 + k2)
    f = gauss_2f1(-q.beta / 2.0, (q.n + q.beta - 1.0) / 2.0, q.n / 2.0, z)
    return q.lam ** q.beta - (lam2 + k2) ** (q.beta / 2.0) * f


def upper_incomplete_gamma(s: float, x) -> float | np.ndarray:
    """Unnormalized upper incomplete gamma for s > -2, s not in {0, -1}.

    Negative non-integer s is reduced to positive s by the recurrence
    ``Gamma(s, x) = (Gamma(s+1, x) - x^s e^(-x)) / s``, which is what the
    tempered kernel's cell weights and tail integrals need (s = -beta).
    Accepts scalar or array x > 0.
    """
    if s <= -2.0 or s in (0.0, -1.0):
        raise ValueError(f"supported range is s in (-2, inf) minus {{0,-1}}, got {s}")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("x must be positive")
    if s > 0.0:
        out = sp.gammaincc(s, x) * sp.gamma(s)
    else:
        out = (upper_incomplete_gamma(s + 1.0, x) - x ** s * np.exp(-x)) / s
    return float(out) if out.ndim == 0 else out

"""Logarithm of the exponentially scaled modified Bessel function.

``log_scaled_bessel(v, x) = ln(exp(-x) * I_v(x))``. The Delta-rho matrix needs
products like ``sqrt(I_{2|q|} I_{2|q'|}) * exp(-x)`` for orders in the
thousands, where I_v itself overflows and exp(-x) I_v underflows.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, ive

from .errors import DomainError

# below this, ive() loses relative precision to subnormals
_IVE_FLOOR = 1e-290

# Debye polynomials u_k(t) for the uniform large-order expansion, as
# (coefficients of t^j ascending, denominator).
_DEBYE = (
    ((0, 3, 0, -5), 24.0),
    ((0, 0, 81, 0, -462, 0, 385), 1152.0),
    ((0, 0, 0, 30375, 0, -369603, 0, 765765, 0, -425425), 414720.0),
    ((0, 0, 0, 0, 4465125, 0, -94121676, 0, 349922430, 0, -446185740, 0, 185910725),
     39813120.0),
)


def _log_series(v: float, x: float) -> float:
    # I_v(x) = (x/2)^v / Gamma(v+1) * sum_k (x^2/4)^k / (k! (v+1)_k)
    y = 0.25 * x * x
    term, total, k = 1.0, 1.0, 0
    while True:
        k += 1
        term *= y / (k * (v + k))
        total += term
        if term < 1e-17 * total:
            break
        if k > 10_000:  # pragma: no cover - guarded by the branch condition
            break
    return v * math.log(0.5 * x) - gammaln(v + 1.0) + math.log(total) - x


def _log_debye(v: float, x: float) -> float:
    z = x / v
    root = math.sqrt(1.0 + z * z)
    t = 1.0 / root
    # v*eta - x written to avoid cancellation when z is large
    eta_minus = root + math.log(z / (1.0 + root)) - z
    corr, vk = 1.0, 1.0
    for coeffs, denom in _DEBYE:
        vk *= v
        corr += np.polyval(coeffs[::-1], t) / denom / vk
    return v * eta_minus - 0.5 * math.log(2.0 * math.pi * v) - 0.25 * math.log1p(z * z) + math.log(corr)


def log_scaled_bessel(order: float, x: float) -> float:
    """Return ``ln(exp(-x) * I_order(x))`` for ``order >= 0`` and ``x > 0``."""
    if not x > 0:
        raise DomainError(f"x must be positive, got {x}")
    if order < 0:
        raise DomainError(f"order must be non-negative, got {order}")
    val = float(ive(order, x))
    if val > _IVE_FLOOR and math.isfinite(val):
        return math.log(val)
    if 0.25 * x * x < order + 1.0 or order < 30:
        return _log_series(float(order), x)
    return _log_debye(float(order), x)


def log_scaled_bessel_orders(orders, x: float) -> np.ndarray:
    """Vectorised :func:`log_scaled_bessel` over an array of orders."""
    orders = np.asarray(orders, dtype=float)
    if not x > 0:
        raise DomainError(f"x must be positive, got {x}")
    vals = ive(orders, x)
    out = np.empty_like(orders)
    ok = (vals > _IVE_FLOOR) & np.isfinite(vals)
    out[ok] = np.log(vals[ok])
    for i in np.flatnonzero(~ok):
        out[i] = log_scaled_bessel(orders[i], x)
    return out

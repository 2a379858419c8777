"""Scalar kernels used by the coordinate derivative formulas.

Nine kernels (eq1..eq9) plus the derivatives of eq1/eq2 they are built
from. All have removable singularities at 0 and blow up at pi, so every
evaluation is split at a seam ``eps_theta``: a truncated Taylor series
below, a cancellation-free rearrangement of the closed form above.
The series coefficients and the trig recombinations of the numerators
are derived in docs/kernel_series.md.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .errors import DomainError

DEFAULT_EPS_THETA = 1e-3
DEFAULT_EPS_PI = 1e-9

# numerators switch from their own power series to direct trig here;
# both routes carry ~1e-15 relative error at this point
_NUMERATOR_CUT = 0.8
_NUMERATOR_TERMS = 24


class KernelId(enum.Enum):
    EQ1 = "eq1"
    EQ2 = "eq2"
    EQ3 = "eq3"
    EQ4 = "eq4"
    EQ5 = "eq5"
    EQ6 = "eq6"
    EQ7 = "eq7"
    EQ8 = "eq8"
    EQ9 = "eq9"


def _fact(n):
    return math.factorial(n)


# Entire numerators as sine/cosine recombinations; coefficients of the
# power series are exact rationals evaluated once at import.
#   sc_minus_x(x)  = sin(x)cos(x) - x            = sin(2x)/2 - x
#   s_minus_xc(x)  = sin(x) - x cos(x)
#   num_d1(x)      = -2 sin^3(x) - 3 cos(x)(sin(x)cos(x) - x)
#                  = -(9/4) sin(x) - (1/4) sin(3x) + 3x cos(x)
#   num_q4(x)      = 2 cos(x) sin^3(x) + 3 (sin(x)cos(x) - x)
#                  = 2 sin(2x) - sin(4x)/4 - 3x
#   num_q5(x)      = cos(x)sin^2(x)(1 - 2cos(x)) - 2cos^2(x) + 2cos(x)
#                  = (9/4)cos(x) - cos(2x) - (1/4)cos(3x) + (1/4)cos(4x) - 5/4

_C_SC_MINUS_X = [(-1.0) ** k * 4.0 ** k / _fact(2 * k + 1)
                 for k in range(1, _NUMERATOR_TERMS)]
_C_S_MINUS_XC = [(-1.0) ** (k + 1) * 2.0 * k / _fact(2 * k + 1)
                 for k in range(1, _NUMERATOR_TERMS)]
_C_NUM_D1 = [(-1.0) ** k * (-2.25 - 3.0 ** (2 * k + 1) / 4.0 + 3.0 * (2 * k + 1)) / _fact(2 * k + 1)
             for k in range(2, _NUMERATOR_TERMS)]
_C_NUM_Q4 = [(-1.0) ** k * (4.0 ** (k + 1) - 16.0 ** k) / _fact(2 * k + 1)
             for k in range(2, _NUMERATOR_TERMS)]
_C_NUM_Q5 = [(-1.0) ** k * (2.25 - 4.0 ** k - 9.0 ** k / 4.0 + 16.0 ** k / 4.0) / _fact(2 * k)
             for k in range(2, _NUMERATOR_TERMS)]


def _poly_y(coeffs, y):
    acc = np.zeros_like(y)
    for c in reversed(coeffs):
        acc = acc * y + c
    return acc


def _blend(x, series, closed):
    out = np.empty_like(x)
    lo = x < _NUMERATOR_CUT
    if lo.any():
        xs = x[lo]
        out[lo] = series(xs)
    if (~lo).any():
        xc = x[~lo]
        out[~lo] = closed(xc)
    return out


def _sc_minus_x(x):
    return _blend(
        x,
        lambda t: t ** 3 * _poly_y(_C_SC_MINUS_X, t * t),
        lambda t: np.sin(2.0 * t) / 2.0 - t,
    )


def _s_minus_xc(x):
    return _blend(
        x,
        lambda t: t ** 3 * _poly_y(_C_S_MINUS_XC, t * t),
        lambda t: np.sin(t) - t * np.cos(t),
    )


def _num_d1(x):
    return _blend(
        x,
        lambda t: t ** 5 * _poly_y(_C_NUM_D1, t * t),
        lambda t: -2.25 * np.sin(t) - 0.25 * np.sin(3.0 * t) + 3.0 * t * np.cos(t),
    )


def _num_q4(x):
    return _blend(
        x,
        lambda t: t ** 5 * _poly_y(_C_NUM_Q4, t * t),
        lambda t: 2.0 * np.sin(2.0 * t) - 0.25 * np.sin(4.0 * t) - 3.0 * t,
    )


def _num_q5(x):
    return _blend(
        x,
        lambda t: t ** 4 * _poly_y(_C_NUM_Q5, t * t),
        lambda t: (2.25 * np.cos(t) - np.cos(2.0 * t) - 0.25 * np.cos(3.0 * t)
                   + 0.25 * np.cos(4.0 * t) - 1.25),
    )


# Closed forms, assembled from the stable numerators.

def _closed_eq1(x):
    return _sc_minus_x(x) / np.sin(x) ** 3


def _closed_eq2(x):
    return x / np.sin(x)


def _closed_eq3(x):
    # (cos x - 1)/sin^2 x == -1/(2 cos^2(x/2)), exact and cancellation-free
    return -0.5 / np.cos(x / 2.0) ** 2


def _closed_eq4(x):
    return _num_q4(x) / np.sin(x) ** 5


def _closed_eq5(x):
    return _num_q5(x) / np.sin(x) ** 4


def _closed_eq1_deriv(x):
    return _num_d1(x) / np.sin(x) ** 4


def _closed_eq2_deriv(x):
    return _s_minus_xc(x) / np.sin(x) ** 2


def _closed_eq6(x):
    return _num_d1(x) * np.cos(x) / np.sin(x) ** 5


def _closed_eq7(x):
    return _num_d1(x) / np.sin(x) ** 3


def _closed_eq8(x):
    return _s_minus_xc(x) * np.cos(x) / np.sin(x) ** 3


def _closed_eq9(x):
    return _s_minus_xc(x) / np.sin(x)


# Taylor tables around 0 (see docs/kernel_series.md). Entries are
# (parity, [c0, c1, ...]) meaning sum c_k x^(2k + parity).

_SERIES = {
    KernelId.EQ1: (0, [-2 / 3, -1 / 5, -17 / 420, -29 / 4200, -1181 / 1108800,
                       -1393481 / 9081072000]),
    KernelId.EQ2: (0, [1.0, 1 / 6, 7 / 360, 31 / 15120, 127 / 604800,
                       73 / 3421440]),
    KernelId.EQ3: (0, [-1 / 2, -1 / 8, -1 / 48, -17 / 5760, -31 / 80640,
                       -691 / 14515200]),
    KernelId.EQ4: (0, [-8 / 5, -4 / 7, -1 / 7, -211 / 6930, -29509 / 5045040,
                       -157301 / 151351200]),
    KernelId.EQ5: (0, [5 / 4, -1 / 4, -11 / 192, -1 / 90, -313 / 161280,
                       -2281 / 7257600]),
    KernelId.EQ6: (0, [-2 / 5, -1 / 35, 3 / 140, 1349 / 138600,
                       267767 / 100900800, 1752539 / 3027024000]),
    KernelId.EQ7: (2, [-2 / 5, -2 / 21, -4 / 225, -2 / 693, -2764 / 6449625]),
    KernelId.EQ8: (0, [1 / 3, -1 / 30, -53 / 2520, -367 / 75600,
                       -5689 / 6652800, -7198361 / 54486432000]),
    KernelId.EQ9: (2, [1 / 3, 1 / 45, 2 / 945, 1 / 4725, 2 / 93555]),
}

_SERIES_DERIV = {
    KernelId.EQ1: (1, [-2 / 5, -17 / 105, -29 / 700, -1181 / 138600,
                       -1393481 / 908107200]),
    KernelId.EQ2: (1, [1 / 3, 7 / 90, 31 / 2520, 127 / 75600, 73 / 342144]),
}

_CLOSED = {
    KernelId.EQ1: _closed_eq1,
    KernelId.EQ2: _closed_eq2,
    KernelId.EQ3: _closed_eq3,
    KernelId.EQ4: _closed_eq4,
    KernelId.EQ5: _closed_eq5,
    KernelId.EQ6: _closed_eq6,
    KernelId.EQ7: _closed_eq7,
    KernelId.EQ8: _closed_eq8,
    KernelId.EQ9: _closed_eq9,
}

_CLOSED_DERIV = {
    KernelId.EQ1: _closed_eq1_deriv,
    KernelId.EQ2: _closed_eq2_deriv,
}


def _series_eval(table, x):
    parity, coeffs = table
    val = _poly_y(coeffs, x * x)
    if parity:
        val = val * x ** parity
    return val


def _eval(closed, table, theta, eps_theta, eps_pi):
    theta_arr = np.asarray(theta, dtype=float)
    scalar = theta_arr.ndim == 0
    x = np.atleast_1d(theta_arr)
    if not np.all(np.isfinite(x)):
        raise DomainError("kernel argument must be finite")
    if np.any(x < 0.0) or np.any(x >= np.pi - eps_pi):
        raise DomainError(
            f"kernel argument outside [0, pi - {eps_pi:g}); "
            "theta near pi means the query point sits on a cage edge")
    out = np.empty_like(x)
    lo = x < eps_theta
    if lo.any():
        out[lo] = _series_eval(table, x[lo])
    if (~lo).any():
        out[~lo] = closed(x[~lo])
    return float(out[0]) if scalar else out


def eval_kernel(k, theta, eps_theta=DEFAULT_EPS_THETA, eps_pi=DEFAULT_EPS_PI):
    """Evaluate kernel ``k`` at angle(s) ``theta`` in [0, pi).

    Uses the truncated Taylor series below ``eps_theta`` and the closed
    form above; the two branches agree to ~1e-14 at the seam.
    """
    k = KernelId(k)
    return _eval(_CLOSED[k], _SERIES[k], theta, eps_theta, eps_pi)


def eval_kernel_derivative(k, theta, eps_theta=DEFAULT_EPS_THETA,
                           eps_pi=DEFAULT_EPS_PI):
    """First derivative of eq1 or eq2 (the pieces eq6..eq9 are built from)."""
    k = KernelId(k)
    if k not in _CLOSED_DERIV:
        raise ValueError("derivative available only for eq1 and eq2")
    return _eval(_CLOSED_DERIV[k], _SERIES_DERIV[k], theta, eps_theta, eps_pi)

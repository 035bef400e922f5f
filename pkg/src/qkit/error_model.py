"""Analytic expected-error model for the piecewise quantizer.

All formulas integrate against the truncated-renormalized distribution on
[-m, m], so m must equal the model's truncation bound. Error magnitudes are
expressed through the per-region constant C(b-1) = 1 / (12 (2^(b-1) - 1)^2):
each region spends b-1 bits on its magnitude.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .uniform import error_constant, expected_uniform_error


def _check_bm(d, bits, m):
    if bits < 2 or bits > 8:
        raise ValueError(f"bits must be in 2..8, got {bits}")
    if not math.isclose(m, d.m, rel_tol=1e-12, abs_tol=0.0):
        raise ValueError(
            f"m={m} does not match the model truncation bound {d.m}"
        )


def expected_pwlq_error(d, bits, m, p):
    """Expected MSE of the K=1 piecewise quantizer with breakpoint p.

    Evaluates the collapsed two-term expression and cross-checks it against
    the explicit per-piece sum; they are algebraically identical, so any
    disagreement is an internal numerical fault.
    """
    _check_bm(d, bits, m)
    if not 0.0 < p < m:
        raise ValueError(f"breakpoint must lie in (0, {m}), got {p}")
    c = error_constant(bits - 1)
    fp = d.cdf_t(p)
    collapsed = c * ((m - p) ** 2 + m * (2.0 * p - m) * (2.0 * fp - 1.0))
    pieces = expected_pwlq_error_pieces(d, bits, m, p)
    if abs(collapsed - pieces) > 1e-9 * max(abs(collapsed), 1e-300):
        raise ArithmeticError(
            f"error-form mismatch: {collapsed} vs {pieces}"
        )
    return collapsed


def expected_pwlq_error_pieces(d, bits, m, p):
    """Same expectation as a sum of the four per-piece contributions."""
    _check_bm(d, bits, m)
    c = error_constant(bits - 1)
    f_p = d.cdf_t(p)
    f_mp = d.cdf_t(-p)
    tail_mass = f_mp + (1.0 - f_p)
    center_mass = f_p - f_mp
    return c * ((m - p) ** 2 * tail_mass + p * p * center_mass)


def expected_pwlq_error_multi(d, bits, m, breakpoints):
    """Expectation for K breakpoints: sum of width^2 * mass over regions."""
    _check_bm(d, bits, m)
    edges = [0.0] + [float(p) for p in breakpoints] + [float(m)]
    for lo, hi in zip(edges, edges[1:]):
        if not lo < hi:
            raise ValueError(f"breakpoints must increase strictly inside (0, {m})")
    c = error_constant(bits - 1)
    total = 0.0
    for lo, hi in zip(edges, edges[1:]):
        width = hi - lo
        mass = 2.0 * (d.cdf_t(hi) - d.cdf_t(lo))
        total += width * width * mass
    return c * total


def stationarity_residual(d, m, p):
    """g(p) whose root is the optimal K=1 breakpoint.

    The expected error's first derivative equals 2 C(b-1) g(p), so the
    residual is bit-width independent.
    """
    if not math.isclose(m, d.m, rel_tol=1e-12, abs_tol=0.0):
        raise ValueError(f"m={m} does not match the model truncation bound {d.m}")
    return (
        p
        - 2.0 * m
        + 2.0 * m * d.cdf_t(p)
        + m * (2.0 * p - m) * d.pdf_t(p)
    )


def pwlq_error_derivatives(d, bits, m, p):
    """(first, second) derivative of the expected error at p, 0 < p < m/2."""
    _check_bm(d, bits, m)
    if not 0.0 < p < m / 2.0:
        raise ValueError(f"derivatives are defined on (0, {m / 2.0}), got {p}")
    c2 = 2.0 * error_constant(bits - 1)
    first = c2 * stationarity_residual(d, m, p)
    second = c2 * (
        1.0
        + 4.0 * m * d.pdf_t(p)
        + m * (2.0 * p - m) * d.dpdf_t(p)
    )
    return first, second


def optimal_error_closed_form(d, bits, m, p_star):
    """Expected error at a stationary point, in its simplified closed form.

    Valid only where the stationarity residual vanishes; rejects points with
    |g(p_star)| > 1e-6 rather than return a silently wrong value.
    """
    _check_bm(d, bits, m)
    g = stationarity_residual(d, m, p_star)
    if abs(g) > 1e-6:
        raise ValueError(
            f"p_star is not stationary (residual {g:.3e}); solve first"
        )
    c = error_constant(bits - 1)
    return c * (
        -p_star * p_star
        + m * p_star
        - m * (m - 2.0 * p_star) ** 2 * d.pdf_t(p_star)
    )


def bound_ratio(bits):
    """Worst-case ratio of piecewise to uniform expected error at p = m/2.

    Equals ((2^b - 1) / (2^(b-1) - 1))^2 / 16: below 9/16 for every b >= 2
    and decreasing toward 1/4 as b grows.
    """
    if bits < 2:
        raise ValueError("bits must be >= 2")
    levels_full = (1 << bits) - 1
    levels_half = (1 << (bits - 1)) - 1
    return (levels_full / levels_half) ** 2 / 16.0


@dataclass(frozen=True)
class ErrorReport:
    """Analytic and empirical error summary for one quantized block."""

    kind: str
    scale: float
    bits: int
    m: float
    breakpoint: float
    expected_error: float
    first_derivative: float | None
    second_derivative: float | None
    uniform_error: float
    bound_ratio: float
    empirical_mse: float | None = None


def error_report(d, bits, p, t=None):
    """Build an ErrorReport at breakpoint p; empirical MSE if t is given."""
    m = d.m
    if t is not None:
        from .pwlq import empirical_mse, make_pwlq_params

        emp = empirical_mse(t, make_pwlq_params(bits, m, (p,)))
    else:
        emp = None
    if 0.0 < p < m / 2.0:
        first, second = pwlq_error_derivatives(d, bits, m, p)
    else:
        first = second = None
    return ErrorReport(
        kind=d.kind,
        scale=d.scale,
        bits=bits,
        m=m,
        breakpoint=p,
        expected_error=expected_pwlq_error(d, bits, m, p),
        first_derivative=first,
        second_derivative=second,
        uniform_error=expected_uniform_error(bits, -m, m),
        bound_ratio=bound_ratio(bits),
        empirical_mse=emp,
    )

"""Breakpoint search: gradient descent, a Gaussian closed form, and a grid.

Gradient descent minimizes the expected error normalized by C(b-1), which
makes the iteration bit-width independent: the minimizer of the expected
error does not depend on b, only its value does.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import backend
from .distributions import GAUSSIAN, DistributionModel
from .error_model import (
    expected_pwlq_error_multi,
    stationarity_residual,
)
from .errors import SolverError
from .tensor import Tensor

GRADIENT_DESCENT = "gradient_descent"
CLOSED_FORM_GAUSSIAN = "closed_form_gaussian"
EMPIRICAL_GRID = "empirical_grid"

_METHODS = (GRADIENT_DESCENT, CLOSED_FORM_GAUSSIAN, EMPIRICAL_GRID)

# Closed-form coefficients for the Gaussian optimum: p*/sigma as a
# logarithmic fit in m/sigma, trustworthy for m/sigma in [2, 5].
_CF_SLOPE = 0.8614
_CF_INTERCEPT = 0.6079
_CF_RANGE = (2.0, 5.0)


@dataclass(frozen=True)
class SolverConfig:
    method: str = GRADIENT_DESCENT
    max_iters: int = 10000
    step_size: float = 0.01
    tolerance: float = 1e-11
    grid_resolution: int = 1000
    k: int = 1
    perturbation: float = 0.0

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.step_size <= 1:
            raise ValueError("step_size must be in (0, 1]")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.grid_resolution < 2:
            raise ValueError("grid_resolution must be >= 2")
        if not 1 <= self.k <= 3:
            raise ValueError("k must be in 1..3")
        if not 0.0 <= self.perturbation <= 0.5:
            raise ValueError("perturbation must be in [0, 0.5]")


@dataclass(frozen=True)
class BreakpointSolution:
    """Solved breakpoints plus enough context to re-evaluate the error."""

    breakpoints: tuple
    expected_error: float | None
    method: str
    iterations: int
    residual: float | None
    bits: int
    m: float
    kind: str | None = None
    scale: float | None = None


def _gd_single(d, bits, m, cfg):
    lo, hi = 0.01 * m, 0.49 * m
    p = 0.3 * m
    g = stationarity_residual(d, m, p)
    for it in range(1, cfg.max_iters + 1):
        if abs(2.0 * g) <= cfg.tolerance:
            return p, it - 1, g
        p = min(max(p - cfg.step_size * m * 2.0 * g, lo), hi)
        g = stationarity_residual(d, m, p)
    raise SolverError(
        f"gradient descent did not converge in {cfg.max_iters} iterations "
        f"(|derivative| = {abs(2.0 * g):.3e} > {cfg.tolerance})"
    )


def closed_form_gaussian(m_over_sigma):
    """p*/sigma for a Gaussian with clipping bound m, valid m/sigma in [2, 5]."""
    lo, hi = _CF_RANGE
    if not lo <= m_over_sigma <= hi:
        raise ValueError(
            f"closed form is calibrated for m/sigma in [{lo}, {hi}], "
            f"got {m_over_sigma}"
        )
    return np.log(_CF_SLOPE * m_over_sigma + _CF_INTERCEPT)


def solve_breakpoint(d, bits, m, cfg=None):
    """Find the K=1 breakpoint minimizing the expected error on [0, m]."""
    cfg = cfg or SolverConfig()
    if bits < 2 or bits > 8:
        raise ValueError(f"bits must be in 2..8, got {bits}")
    if cfg.method == EMPIRICAL_GRID:
        raise SolverError(
            "the grid method searches sample data; call empirical_grid instead"
        )
    if cfg.method == CLOSED_FORM_GAUSSIAN:
        ratio = m / d.scale
        usable = d.kind == GAUSSIAN and _CF_RANGE[0] <= ratio <= _CF_RANGE[1]
        if usable:
            p = float(d.scale * closed_form_gaussian(ratio))
            g = stationarity_residual(d, m, p)
            return BreakpointSolution(
                breakpoints=(p,),
                expected_error=expected_pwlq_error_multi(d, bits, m, (p,)),
                method=CLOSED_FORM_GAUSSIAN,
                iterations=0,
                residual=g,
                bits=bits,
                m=m,
                kind=d.kind,
                scale=d.scale,
            )
        warnings.warn(
            f"closed form needs a Gaussian with m/scale in "
            f"[{_CF_RANGE[0]}, {_CF_RANGE[1]}] (got {d.kind}, {ratio:.3g}); "
            "falling back to gradient descent",
            stacklevel=2,
        )
    p, iters, g = _gd_single(d, bits, m, cfg)
    return BreakpointSolution(
        breakpoints=(p,),
        expected_error=expected_pwlq_error_multi(d, bits, m, (p,)),
        method=GRADIENT_DESCENT,
        iterations=iters,
        residual=g,
        bits=bits,
        m=m,
        kind=d.kind,
        scale=d.scale,
    )


def _grad_multi(d, m, pts):
    edges = [0.0] + list(pts) + [m]
    out = np.empty(len(pts))
    for j in range(1, len(edges) - 1):
        wl = edges[j] - edges[j - 1]
        wr = edges[j + 1] - edges[j]
        ml = 2.0 * (d.cdf_t(edges[j]) - d.cdf_t(edges[j - 1]))
        mr = 2.0 * (d.cdf_t(edges[j + 1]) - d.cdf_t(edges[j]))
        out[j - 1] = 2.0 * (wl * ml - wr * mr) + (wl * wl - wr * wr) * 2.0 * d.pdf_t(
            edges[j]
        )
    return out


def solve_multi(d, bits, m, k, cfg=None, init=None):
    """Jointly place k breakpoints by projected gradient descent.

    Without an explicit init, k > 1 warm-starts from the k-1 solution with
    one extra breakpoint dropped midway between the last one and m.
    """
    cfg = cfg or SolverConfig()
    if bits < 2 or bits > 8:
        raise ValueError(f"bits must be in 2..8, got {bits}")
    if not 1 <= k <= 3:
        raise ValueError(f"k must be in 1..3, got {k}")
    if init is None:
        if k == 1:
            p = np.array([0.3 * m])
        else:
            prev = solve_multi(d, bits, m, k - 1, cfg).breakpoints
            p = np.array(list(prev) + [(prev[-1] + m) / 2.0])
    else:
        p = np.asarray(init, dtype=np.float64).copy()
        if p.shape != (k,):
            raise ValueError(f"init must supply {k} breakpoints")
    lo, hi = 1e-3 * m, m * (1.0 - 1e-3)
    g = _grad_multi(d, m, p)
    iters = cfg.max_iters
    for it in range(1, cfg.max_iters + 1):
        if np.max(np.abs(g)) <= cfg.tolerance:
            iters = it - 1
            break
        p = np.clip(np.sort(p - cfg.step_size * m * g), lo, hi)
        g = _grad_multi(d, m, p)
    else:
        raise SolverError(
            f"joint descent did not converge in {cfg.max_iters} iterations "
            f"(max |gradient| = {np.max(np.abs(g)):.3e})"
        )
    if np.any(np.diff(p) <= 0):
        raise SolverError(f"breakpoints collapsed to {tuple(p)}")
    bps = tuple(float(v) for v in p)
    return BreakpointSolution(
        breakpoints=bps,
        expected_error=expected_pwlq_error_multi(d, bits, m, bps),
        method=GRADIENT_DESCENT,
        iterations=iters,
        residual=stationarity_residual(d, m, bps[0]) if k == 1 else None,
        bits=bits,
        m=m,
        kind=d.kind,
        scale=d.scale,
    )


def empirical_grid(t, bits, k=1, resolution=1000):
    """Exhaustive sample-based search over a uniform breakpoint grid.

    Candidates are m * i / resolution strictly inside (0, m), so refining
    the resolution by an integer factor keeps every coarse candidate. Ties
    resolve to the smallest breakpoint. For k > 1 the joint grid is capped
    at 40 points per axis to keep the combinatorial search tractable.
    """
    if bits < 2 or bits > 8:
        raise ValueError(f"bits must be in 2..8, got {bits}")
    if not 1 <= k <= 3:
        raise ValueError(f"k must be in 1..3, got {k}")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    arr = (t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float32)).reshape(-1)
    if arr.size == 0:
        raise ValueError("cannot search an empty tensor")
    m = float(np.abs(arr).max())
    if m == 0.0:
        raise ValueError("all-zero data has no breakpoint to place")
    if k == 1:
        a = np.sort(np.abs(arr.astype(np.float32)))
        ps = m * np.arange(1, resolution) / resolution
        curve = backend.mse_curve_pwlq(
            np.ascontiguousarray(a), m, (1 << (bits - 1)) - 1, ps
        )
        idx = int(np.argmin(curve))
        best = (float(ps[idx]),)
        best_err = float(curve[idx])
        evals = ps.size
    else:
        from itertools import combinations

        from .pwlq import empirical_mse, make_pwlq_params

        res = min(resolution, 40)
        grid = m * np.arange(1, res) / res
        tq = t if isinstance(t, Tensor) else Tensor(arr)
        best, best_err, evals = None, np.inf, 0
        for combo in combinations(range(grid.size), k):
            bps = tuple(float(grid[i]) for i in combo)
            err = empirical_mse(tq, make_pwlq_params(bits, m, bps))
            evals += 1
            if err < best_err:
                best, best_err = bps, err
    return BreakpointSolution(
        breakpoints=best,
        expected_error=best_err,
        method=EMPIRICAL_GRID,
        iterations=evals,
        residual=None,
        bits=bits,
        m=m,
        kind=None,
        scale=None,
    )


def perturb_breakpoints(sol, fraction, seed):
    """Scale each breakpoint by (1 +- fraction) with random signs.

    Returns a new solution clamped inside (0, m); the expected error is
    re-evaluated when the solution carries its distribution context and
    cleared otherwise (grid solutions have no analytic model).
    """
    if not 0.0 <= fraction <= 0.5:
        raise ValueError("fraction must be in [0, 0.5]")
    rng = np.random.default_rng(seed)
    bps = np.asarray(sol.breakpoints, dtype=np.float64)
    signs = rng.integers(0, 2, size=bps.size) * 2 - 1
    m = sol.m
    new = np.sort(np.clip(bps * (1.0 + signs * fraction), m * 1e-9, m * (1 - 1e-9)))
    for i in range(1, new.size):
        if new[i] <= new[i - 1]:
            new[i] = np.nextafter(new[i - 1], np.inf)
    bps_t = tuple(float(v) for v in new)
    if sol.kind is not None and sol.scale is not None:
        d = DistributionModel(sol.kind, sol.scale, m)
        err = expected_pwlq_error_multi(d, sol.bits, m, bps_t)
        res = stationarity_residual(d, m, bps_t[0]) if len(bps_t) == 1 else None
    else:
        err, res = None, None
    return replace(
        sol,
        breakpoints=bps_t,
        expected_error=err,
        iterations=0,
        residual=res,
    )

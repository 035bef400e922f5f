"""Symmetric bell-shaped distribution models (Gaussian, Laplacian).

Supplies pdf/cdf evaluation, moment fitting, seeded sampling, and the
truncated-renormalized variants the breakpoint solver integrates against:
over [-m, m] the solver needs F(-m) = 0 and F(m) = 1, so cdf_t/pdf_t/dpdf_t
divide the untruncated closed forms by F(m) - F(-m).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import DataError
from .tensor import Tensor

GAUSSIAN = "gaussian"
LAPLACIAN = "laplacian"

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class DistributionModel:
    """Zero-centered symmetric model: kind, scale (sigma or Laplace b), bound m.

    pdf is symmetric and strictly decreasing on (0, m), the shape the error
    analysis assumes; location is fixed at 0.
    """

    kind: str
    scale: float
    m: float

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, LAPLACIAN):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if not (self.scale > 0):
            raise ValueError("scale must be positive")
        if not (self.m > 0):
            raise ValueError("truncation bound m must be positive")

    # Untruncated closed forms -------------------------------------------------

    def pdf(self, r):
        """Density of the untruncated model at r (vectorized)."""
        r = np.asarray(r, dtype=np.float64)
        if self.kind == GAUSSIAN:
            s = self.scale
            out = np.exp(-0.5 * (r / s) ** 2) / (s * math.sqrt(2.0 * math.pi))
        else:
            b = self.scale
            out = np.exp(-np.abs(r) / b) / (2.0 * b)
        return out if out.ndim else float(out)

    def cdf(self, r):
        """CDF of the untruncated model; satisfies cdf(r) = 1 - cdf(-r)."""
        r = np.asarray(r, dtype=np.float64)
        if self.kind == GAUSSIAN:
            out = 0.5 * (1.0 + erf(r / (self.scale * _SQRT2)))
        else:
            b = self.scale
            out = np.where(r < 0, 0.5 * np.exp(r / b), 1.0 - 0.5 * np.exp(-r / b))
        return out if out.ndim else float(out)

    def dpdf(self, r):
        """Derivative of the untruncated pdf.

        The Laplacian density has a kink at 0; the one-sided (r >= 0)
        derivative is used, which is the branch the solver domain touches.
        """
        r = np.asarray(r, dtype=np.float64)
        if self.kind == GAUSSIAN:
            out = -(r / self.scale**2) * self.pdf(r)
        else:
            out = -np.sign(r) * self.pdf(r) / self.scale
            out = np.where(r == 0, -self.pdf(0.0) / self.scale, out)
        return out if out.ndim else float(out)

    # Truncated-renormalized forms --------------------------------------------

    def _norm(self) -> float:
        return float(self.cdf(self.m) - self.cdf(-self.m))

    def cdf_t(self, r):
        """Renormalized CDF on [-m, m]: cdf_t(-m) = 0, cdf_t(m) = 1."""
        lo = self.cdf(-self.m)
        out = (np.asarray(self.cdf(r)) - lo) / self._norm()
        return out if out.ndim else float(out)

    def pdf_t(self, r):
        out = np.asarray(self.pdf(r)) / self._norm()
        return out if out.ndim else float(out)

    def dpdf_t(self, r):
        out = np.asarray(self.dpdf(r)) / self._norm()
        return out if out.ndim else float(out)


def fit(t: Tensor, kind: str) -> DistributionModel:
    """Fit a zero-located model: Gaussian scale = population std of the
    mean-removed data, Laplacian scale = mean absolute deviation; m = absmax."""
    arr = (t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float32)).reshape(-1)
    if arr.size == 0:
        raise ValueError("cannot fit an empty tensor")
    m = float(np.abs(arr).max())
    if kind == GAUSSIAN:
        scale = float(np.std(arr, dtype=np.float64))
    elif kind == LAPLACIAN:
        scale = float(np.mean(np.abs(arr), dtype=np.float64))
    else:
        raise ValueError(f"unknown distribution kind {kind!r}")
    if scale <= 0 or m <= 0:
        raise DataError("degenerate scale: data has no spread")
    return DistributionModel(kind, scale, m)


def sample(d: DistributionModel, n: int, seed: int) -> Tensor:
    """n untruncated draws, deterministic for a fixed seed."""
    if n <= 0:
        raise ValueError("sample count must be positive")
    rng = np.random.default_rng(seed)
    if d.kind == GAUSSIAN:
        x = rng.normal(0.0, d.scale, n)
    else:
        x = rng.laplace(0.0, d.scale, n)
    return Tensor(x.astype(np.float32), _validated=True)

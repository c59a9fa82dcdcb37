"""Two-center Shepard approximation of a Heaviside interface.

A pair of equal-width Gaussians with Shepard normalization collapses, along
the normal coordinate of the interface, to a logistic profile whose L1
distance to the Heaviside function is (log 2) sigma^2 / (c + b).  This module
builds the two-center construction, the closed-form profile, and a
quadrature check of the error law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import expit

from .errors import NumericalError

TAIL_BOUND = 1e-14


@dataclass(frozen=True)
class StepInterfaceSpec:
    """Interface geometry and kernel parameters.

    The interface is the hyperplane <v, x> + b = 0 with unit normal ``v``;
    the two centers sit at c*v and gamma*c*v with common width ``sigma`` and
    amplitudes 1 and 0.
    """

    v: np.ndarray
    b: float
    c: float
    sigma: float

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.v, dtype=float)).copy()
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError(f"normal must be a unit vector, got |v|={np.linalg.norm(v)}")
        if self.c + self.b <= 0:
            raise ValueError(f"c + b must be positive, got {self.c + self.b}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @property
    def gamma(self) -> float:
        return -1.0 - 2.0 * self.b / (self.c * float(self.v @ self.v))

    @property
    def beta(self) -> tuple[float, float]:
        return (1.0, 0.0)

    @property
    def rate(self) -> float:
        """Slope parameter 2(b + c) / sigma^2 of the logistic profile."""
        return 2.0 * (self.b + self.c) / self.sigma**2


def heaviside(y) -> np.ndarray:
    """Heaviside step with the half-maximum convention H(0) = 1/2."""
    y = np.asarray(y, dtype=float)
    return np.where(y > 0, 1.0, np.where(y < 0, 0.0, 0.5))


def logistic_profile(spec: StepInterfaceSpec, y) -> np.ndarray:
    """Closed-form profile 1 / (1 + exp(-rate * y)) along the normal."""
    return expit(spec.rate * np.asarray(y, dtype=float))


def two_center_shepard(spec: StepInterfaceSpec, x) -> np.ndarray:
    """Shepard blend of the two Gaussians, evaluated at points ``x``.

    Equals ``logistic_profile(spec, <v, x> + b)`` identically; the exponent
    difference is formed directly so the identity holds in floating point
    far from both centers as well.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    c1 = spec.c * spec.v
    c2 = spec.gamma * spec.c * spec.v
    e1 = -np.sum((pts - c1) ** 2, axis=1) / (2.0 * spec.sigma**2)
    e2 = -np.sum((pts - c2) ** 2, axis=1) / (2.0 * spec.sigma**2)
    w1 = expit(e1 - e2)
    b1, b2 = spec.beta
    return b1 * w1 + b2 * (1.0 - w1)


@dataclass(frozen=True)
class L1ErrorResult:
    """Numeric vs analytic L1 error, with the two half-line contributions."""

    numeric: float
    analytic: float
    lower_half: float
    upper_half: float

    def __iter__(self):
        return iter((self.numeric, self.analytic))


def l1_error(spec: StepInterfaceSpec) -> L1ErrorResult:
    """Integrate |H - K| along the normal and compare with the error law.

    The integrand decays like exp(-rate*|y|); the truncation point L is
    chosen so the dropped tail is below ``TAIL_BOUND``.  The integral is
    split at y = 0 where the integrand has a kink.
    """
    a = spec.rate
    L = max(np.log(max(1.0 / (a * TAIL_BOUND), np.e)) / a, 1.0 / a) * 1.1

    def integrand(y):
        return abs(heaviside(y) - float(logistic_profile(spec, y)))

    lower, err_lo = quad(integrand, -L, 0.0, epsabs=1e-15, epsrel=1e-13, limit=200)
    upper, err_hi = quad(integrand, 0.0, L, epsabs=1e-15, epsrel=1e-13, limit=200)
    if err_lo + err_hi > 1e-10 * max(lower + upper, 1e-30):
        raise NumericalError(
            f"quadrature error estimate {err_lo + err_hi:g} too large for the L1 error"
        )
    analytic = float(np.log(2.0) * spec.sigma**2 / (spec.c + spec.b))
    return L1ErrorResult(
        numeric=float(lower + upper),
        analytic=analytic,
        lower_half=float(lower),
        upper_half=float(upper),
    )


def error_grid(c_values, sigma_values, b: float = 0.0, v=None):
    """Rows (c, sigma, b, numeric, analytic, rel_diff) over a parameter grid."""
    if v is None:
        v = np.array([1.0, 0.0])
    rows = []
    for c in c_values:
        for sigma in sigma_values:
            spec = StepInterfaceSpec(v=v, b=b, c=float(c), sigma=float(sigma))
            res = l1_error(spec)
            rel = abs(res.numeric - res.analytic) / res.analytic
            rows.append((float(c), float(sigma), float(b), res.numeric, res.analytic, rel))
    return rows

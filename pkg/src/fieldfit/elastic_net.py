"""Elastic Net regression by cyclic coordinate descent.

Minimizes 0.5 ||y - W b||^2 + lam1 ||b||_1 + 0.5 lam2 ||b||^2 with no
intercept.  Columns are not standardized: the design matrices produced by
Shepard normalization are already scale-balanced, and rescaling would change
the minimizer of the penalized objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


@dataclass(frozen=True)
class ElasticNetConfig:
    """Penalty weights and stopping controls for the coordinate descent."""

    lam1: float = 0.0
    lam2: float = 0.0
    tol: float = 1e-10
    max_iters: int = 100_000

    def __post_init__(self):
        if self.lam1 < 0 or self.lam2 < 0:
            raise ValueError(f"penalties must be nonnegative: lam1={self.lam1} lam2={self.lam2}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True)
class FitResult:
    """Coordinate-descent output; ``objective_history`` has one entry per sweep."""

    beta: np.ndarray
    objective: float
    iterations: int
    converged: bool
    active_set_size: int
    objective_history: np.ndarray = field(repr=False, default=None)


def soft_threshold(z, lam):
    """sign(z) * max(|z| - lam, 0); works on scalars and arrays."""
    if np.any(np.asarray(lam) < 0):
        raise ValueError(f"threshold must be nonnegative, got {lam}")
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def fit(W, y, config: ElasticNetConfig, beta0=None) -> FitResult:
    """Solve the Elastic Net problem by cyclic coordinate descent.

    Coefficients are visited in fixed column order 0..M-1 each sweep.  The
    iteration stops when max_m |delta beta_m| / max(1, max_m |beta_m|) drops
    to ``config.tol`` or ``config.max_iters`` sweeps have run; in the latter
    case the result is returned with ``converged=False`` rather than raising.
    """
    W = np.asarray(W, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if W.ndim != 2:
        raise ValueError(f"design matrix must be 2-D, got shape {W.shape}")
    n, m = W.shape
    if y.shape[0] != n:
        raise ValueError(f"target length {y.shape[0]} does not match {n} rows")
    if not np.all(np.isfinite(W)) or not np.all(np.isfinite(y)):
        raise ValueError("design matrix and targets must be finite")

    Wf = np.asfortranarray(W)
    col_sq = np.einsum("nm,nm->m", Wf, Wf)
    denom = col_sq + config.lam2

    if beta0 is None:
        beta = np.zeros(m)
    else:
        beta = np.asarray(beta0, dtype=float).copy()
        if beta.shape[0] != m:
            raise ValueError(f"beta0 length {beta.shape[0]} does not match {m} columns")
    r = y - Wf @ beta

    history = np.empty(config.max_iters)
    loop = _cd_sweeps_jit if _HAVE_NUMBA else _cd_sweeps_numpy
    sweeps, converged = loop(
        Wf, col_sq, denom, config.lam1, config.lam2, config.tol, config.max_iters,
        beta, r, history,
    )

    return FitResult(
        beta=beta,
        objective=float(history[sweeps - 1]),
        iterations=int(sweeps),
        converged=bool(converged),
        active_set_size=int(np.count_nonzero(beta)),
        objective_history=history[:sweeps].copy(),
    )


@njit(cache=True)
def _cd_sweeps_jit(W, col_sq, denom, lam1, lam2, tol, max_iters, beta, r, history):
    """Cyclic coordinate-descent sweeps with residual updates, compiled.

    Mutates ``beta``, ``r`` and ``history`` in place; returns the number of
    sweeps performed and whether the stopping rule was met.
    """
    n, m = W.shape
    sweeps = 0
    converged = False
    for s in range(max_iters):
        max_delta = 0.0
        for j in range(m):
            b_old = beta[j]
            z = col_sq[j] * b_old
            for i in range(n):
                z += W[i, j] * r[i]
            if denom[j] > 0.0:
                mag = abs(z) - lam1
                if mag < 0.0:
                    mag = 0.0
                b_new = (mag if z >= 0.0 else -mag) / denom[j]
            else:
                b_new = 0.0
            if b_new != b_old:
                d = b_new - b_old
                for i in range(n):
                    r[i] -= d * W[i, j]
                beta[j] = b_new
                if abs(d) > max_delta:
                    max_delta = abs(d)
        rss = 0.0
        for i in range(n):
            rss += r[i] * r[i]
        l1 = 0.0
        l2 = 0.0
        max_abs = 0.0
        for j in range(m):
            a = abs(beta[j])
            l1 += a
            l2 += beta[j] * beta[j]
            if a > max_abs:
                max_abs = a
        history[s] = 0.5 * rss + lam1 * l1 + 0.5 * lam2 * l2
        sweeps = s + 1
        if max_delta <= tol * (max_abs if max_abs > 1.0 else 1.0):
            converged = True
            break
    return sweeps, converged


def _cd_sweeps_numpy(W, col_sq, denom, lam1, lam2, tol, max_iters, beta, r, history):
    """Pure-numpy twin of :func:`_cd_sweeps_jit`; used when numba is absent."""
    n, m = W.shape
    sweeps = 0
    converged = False
    for s in range(max_iters):
        max_delta = 0.0
        for j in range(m):
            b_old = beta[j]
            z = np.dot(W[:, j], r) + col_sq[j] * b_old
            if denom[j] > 0.0:
                mag = abs(z) - lam1
                b_new = (mag if z >= 0.0 else -mag) / denom[j] if mag > 0.0 else 0.0
            else:
                b_new = 0.0
            if b_new != b_old:
                r -= (b_new - b_old) * W[:, j]
                beta[j] = b_new
                max_delta = max(max_delta, abs(b_new - b_old))
        rss = float(r @ r)
        max_abs = float(np.max(np.abs(beta), initial=0.0))
        history[s] = (
            0.5 * rss
            + lam1 * float(np.abs(beta).sum())
            + 0.5 * lam2 * float(beta @ beta)
        )
        sweeps = s + 1
        if max_delta <= tol * max(1.0, max_abs):
            converged = True
            break
    return sweeps, converged


def fit_log_field(values, W, config: ElasticNetConfig, beta0=None) -> tuple[FitResult, bool]:
    """Fit against log(values); the returned flag records that evaluation
    of the fitted expansion must exponentiate to recover the field."""
    v = np.asarray(values, dtype=float).ravel()
    bad = ~(v > 0)
    if np.any(bad):
        j = int(np.argmax(bad))
        raise ValueError(f"field value at cell {j} is not positive: {v[j]}")
    return fit(W, np.log(v), config, beta0=beta0), True


def _objective(r: np.ndarray, beta: np.ndarray, config: ElasticNetConfig) -> float:
    return (
        0.5 * float(r @ r)
        + config.lam1 * float(np.abs(beta).sum())
        + 0.5 * config.lam2 * float(beta @ beta)
    )


def objective_value(W, y, beta, config: ElasticNetConfig) -> float:
    """Penalized objective at an arbitrary coefficient vector."""
    r = np.asarray(y, dtype=float) - np.asarray(W, dtype=float) @ np.asarray(beta, dtype=float)
    return _objective(r, np.asarray(beta, dtype=float), config)

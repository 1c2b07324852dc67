"""Proximal operators for the covariance-estimation objective pieces.

Closed forms where they exist (quadratic tracking, PSD projection, the
omega = 0 soft-threshold limit), a safeguarded Newton solve for the
rational shrinkage penalty, and a brute-force scalar grid oracle used by
the test suite as an independent cross-check.
"""

from __future__ import annotations

import numpy as np

from .stacks import Point, ShapeMismatchError

__all__ = [
    "ProxIllPosedError",
    "penalty_phi",
    "prox_quadratic_tracking",
    "prox_psd",
    "prox_phi_scalar",
    "prox_phi_elementwise",
    "prox_phi_spectral",
    "prox_grid_oracle",
]

NEWTON_TOL = 1e-14
NEWTON_MAX_ITER = 200


class ProxIllPosedError(ValueError):
    """Raised when a prox is requested outside its well-posed regime."""


def penalty_phi(t, omega: float):
    """Rational shrinkage penalty |t| / (1 + omega |t| / 2), elementwise.

    Even, zero at zero, and omega-weakly convex, so tau * phi carries
    monotonicity modulus -tau * omega.
    """
    a = np.abs(t)
    return a / (1.0 + 0.5 * omega * a)


def prox_quadratic_tracking(x: Point, target: Point, gamma: float) -> Point:
    """Prox of (1/2)||. - target||^2: (x + gamma * target) / (1 + gamma)."""
    if gamma <= 0:
        raise ProxIllPosedError(f"gamma must be positive, got {gamma}")
    x._check_same_shape(target)
    return Point((x.data + gamma * target.data) / (1.0 + gamma))


def prox_psd(x: Point, gamma: float = 1.0) -> Point:
    """Metric projection onto the PSD cone (gamma-independent).

    Eigendecompose, clamp negative eigenvalues to zero, recompose.
    """
    if not x.is_matrix:
        raise ShapeMismatchError("PSD projection needs a symmetric-matrix point")
    vals, vecs = np.linalg.eigh(x.data)
    clamped = np.clip(vals, 0.0, None)
    return Point((vecs * clamped) @ vecs.T)


def _phi_scalar_objective(w: float, s: float, omega: float, kappa: float) -> float:
    return kappa * w / (1.0 + 0.5 * omega * w) + 0.5 * (w - s) ** 2


def prox_phi_scalar(t: float, omega: float, kappa: float) -> float:
    """Prox of kappa * phi(.; omega) at t, with kappa = gamma * tau.

    Requires kappa * omega < 1 so the prox objective is strongly convex
    (hence single-valued). Sign reduction first: the output has the sign
    of t and magnitude at most |t|. On [0, |t|] the stationarity equation

        w - |t| + kappa / (1 + omega w / 2)^2 = 0

    has increasing left side, so a Newton iteration with bisection
    fallback on the bracketing interval converges; the root is compared
    against the w = 0 candidate and the smaller objective wins.
    """
    if kappa < 0:
        raise ProxIllPosedError(f"kappa must be >= 0, got {kappa}")
    if omega < 0:
        raise ProxIllPosedError(f"omega must be >= 0, got {omega}")
    if kappa * omega >= 1.0:
        raise ProxIllPosedError(
            f"kappa*omega = {kappa * omega} >= 1: prox may be empty or multi-valued"
        )
    if t == 0.0 or kappa == 0.0:
        return float(t) if kappa == 0.0 else 0.0

    s = abs(t)
    if omega == 0.0:
        # plain soft threshold
        w = max(s - kappa, 0.0)
        return float(np.sign(t) * w)

    def psi(w):
        return w - s + kappa / (1.0 + 0.5 * omega * w) ** 2

    if psi(0.0) >= 0.0:
        # stationary at the kink: |t| <= kappa
        return 0.0

    lo, hi = 0.0, s  # psi(lo) < 0 <= psi(hi)
    w = s - kappa / (1.0 + 0.5 * omega * s) ** 2
    if not (lo < w < hi):
        w = 0.5 * (lo + hi)
    for _ in range(NEWTON_MAX_ITER):
        val = psi(w)
        if abs(val) <= NEWTON_TOL * max(1.0, s):
            break
        if val > 0.0:
            hi = w
        else:
            lo = w
        deriv = 1.0 - kappa * omega / (1.0 + 0.5 * omega * w) ** 3
        step = val / deriv
        w_new = w - step
        if not (lo < w_new < hi):
            w_new = 0.5 * (lo + hi)
        if w_new == w:
            break
        w = w_new

    if _phi_scalar_objective(0.0, s, omega, kappa) < _phi_scalar_objective(w, s, omega, kappa):
        w = 0.0
    return float(np.sign(t) * w)


def _prox_phi_array(values: np.ndarray, omega: float, kappa: float) -> np.ndarray:
    """Vectorized prox of kappa * phi(.; omega): the same bracketed Newton
    iteration as prox_phi_scalar, run on all entries in parallel."""
    if kappa * omega >= 1.0:
        raise ProxIllPosedError(
            f"kappa*omega = {kappa * omega} >= 1: prox may be empty or multi-valued"
        )
    if omega == 0.0 or kappa == 0.0:
        return np.sign(values) * np.maximum(np.abs(values) - kappa, 0.0)

    s = np.abs(values)
    active = s > kappa  # below the kink threshold the prox is exactly 0
    w = np.zeros_like(s)
    if np.any(active):
        sa = s[active]
        lo = np.zeros_like(sa)
        hi = sa.copy()
        wa = sa - kappa / (1.0 + 0.5 * omega * sa) ** 2
        np.clip(wa, lo, hi, out=wa)
        for _ in range(NEWTON_MAX_ITER):
            val = wa - sa + kappa / (1.0 + 0.5 * omega * wa) ** 2
            if np.all(np.abs(val) <= NEWTON_TOL * np.maximum(1.0, sa)):
                break
            pos = val > 0.0
            hi = np.where(pos, wa, hi)
            lo = np.where(pos, lo, wa)
            deriv = 1.0 - kappa * omega / (1.0 + 0.5 * omega * wa) ** 3
            nxt = wa - val / deriv
            outside = (nxt <= lo) | (nxt >= hi)
            wa = np.where(outside, 0.5 * (lo + hi), nxt)
        w[active] = wa
    return np.sign(values) * w


def prox_phi_elementwise(x: Point, omega: float, tau: float, gamma: float) -> Point:
    """Prox of tau * sum_ij phi(x_ij; omega): the scalar prox entrywise."""
    if gamma <= 0:
        raise ProxIllPosedError(f"gamma must be positive, got {gamma}")
    kappa = gamma * tau
    return Point(_prox_phi_array(np.asarray(x.data), omega, kappa))


def prox_phi_spectral(x: Point, omega: float, tau: float, gamma: float) -> Point:
    """Prox of tau * sum_i phi(s_i(x); omega) on symmetric matrices.

    phi is absolutely symmetric and nondecreasing on [0, inf), so the prox
    acts on the spectrum: for symmetric x with eigendecomposition
    Q diag(d) Q^T, the singular values are |d| and the prox output is
    Q diag(sign(d) * prox(|d|)) Q^T, which matches the generic SVD route.
    """
    if gamma <= 0:
        raise ProxIllPosedError(f"gamma must be positive, got {gamma}")
    if not x.is_matrix:
        raise ShapeMismatchError("spectral prox needs a symmetric-matrix point")
    kappa = gamma * tau
    vals, vecs = np.linalg.eigh(x.data)
    shrunk = np.sign(vals) * _prox_phi_array(np.abs(vals), omega, kappa)
    return Point((vecs * shrunk) @ vecs.T)


def prox_grid_oracle(f, t: float, gamma: float, radius: float | None = None,
                     step: float = 1e-6) -> float:
    """Brute-force scalar prox: argmin over the grid {t - radius, ..., t + radius}
    of f(w) + (w - t)^2 / (2 gamma), ties broken toward smaller |w|.

    Deliberately independent of every closed-form or Newton path above.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if radius is None:
        radius = 2.0 * abs(t) + 1.0
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")

    n = int(np.floor(2.0 * radius / step)) + 1
    best_obj = np.inf
    best_w = t
    chunk = 4_000_000
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        w = (t - radius) + step * np.arange(start, stop)
        obj = np.asarray(f(w), dtype=float) + (w - t) ** 2 / (2.0 * gamma)
        j = int(np.argmin(obj))
        # resolve near-ties toward smaller |w| within this chunk
        near = np.flatnonzero(obj <= obj[j])
        j = near[np.argmin(np.abs(w[near]))]
        if obj[j] < best_obj or (obj[j] == best_obj and abs(w[j]) < abs(best_w)):
            best_obj = float(obj[j])
            best_w = float(w[j])
    return best_w

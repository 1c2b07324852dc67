"""Set-valued operators in the single-valued-resolvent regime.

Every operator carries a monotonicity modulus sigma (and optionally a
Lipschitz constant) and exposes a resolvent. Only operators whose
resolvents are single valued are representable: all algorithms here run
with 1 + gamma * sigma > 0, where that is guaranteed. Moduli are derived
for the built-in kinds and trusted as declared for custom ones; the
library does not attempt to certify maximality of user operators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import prox
from .stacks import Point, ShapeMismatchError, point_from_json, point_to_json

__all__ = [
    "OperatorSpec",
    "Modulus",
    "IllPosedResolventError",
    "ResolventSolveError",
    "resolvent",
    "reflected_resolvent",
    "modulus_of_F",
    "modulus_of_G",
    "operator_to_json",
    "operator_from_json",
]

AFFINE = "affine"
GRADIENT = "gradient"
PROX_DEFINED = "prox_defined"
PSD_INDICATOR = "psd_indicator"
QUADRATIC_TRACKING = "quadratic_tracking"
PHI_ELEMENTWISE = "phi_elementwise"
PHI_SPECTRAL = "phi_spectral"

_EIG_CHECK_MAX_DIM = 400  # affine sigma validated against lambda_min up to here

GRAD_RESOLVENT_TOL = 1e-12
GRAD_RESOLVENT_MAX_ITER = 200


class IllPosedResolventError(ValueError):
    """1 + gamma * sigma <= 0: the resolvent may be empty or multi-valued."""


class ResolventSolveError(RuntimeError):
    """The inner solve for an implicit resolvent failed to reach tolerance."""


@dataclass(frozen=True)
class Modulus:
    """A monotonicity modulus together with its provenance."""

    sigma: float
    source: str  # "declared" or "derived"


@dataclass(frozen=True)
class OperatorSpec:
    kind: str
    sigma: float
    lipschitz: Optional[float] = None
    matrix: Optional[np.ndarray] = None
    offset: Optional[Point] = None
    func: Optional[Callable] = None
    grad: Optional[Callable] = None
    prox_fn: Optional[Callable] = None
    target: Optional[Point] = None
    tau: float = 0.0
    omega: float = 0.0

    # -- factories ---------------------------------------------------------

    @staticmethod
    def affine(matrix, offset: Point, sigma: Optional[float] = None) -> "OperatorSpec":
        """A(x) = M x + b. Defaults sigma to lambda_min of the symmetric part."""
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeMismatchError(f"affine matrix must be square, got {m.shape}")
        if offset.shape != (m.shape[0],):
            raise ShapeMismatchError(
                f"offset shape {offset.shape} does not match matrix size {m.shape[0]}"
            )
        lam_min = None
        if m.shape[0] <= _EIG_CHECK_MAX_DIM:
            lam_min = float(np.linalg.eigvalsh((m + m.T) / 2.0).min())
        if sigma is None:
            if lam_min is None:
                raise ValueError(
                    "sigma must be declared for affine operators of dimension "
                    f"> {_EIG_CHECK_MAX_DIM}"
                )
            sigma = lam_min
        elif lam_min is not None and sigma > lam_min + 1e-10:
            raise ValueError(
                f"declared sigma {sigma} exceeds lambda_min {lam_min} of the symmetric part"
            )
        m = m.copy()
        m.setflags(write=False)
        return OperatorSpec(kind=AFFINE, sigma=float(sigma), matrix=m, offset=offset)

    @staticmethod
    def scalar_linear(slope: float, intercept: float = 0.0) -> "OperatorSpec":
        """Convenience: A(x) = slope * x + intercept on R (1-vector points)."""
        return OperatorSpec.affine(np.array([[float(slope)]]), Point.vector([intercept]))

    @staticmethod
    def zero(dim: int = 1) -> "OperatorSpec":
        """A == 0 on R^dim."""
        return OperatorSpec.affine(np.zeros((dim, dim)), Point.vector(np.zeros(dim)))

    @staticmethod
    def gradient(func: Callable, grad: Callable, lipschitz: float,
                 sigma: float) -> "OperatorSpec":
        """A = grad f for an L-smooth f; sigma must lie in [-L, L]."""
        if lipschitz < 0:
            raise ValueError(f"lipschitz must be >= 0, got {lipschitz}")
        if not (-lipschitz <= sigma <= lipschitz):
            raise ValueError(
                f"sigma {sigma} must lie in [-L, L] = [{-lipschitz}, {lipschitz}]"
            )
        return OperatorSpec(kind=GRADIENT, sigma=float(sigma),
                            lipschitz=float(lipschitz), func=func, grad=grad)

    @staticmethod
    def prox_defined(prox_fn: Callable, sigma: float,
                     func: Optional[Callable] = None) -> "OperatorSpec":
        """Operator accessible only through prox_fn(x, gamma) -> Point."""
        return OperatorSpec(kind=PROX_DEFINED, sigma=float(sigma),
                            prox_fn=prox_fn, func=func)

    @staticmethod
    def psd_indicator() -> "OperatorSpec":
        """Subdifferential of the PSD-cone indicator; monotone (sigma 0)."""
        return OperatorSpec(kind=PSD_INDICATOR, sigma=0.0)

    @staticmethod
    def quadratic_tracking(target: Point) -> "OperatorSpec":
        """Gradient of (1/2)||. - target||^2; 1-strongly monotone."""
        return OperatorSpec(kind=QUADRATIC_TRACKING, sigma=1.0, lipschitz=1.0,
                            target=target)

    @staticmethod
    def phi_elementwise(tau: float, omega: float) -> "OperatorSpec":
        """Subdifferential of tau * sum_ij phi(x_ij; omega); sigma = -tau*omega."""
        _check_phi_params(tau, omega)
        return OperatorSpec(kind=PHI_ELEMENTWISE, sigma=-tau * omega,
                            tau=float(tau), omega=float(omega))

    @staticmethod
    def phi_spectral(tau: float, omega: float) -> "OperatorSpec":
        """Subdifferential of tau * sum_i phi(s_i(x); omega); sigma = -tau*omega."""
        _check_phi_params(tau, omega)
        return OperatorSpec(kind=PHI_SPECTRAL, sigma=-tau * omega,
                            tau=float(tau), omega=float(omega))

    # -- direct evaluation -------------------------------------------------

    @property
    def is_directly_evaluable(self) -> bool:
        return self.kind in (AFFINE, GRADIENT, QUADRATIC_TRACKING)

    def evaluate(self, x: Point) -> Point:
        if self.kind == AFFINE:
            if x.is_matrix:
                raise ShapeMismatchError("affine operators act on vector points")
            return Point(self.matrix @ x.data + self.offset.data)
        if self.kind == GRADIENT:
            return self.grad(x)
        if self.kind == QUADRATIC_TRACKING:
            return x - self.target
        raise ValueError(f"operator kind {self.kind!r} has no direct evaluation")

    def function_value(self, x: Point) -> float:
        """Value of the underlying function for subdifferential-type kinds."""
        if self.kind == GRADIENT:
            if self.func is None:
                raise ValueError("gradient operator was built without a function value")
            return float(self.func(x))
        if self.kind == QUADRATIC_TRACKING:
            return 0.5 * (x - self.target).norm() ** 2
        if self.kind == PHI_ELEMENTWISE:
            return self.tau * float(np.sum(prox.penalty_phi(x.data, self.omega)))
        if self.kind == PHI_SPECTRAL:
            svals = np.abs(np.linalg.eigvalsh(x.data))
            return self.tau * float(np.sum(prox.penalty_phi(svals, self.omega)))
        if self.kind == PSD_INDICATOR:
            return 0.0 if np.linalg.eigvalsh(x.data).min() >= -1e-10 else np.inf
        if self.kind == AFFINE:
            # gradient of (1/2) x^T M x + b^T x for symmetric M
            if not np.allclose(self.matrix, self.matrix.T):
                raise ValueError("affine function value needs a symmetric matrix")
            return 0.5 * float(x.data @ self.matrix @ x.data) + self.offset.inner(x)
        if self.kind == PROX_DEFINED and self.func is not None:
            return float(self.func(x))
        raise ValueError(f"operator kind {self.kind!r} has no function value")


def _check_phi_params(tau: float, omega: float) -> None:
    if tau < 0 or omega < 0:
        raise ValueError(f"tau and omega must be >= 0, got tau={tau}, omega={omega}")


def _check_well_posed(op: OperatorSpec, gamma: float) -> None:
    if gamma <= 0:
        raise IllPosedResolventError(f"gamma must be positive, got {gamma}")
    if op.kind in (AFFINE, GRADIENT):
        # Direct solves stay meaningful past the 1 + gamma*sigma > 0 gate
        # (e.g. the concave quadratic with gamma > 1, where the prox is
        # empty but the resolvent equation still has a unique solution);
        # failures surface from the solve itself.
        return
    if 1.0 + gamma * op.sigma <= 0.0:
        raise IllPosedResolventError(
            f"1 + gamma*sigma = {1.0 + gamma * op.sigma} <= 0 "
            f"(gamma={gamma}, sigma={op.sigma})"
        )


def _resolvent_affine(op: OperatorSpec, gamma: float, x: Point) -> Point:
    if x.is_matrix:
        raise ShapeMismatchError("affine operators act on vector points")
    n = op.matrix.shape[0]
    lhs = np.eye(n) + gamma * op.matrix
    rhs = x.data - gamma * op.offset.data
    try:
        return Point(np.linalg.solve(lhs, rhs))
    except np.linalg.LinAlgError as exc:
        raise IllPosedResolventError(
            f"I + gamma*M is singular at gamma={gamma}"
        ) from exc


def _resolvent_gradient(op: OperatorSpec, gamma: float, x: Point) -> Point:
    """Solve w + gamma * grad(w) = x by damped Newton.

    The Jacobian I + gamma * Hessian is approximated by forward
    differences of the gradient; in one dimension a sign-change bracket
    doubles as a bisection safeguard when 1 + gamma * sigma > 0 (the
    residual is strictly increasing there). Outside that regime the
    solve proceeds unsafeguarded and failures surface as errors.
    """
    shape = x.shape

    def residual_vec(w_arr):
        g = op.grad(Point(w_arr.reshape(shape)))
        return w_arr + gamma * g.data.ravel() - x.data.ravel()

    w = x.data.ravel().copy()
    n = w.size
    scalar = n == 1 and 1.0 + gamma * op.sigma > 0.0

    lo = hi = None
    if scalar:
        lo, hi = _bracket_scalar(residual_vec, w[0])

    fw = residual_vec(w)
    for _ in range(GRAD_RESOLVENT_MAX_ITER):
        norm_fw = np.linalg.norm(fw)
        if norm_fw <= GRAD_RESOLVENT_TOL * max(1.0, np.linalg.norm(x.data)):
            return Point(w.reshape(shape))
        jac = np.empty((n, n))
        h = 1e-7 * max(1.0, np.linalg.norm(w))
        for j in range(n):
            wp = w.copy()
            wp[j] += h
            jac[:, j] = (residual_vec(wp) - fw) / h
        try:
            step = np.linalg.solve(jac, fw)
        except np.linalg.LinAlgError:
            step = fw  # gradient-descent fallback on a singular Jacobian
        alpha = 1.0
        while alpha > 1e-10:
            w_new = w - alpha * step
            if scalar:
                if not (lo < w_new[0] < hi):
                    w_new = np.array([0.5 * (lo + hi)])
            f_new = residual_vec(w_new)
            if np.linalg.norm(f_new) < norm_fw:
                break
            alpha *= 0.5
        else:
            if scalar:
                w_new = np.array([0.5 * (lo + hi)])
                f_new = residual_vec(w_new)
            else:
                raise ResolventSolveError(
                    f"damped Newton stalled at residual {norm_fw:.3e}"
                )
        if scalar:
            if f_new[0] > 0.0:
                hi = w_new[0]
            else:
                lo = w_new[0]
        w, fw = w_new, f_new

    if np.linalg.norm(fw) <= GRAD_RESOLVENT_TOL * max(1.0, np.linalg.norm(x.data)):
        return Point(w.reshape(shape))
    raise ResolventSolveError(
        f"implicit resolvent did not reach tolerance: residual {np.linalg.norm(fw):.3e}"
    )


def _bracket_scalar(residual_vec, w0: float):
    span = 1.0
    lo = hi = w0
    flo = fhi = residual_vec(np.array([w0]))[0]
    for _ in range(200):
        if flo <= 0.0 <= fhi:
            return lo, hi
        if flo > 0.0:
            lo -= span
            flo = residual_vec(np.array([lo]))[0]
        if fhi < 0.0:
            hi += span
            fhi = residual_vec(np.array([hi]))[0]
        span *= 2.0
    raise ResolventSolveError("could not bracket the scalar resolvent equation")


def resolvent(op: OperatorSpec, gamma: float, x: Point) -> Point:
    """J_{gamma A}(x): the unique w with x in w + gamma A(w).

    Requires 1 + gamma * sigma > 0, the regime where the resolvent of a
    maximal sigma-monotone operator is single valued with full domain.
    """
    _check_well_posed(op, gamma)
    if op.kind == AFFINE:
        return _resolvent_affine(op, gamma, x)
    if op.kind == GRADIENT:
        return _resolvent_gradient(op, gamma, x)
    if op.kind == PROX_DEFINED:
        return op.prox_fn(x, gamma)
    if op.kind == PSD_INDICATOR:
        return prox.prox_psd(x, gamma)
    if op.kind == QUADRATIC_TRACKING:
        return prox.prox_quadratic_tracking(x, op.target, gamma)
    if op.kind == PHI_ELEMENTWISE:
        return prox.prox_phi_elementwise(x, op.omega, op.tau, gamma)
    if op.kind == PHI_SPECTRAL:
        return prox.prox_phi_spectral(x, op.omega, op.tau, gamma)
    raise ValueError(f"unknown operator kind {op.kind!r}")


def reflected_resolvent(op: OperatorSpec, gamma: float, x: Point) -> Point:
    """R_{gamma A} = 2 J_{gamma A} - Id."""
    return 2.0 * resolvent(op, gamma, x) - x


def modulus_of_F(sigmas) -> Modulus:
    """Blockwise product operator: the modulus is the worst block's."""
    sigmas = list(sigmas)
    if not sigmas:
        raise ValueError("modulus_of_F needs a nonempty modulus list")
    return Modulus(sigma=float(min(sigmas)), source="derived")


def modulus_of_G(sigma_m: float, weights) -> Modulus:
    """Coupling operator: sigma_m times the smallest weight."""
    return Modulus(sigma=float(sigma_m) * weights.lam_min, source="derived")


# -- JSON kind tags --------------------------------------------------------

def operator_to_json(op: OperatorSpec) -> dict:
    if op.kind == AFFINE:
        return {"kind": AFFINE, "matrix": op.matrix.tolist(),
                "offset": point_to_json(op.offset), "sigma": op.sigma}
    if op.kind == PSD_INDICATOR:
        return {"kind": PSD_INDICATOR}
    if op.kind == QUADRATIC_TRACKING:
        return {"kind": QUADRATIC_TRACKING, "target": point_to_json(op.target)}
    if op.kind in (PHI_ELEMENTWISE, PHI_SPECTRAL):
        return {"kind": op.kind, "tau": op.tau, "omega": op.omega}
    raise ValueError(f"operator kind {op.kind!r} is not JSON-serializable")


def operator_from_json(obj: dict) -> OperatorSpec:
    kind = obj.get("kind")
    if kind == AFFINE:
        return OperatorSpec.affine(np.asarray(obj["matrix"], dtype=float),
                                   point_from_json(obj["offset"]),
                                   sigma=obj.get("sigma"))
    if kind == PSD_INDICATOR:
        return OperatorSpec.psd_indicator()
    if kind == QUADRATIC_TRACKING:
        return OperatorSpec.quadratic_tracking(point_from_json(obj["target"]))
    if kind == PHI_ELEMENTWISE:
        return OperatorSpec.phi_elementwise(float(obj["tau"]), float(obj["omega"]))
    if kind == PHI_SPECTRAL:
        return OperatorSpec.phi_spectral(float(obj["tau"]), float(obj["omega"]))
    raise ValueError(f"unknown operator kind in JSON: {kind!r}")

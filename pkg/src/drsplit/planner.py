"""Step-size certification for the weighted product-space splitting.

Classifies a modulus profile, solves the step-size maximization program
over the auxiliary weights delta by its equalization characterization,
and provides the equal-weights baseline bound plus the smooth-nonconvex
per-block bounds. A brute-force grid search over the compact feasible
set serves as an independent oracle for the closed-form planner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .stacks import Weights

__all__ = [
    "Case",
    "PlannerInput",
    "PlannerResult",
    "SmoothPlan",
    "classify",
    "feasible_delta",
    "optimal_delta",
    "brute_force_delta",
    "naive_stepsize",
    "smooth_stepsize",
]

CERT_SAFETY = 0.99  # certificate slacks are reported at this fraction of the max step


class Case(Enum):
    MONOTONE_B = "MonotoneB"
    NONMONOTONE_A = "NonmonotoneA"
    UNSUPPORTED = "Unsupported"


@dataclass(frozen=True)
class PlannerInput:
    """Moduli sigma_1..sigma_m, block weights, and relaxation mu."""

    sigmas: tuple
    weights: Weights
    mu: float
    lipschitz: Optional[tuple] = None

    def __post_init__(self):
        sig = tuple(float(s) for s in self.sigmas)
        if len(sig) < 2:
            raise ValueError("need at least two moduli")
        if self.weights.count != len(sig) - 1:
            raise ValueError(
                f"need {len(sig) - 1} weights for {len(sig)} operators, "
                f"got {self.weights.count}"
            )
        if not (0.0 < self.mu < 2.0):
            raise ValueError(f"mu must lie in (0, 2), got {self.mu}")
        object.__setattr__(self, "sigmas", sig)
        if self.lipschitz is not None:
            lip = tuple(float(v) for v in self.lipschitz)
            if len(lip) != len(sig) - 1:
                raise ValueError("lipschitz list must cover blocks 1..m-1")
            object.__setattr__(self, "lipschitz", lip)

    @property
    def m(self) -> int:
        return len(self.sigmas)

    @property
    def sigma_m(self) -> float:
        return self.sigmas[-1]

    @property
    def index_set(self) -> tuple:
        """I: blocks among 1..m-1 with nonzero modulus (0-based indices)."""
        return tuple(i for i, s in enumerate(self.sigmas[:-1]) if s != 0.0)

    @property
    def index_set_neg(self) -> tuple:
        return tuple(i for i in self.index_set if self.sigmas[i] < 0.0)


@dataclass(frozen=True)
class PlannerResult:
    case: Case
    lambda_bar_star: float  # math.inf in the monotone case
    delta_star: Optional[dict] = None  # block index -> delta_i, over I
    certificate: Optional[dict] = None  # block index -> constraint slack
    t_star: Optional[float] = None  # common value of the per-block bound functions
    reason: Optional[str] = None  # which condition failed, when Unsupported


def classify(inp: PlannerInput) -> tuple:
    """Which convergence regime the modulus profile falls in; returns (case, reason)."""
    sig = inp.sigmas
    if all(s >= 0.0 for s in sig):
        return Case.MONOTONE_B, None
    if inp.sigma_m == 0.0:
        return Case.UNSUPPORTED, (
            "some modulus is negative but the last operator's modulus is zero; "
            "reorder so an operator with nonzero modulus comes last"
        )
    total = sum(sig)
    if total <= 0.0:
        return Case.UNSUPPORTED, f"moduli sum {total} is not positive"
    return Case.NONMONOTONE_A, None


def feasible_delta(sigmas: Sequence[float], index_set: Sequence[int]) -> dict:
    """A closed-form strictly feasible delta:

        delta_i = 1/|I| + (sum_{j in I, j != i} sigma_j - (|I|-1) sigma_i)
                          / (sigma_m |I|)

    Valid whenever sum sigma > 0, sigma_m != 0 and I is nonempty; then
    sum delta_i = 1 and sigma_i + sigma_m delta_i > 0 on I.
    """
    sigmas = tuple(float(s) for s in sigmas)
    sigma_m = sigmas[-1]
    idx = tuple(index_set)
    if not idx:
        raise ValueError("index set I must be nonempty")
    if sigma_m == 0.0:
        raise ValueError("sigma_m must be nonzero")
    if sum(sigmas) <= 0.0:
        raise ValueError("moduli must sum to a positive value")
    n = len(idx)
    delta = {}
    for i in idx:
        others = sum(sigmas[j] for j in idx if j != i)
        delta[i] = 1.0 / n + (others - (n - 1) * sigmas[i]) / (sigma_m * n)
    return delta


def _delta_of_t(inp: PlannerInput, t: float) -> dict:
    """Invert the equalized per-block bound: delta_i(t) = -lambda_i sigma_i /
    (sigma_m (t sigma_i + lambda_i))."""
    sm = inp.sigma_m
    return {
        i: -inp.weights[i] * inp.sigmas[i] / (sm * (t * inp.sigmas[i] + inp.weights[i]))
        for i in inp.index_set
    }


def _g(inp: PlannerInput, t: float) -> float:
    return sum(_delta_of_t(inp, t).values()) - 1.0


def optimal_delta(inp: PlannerInput) -> PlannerResult:
    """Solve the step-size maximization program.

    In the nonmonotone case the solution equalizes the per-block bound
    functions f_i(delta_i) = -lambda_i (sigma_i + sigma_m delta_i) /
    (sigma_i sigma_m delta_i) at a common value t > 0; inverting for
    delta_i(t) turns the simplex constraint into a scalar root equation
    g(t) = sum_i delta_i(t) - 1 = 0, which is strictly monotone on the
    bracket (increasing when sigma_m > 0, decreasing when sigma_m < 0).
    The maximal step is (1 - mu/2) t*.
    """
    case, reason = classify(inp)
    if case is Case.MONOTONE_B:
        return PlannerResult(case=case, lambda_bar_star=math.inf)
    if case is Case.UNSUPPORTED:
        return PlannerResult(case=case, lambda_bar_star=float("nan"), reason=reason)

    idx = inp.index_set
    if len(idx) == 1:
        # the simplex constraint forces delta = (1,)
        i = idx[0]
        t_star = -inp.weights[i] * (inp.sigmas[i] + inp.sigma_m) / (
            inp.sigmas[i] * inp.sigma_m)
        delta = {i: 1.0}
    else:
        t_star = _bisect_root(inp)
        delta = _delta_of_t(inp, t_star)

    lam_bar = (1.0 - inp.mu / 2.0) * t_star
    lam_cert = CERT_SAFETY * lam_bar
    cert = {
        i: 1.0 + (lam_cert / inp.weights[i])
        * (inp.sigmas[i] * inp.sigma_m * delta[i])
        / (inp.sigmas[i] + inp.sigma_m * delta[i])
        - inp.mu / 2.0
        for i in idx
    }
    return PlannerResult(case=case, lambda_bar_star=lam_bar, delta_star=delta,
                         certificate=cert, t_star=t_star)


def _bisect_root(inp: PlannerInput) -> float:
    neg = inp.index_set_neg
    eps = 1e-14
    if neg:
        t_hi = min(inp.weights[i] / (-inp.sigmas[i]) for i in neg)
        t_hi *= 1.0 - 1e-13
        t_lo = eps
    else:
        # sigma_m < 0 here; g decreases from positive toward -1, so double
        # until the sign flips
        t_lo = eps
        t_hi = 1.0
        for _ in range(200):
            if _g(inp, t_hi) < 0.0:
                break
            t_lo = t_hi
            t_hi *= 2.0
        else:
            raise RuntimeError("no sign change while expanding the root bracket")

    g_lo, g_hi = _g(inp, t_lo), _g(inp, t_hi)
    if g_lo == 0.0:
        return t_lo
    if g_hi == 0.0:
        return t_hi
    if g_lo * g_hi > 0.0:
        raise RuntimeError(
            f"no root in bracket: g({t_lo}) = {g_lo}, g({t_hi}) = {g_hi}; "
            "the input should have been classified Unsupported"
        )
    # bisect past the nominal tolerance down to float exhaustion so the
    # simplex constraint holds to near machine precision even when g is steep
    for _ in range(200):
        t_mid = 0.5 * (t_lo + t_hi)
        if t_mid == t_lo or t_mid == t_hi:
            return t_mid
        g_mid = _g(inp, t_mid)
        if g_mid == 0.0:
            return t_mid
        if (g_mid > 0.0) == (g_lo > 0.0):
            t_lo, g_lo = t_mid, g_mid
        else:
            t_hi, g_hi = t_mid, g_mid
    return 0.5 * (t_lo + t_hi)


def _bound_objective(inp: PlannerInput, delta: dict) -> float:
    """min_i (1 - mu/2) f_i(delta_i), or -inf when infeasible, +inf when every
    constraint is vacuous for the given delta."""
    best = math.inf
    for i in inp.index_set:
        si, sm, di = inp.sigmas[i], inp.sigma_m, delta[i]
        denom = si + sm * di
        if denom <= 0.0:
            return -math.inf
        coeff = si * sm * di / denom
        if coeff >= 0.0:
            continue  # constraint holds for every positive step
        best = min(best, -(denom * inp.weights[i]) / (si * sm * di))
    return (1.0 - inp.mu / 2.0) * best


def _per_block_bound(inp: PlannerInput, i: int, di: np.ndarray) -> np.ndarray:
    """f_i(delta_i) for one block, vectorized: -inf where the coordinate is
    infeasible, +inf where the step constraint is vacuous."""
    si, sm = inp.sigmas[i], inp.sigma_m
    denom = si + sm * di
    with np.errstate(divide="ignore", invalid="ignore"):
        f_i = np.where(si * sm * di < 0.0,
                       -(denom * inp.weights[i]) / (si * sm * di),
                       np.inf)
    return np.where(denom > 0.0, f_i, -np.inf)


def _bound_objective_grid(inp: PlannerInput, deltas: dict) -> np.ndarray:
    """Vectorized _bound_objective over parallel arrays of delta values."""
    size = next(iter(deltas.values())).shape
    best = np.full(size, np.inf)
    for i in inp.index_set:
        best = np.minimum(best, _per_block_bound(inp, i, deltas[i]))
    return (1.0 - inp.mu / 2.0) * best


def brute_force_delta(inp: PlannerInput, grid: int = 10_000,
                      refine_rounds: int = 10) -> tuple:
    """Independent grid-search oracle for the step-size program.

    Enumerates delta on a grid over the compact slice of the simplex cut
    out by sigma_i + sigma_m delta_i > 0 and evaluates the attainable
    step bound directly from the constraint system (never through the
    equalization closed form). `grid` is the total point budget, split
    evenly across the free coordinates; the optional shrinking refinement
    rounds around the incumbent sharpen the maximizer (the objective is
    quasi-concave on the feasible slice, so this cannot jump basins).
    Ties break toward smaller max |delta_i|.
    """
    if all(s >= 0.0 for s in inp.sigmas):
        raise ValueError("brute force oracle needs a nonmonotone profile")
    if inp.sigma_m == 0.0:
        raise ValueError("brute force oracle needs a nonzero last modulus")

    idx = inp.index_set
    if len(idx) == 1:
        delta = {idx[0]: 1.0}
        if inp.sigmas[idx[0]] + inp.sigma_m <= 0.0:
            raise ValueError("empty feasible grid: the forced delta is infeasible")
        return delta, _bound_objective(inp, delta)

    free = idx[:-1]
    last = idx[-1]
    sm = inp.sigma_m

    # per-coordinate feasibility bounds from sigma_i + sigma_m delta_i >= 0
    margin = 1e-9
    lo, hi = {}, {}
    for i in idx:
        edge = -inp.sigmas[i] / sm
        if sm > 0.0:
            lo[i], hi[i] = edge + margin, None
        else:
            lo[i], hi[i] = None, edge - margin
    # close the box using the simplex constraint
    for i in idx:
        others = [j for j in idx if j != i]
        if sm > 0.0:
            hi[i] = 1.0 - sum(lo[j] for j in others)
        else:
            lo[i] = 1.0 - sum(hi[j] for j in others)
    for i in idx:
        if lo[i] >= hi[i]:
            raise ValueError("empty feasible grid: resolution or margins too coarse")

    per_axis = max(3, int(round(grid ** (1.0 / len(free)))))
    intervals = {i: (lo[i], hi[i]) for i in idx}
    best_obj = -math.inf
    best_delta = None

    for _ in range(max(1, refine_rounds)):
        axes = [np.linspace(*intervals[i], per_axis) for i in free]
        mesh = np.meshgrid(*axes, indexing="ij")
        deltas = {i: m.ravel() for i, m in zip(free, mesh)}
        deltas[last] = 1.0 - sum(deltas[i] for i in free)
        slack = 1e-12 * max(1.0, abs(intervals[last][0]), abs(intervals[last][1]))
        in_box = ((deltas[last] >= intervals[last][0] - slack)
                  & (deltas[last] <= intervals[last][1] + slack))
        obj = _bound_objective_grid(inp, deltas)
        obj[~in_box] = -np.inf
        if not np.any(np.isfinite(obj)):
            raise ValueError("empty feasible grid: resolution too coarse")
        top = float(np.max(obj))
        ties = np.flatnonzero(obj == top)
        sup = np.max(np.abs(np.stack([deltas[i][ties] for i in idx])), axis=0)
        pick = ties[int(np.argmin(sup))]
        if top > best_obj:
            best_obj = top
            best_delta = {i: float(deltas[i][pick]) for i in idx}

        # Shrink every coordinate to the superlevel interval
        # {delta_i : f_i(delta_i) >= incumbent level}, located by a fine
        # one-dimensional scan of the block's bound function; any point
        # beating the incumbent, in particular the true maximizer, has
        # every per-block bound at least this large, so it survives. The
        # simplex constraint then propagates the intervals against each
        # other, which closes the sides the superlevels leave open.
        level = best_obj / (1.0 - inp.mu / 2.0)
        for i in idx:
            line = np.linspace(*intervals[i], 4096)
            cell = (intervals[i][1] - intervals[i][0]) / 4095.0
            ok = _per_block_bound(inp, i, line) >= level
            if best_delta is not None:
                # the incumbent coordinate always qualifies; guard against
                # it falling between scan points
                ok |= np.abs(line - best_delta[i]) <= cell
            vals = line[ok]
            if vals.size:
                intervals[i] = (max(intervals[i][0], float(vals.min()) - cell),
                                min(intervals[i][1], float(vals.max()) + cell))
        for _ in range(2):
            for i in idx:
                rest_lo = sum(intervals[j][0] for j in idx if j != i)
                rest_hi = sum(intervals[j][1] for j in idx if j != i)
                intervals[i] = (max(intervals[i][0], 1.0 - rest_hi),
                                min(intervals[i][1], 1.0 - rest_lo))
        if all(b - a <= 1e-13 * max(1.0, abs(a)) for a, b in intervals.values()):
            break

    return best_delta, best_obj


def naive_stepsize(sigmas: Sequence[float], mu: float) -> Optional[float]:
    """Equal-weights baseline bound from the two-operator theory.

    Uses sigma_hat = min over the first m-1 moduli. Returns the maximal
    lambda (already on the lambda = gamma/(m-1) scale), +inf when every
    positive step is admissible, or None when neither applicability
    condition holds.
    """
    sigmas = tuple(float(s) for s in sigmas)
    if not (0.0 < mu < 2.0):
        raise ValueError(f"mu must lie in (0, 2), got {mu}")
    m = len(sigmas)
    sigma_hat = min(sigmas[:-1])
    sigma_m = sigmas[-1]
    if sigma_hat == 0.0 and sigma_m == 0.0:
        return math.inf
    if sigma_hat + sigma_m / (m - 1) <= 0.0:
        return None
    coeff = sigma_hat * sigma_m / (sigma_hat * (m - 1) + sigma_m)
    if coeff >= 0.0:
        return math.inf
    gamma_bar = (mu / 2.0 - 1.0) / coeff
    return gamma_bar / (m - 1)


@dataclass(frozen=True)
class SmoothPlan:
    gammas_bar: tuple  # per-block step caps
    lambda_max: float  # min_i lambda_i * gamma_bar_i
    lam: float  # the step the coefficients below are evaluated at
    gammas: tuple  # lam / lambda_i
    c_coefficients: tuple  # descent coefficients c_i(gamma_i)


def smooth_stepsize(lipschitz: Sequence[float], sigmas: Sequence[float],
                    weights: Weights, mu: float,
                    lam: Optional[float] = None) -> SmoothPlan:
    """Per-block step caps and descent coefficients for smooth blocks.

    With sigma_i in [-L_i, 0], the cap is

        gamma_bar_i = 1/L_i            when -2 sigma_i < (2 - mu) L_i,
                      (1 - mu/2)/(-sigma_i)  otherwise,

    and the merit decrease per iteration is at least
    sum_i c_i(gamma_i) ||z_i^{k+1} - z_i^k||^2 with the two-branch
    coefficient below, strictly positive for gamma_i < gamma_bar_i.
    """
    lips = tuple(float(v) for v in lipschitz)
    sigs = tuple(float(s) for s in sigmas)
    if len(lips) != len(sigs) or len(lips) != weights.count:
        raise ValueError("lipschitz, sigmas and weights must cover blocks 1..m-1")
    if not (0.0 < mu < 2.0):
        raise ValueError(f"mu must lie in (0, 2), got {mu}")
    for i, (li, si) in enumerate(zip(lips, sigs)):
        if li <= 0.0:
            raise ValueError(f"block {i}: Lipschitz constant must be positive")
        if not (-li <= si <= 0.0):
            raise ValueError(
                f"block {i}: sigma {si} must lie in [-L, 0] = [{-li}, 0]"
            )

    gammas_bar = tuple(
        1.0 / li if -2.0 * si < (2.0 - mu) * li else -(1.0 / si) * (1.0 - mu / 2.0)
        for li, si in zip(lips, sigs)
    )
    lambda_max = min(w * gb for w, gb in zip(weights, gammas_bar))
    if lam is None:
        lam = 0.9 * lambda_max
    if not (0.0 < lam < lambda_max):
        raise ValueError(f"lambda {lam} must lie in (0, {lambda_max})")
    gammas = tuple(lam / w for w in weights)

    def c_i(gamma, li, si):
        first_branch = (-2.0 * si < (2.0 - mu) * li
                        and mu / (2.0 * (li + si)) < gamma
                        and (si == 0.0 or gamma < (1.0 - mu / 2.0) / (-si)))
        if first_branch:
            return -(2.0 * gamma ** 2 * li ** 2 - mu * gamma * li - (2.0 - mu)) / (
                2.0 * mu * gamma)
        return -(2.0 * gamma ** 2 * si ** 2 - mu * gamma * si - (2.0 - mu)) / (
            2.0 * mu * gamma)

    coeffs = tuple(c_i(g, li, si) for g, li, si in zip(gammas, lips, sigs))
    return SmoothPlan(gammas_bar=gammas_bar, lambda_max=lambda_max, lam=lam,
                      gammas=gammas, c_coefficients=coeffs)

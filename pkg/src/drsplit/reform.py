"""Weighted product-space reformulation and its warped resolvents.

An m-operator inclusion 0 in A_1(x) + ... + A_m(x) is recast on
H^(m-1) as a two-operator problem: a blockwise operator built from
A_1..A_{m-1} and a coupling operator that ties the diagonal to A_m.
Only the resolvent consequences of the coupling operator are
materialized; the algorithm never touches it directly. Relative to the
Lambda-weighted metric, the blockwise resolvent acts per block with step
lambda / lambda_i and the coupling resolvent averages, resolves A_m at
step lambda, and re-embeds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .operators import (
    OperatorSpec,
    operator_from_json,
    operator_to_json,
    resolvent,
)
from .stacks import (
    Point,
    ShapeMismatchError,
    Stack,
    Weights,
    embed,
    point_from_json,
    point_to_json,
    weighted_average,
)

__all__ = [
    "InclusionProblem",
    "ReformulationContext",
    "ZeroCertificate",
    "resolvent_F_warped",
    "resolvent_G_warped",
    "zero_certificate",
    "problem_to_json",
    "problem_from_json",
    "load_problem",
]


@dataclass(frozen=True)
class InclusionProblem:
    """Ordered operators A_1..A_m acting on one shape; A_m is distinguished."""

    operators: tuple
    shape: tuple

    def __post_init__(self):
        ops = tuple(self.operators)
        if len(ops) < 2:
            raise ValueError(f"need at least two operators, got {len(ops)}")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "shape", tuple(self.shape))

    @property
    def m(self) -> int:
        return len(self.operators)

    @property
    def sigmas(self) -> tuple:
        return tuple(op.sigma for op in self.operators)

    @property
    def last(self) -> OperatorSpec:
        return self.operators[-1]

    def zero_point(self) -> Point:
        return Point(np.zeros(self.shape))


@dataclass(frozen=True)
class ReformulationContext:
    """Weights and step size, validated for single-valued resolvents.

    Requires 1 + (lambda/lambda_i) sigma_i > 0 for every block and
    1 + lambda sigma_m > 0, the regime where both warped resolvents are
    single valued with full domain. Fails fast naming the offending block.
    """

    problem: InclusionProblem
    weights: Weights
    lam: float

    def __post_init__(self):
        if self.weights.count != self.problem.m - 1:
            raise ValueError(
                f"need {self.problem.m - 1} weights, got {self.weights.count}"
            )
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        sigmas = self.problem.sigmas
        for i, (li, si) in enumerate(zip(self.weights, sigmas[:-1])):
            gamma_i = self.lam / li
            if 1.0 + gamma_i * si <= 0.0:
                raise ValueError(
                    f"block {i}: 1 + (lambda/lambda_i)*sigma_i = "
                    f"{1.0 + gamma_i * si} <= 0 (lambda={self.lam}, "
                    f"lambda_i={li}, sigma_i={si})"
                )
        if 1.0 + self.lam * sigmas[-1] <= 0.0:
            raise ValueError(
                f"last operator: 1 + lambda*sigma_m = "
                f"{1.0 + self.lam * sigmas[-1]} <= 0"
            )

    @property
    def gammas(self) -> tuple:
        return tuple(self.lam / li for li in self.weights)


def resolvent_F_warped(ctx: ReformulationContext, x: Stack) -> Stack:
    """Blockwise warped resolvent: block i is J_{(lambda/lambda_i) A_i}(x_i)."""
    if x.block_count != ctx.problem.m - 1:
        raise ShapeMismatchError(
            f"stack has {x.block_count} blocks, problem needs {ctx.problem.m - 1}"
        )
    return Stack(tuple(
        resolvent(op, gamma_i, xi)
        for op, gamma_i, xi in zip(ctx.problem.operators[:-1], ctx.gammas, x)
    ))


def resolvent_G_warped(ctx: ReformulationContext, x: Stack) -> Stack:
    """Coupling warped resolvent: average, resolve A_m at step lambda, re-embed."""
    a = resolvent_G_point(ctx, x)
    return embed(a, ctx.problem.m - 1)


def resolvent_G_point(ctx: ReformulationContext, x: Stack) -> Point:
    """The common block of the coupling resolvent: J_{lambda A_m}(sum lambda_i x_i)."""
    avg = weighted_average(x, ctx.weights)
    return resolvent(ctx.problem.last, ctx.lam, avg)


@dataclass(frozen=True)
class ZeroCertificate:
    """Report on the subgradient-selection sum at (or near) a candidate zero.

    `residual` is the plain norm of the sum; `mean_sq` is its entry-averaged
    square, the same metric the solver's stopping rule uses.
    """

    residual: float
    mean_sq: float
    tol: float
    success: bool
    exact: bool  # True when every selection is a direct evaluation at z itself
    block_kinds: tuple
    fallback_blocks: tuple  # indices certified through the prox relation

    def __str__(self):
        mode = "exact" if self.exact else "prox-relation"
        status = "PASS" if self.success else "FAIL"
        return (f"zero certificate [{status}]: residual {self.residual:.3e}, "
                f"mean-sq {self.mean_sq:.3e} (tol {self.tol:.1e}, {mode}; "
                f"fallback blocks {list(self.fallback_blocks)})")


def zero_certificate(prob: InclusionProblem, z: Point, tol: float,
                     gamma: float = 1e-3) -> ZeroCertificate:
    """Certify that z is (near) a zero of A_1 + ... + A_m.

    Directly evaluable operators contribute A_i(z). Prox-defined kinds
    fall back to the resolvent relation: with w_i = J_{gamma A_i}(z), the
    selection (z - w_i) / gamma lies in A_i(w_i), a point within
    O(gamma) of z, and the block is flagged as a fallback. The report is
    always produced; success means the residual norm is below tol.
    """
    total = Point(np.zeros(prob.shape))
    fallback = []
    kinds = []
    for i, op in enumerate(prob.operators):
        kinds.append(op.kind)
        if op.is_directly_evaluable:
            total = total + op.evaluate(z)
        else:
            w = resolvent(op, gamma, z)
            total = total + (1.0 / gamma) * (z - w)
            fallback.append(i)
    res = total.norm()
    return ZeroCertificate(residual=res, mean_sq=total.mean_square(), tol=tol,
                           success=res < tol, exact=not fallback,
                           block_kinds=tuple(kinds),
                           fallback_blocks=tuple(fallback))


def certificate_from_final_state(prob: InclusionProblem, weights: Weights,
                                 lam: float, x: Stack, z: Stack,
                                 y: Point, tol: float) -> ZeroCertificate:
    """Subgradient-sum residual assembled from the final resolvent relations.

    From z_i = J_{(lambda/lambda_i) A_i}(x_i) the selection
    (lambda_i/lambda)(x_i - z_i) lies in A_i(z_i), and from the coupling
    step the selection (sum lambda_i (2 z_i - x_i) - y) / lambda lies in
    A_m(y). Their sum telescopes to (sum lambda_i z_i - y) / lambda, which
    vanishes exactly at a fixed point. Success is judged on the
    entry-averaged square, the metric of the stopping rule.
    """
    total = Point(np.zeros(prob.shape))
    for li, xi, zi in zip(weights, x, z):
        total = total + (li / lam) * (xi - zi)
    v = Point(np.zeros(prob.shape))
    for li, xi, zi in zip(weights, x, z):
        v = v + li * (2.0 * zi - xi)
    total = total + (1.0 / lam) * (v - y)
    msq = total.mean_square()
    return ZeroCertificate(residual=total.norm(), mean_sq=msq, tol=tol,
                           success=msq < tol, exact=False,
                           block_kinds=tuple(op.kind for op in prob.operators),
                           fallback_blocks=tuple(range(prob.m)))


# -- problem JSON ----------------------------------------------------------

def problem_to_json(prob: InclusionProblem) -> dict:
    return {
        "shape": list(prob.shape),
        "operators": [operator_to_json(op) for op in prob.operators],
    }


def problem_from_json(obj: dict) -> InclusionProblem:
    shape = tuple(obj["shape"])
    ops = tuple(operator_from_json(o) for o in obj["operators"])
    return InclusionProblem(operators=ops, shape=shape)


def load_problem(path) -> tuple:
    """Read a problem-spec JSON file; returns (problem, optional x0 stacks)."""
    with open(path) as fh:
        obj = json.load(fh)
    prob = problem_from_json(obj)
    x0: Optional[Stack] = None
    if "x0" in obj:
        pts = [point_from_json(p) for p in obj["x0"]]
        x0 = Stack(tuple(pts))
    return prob, x0

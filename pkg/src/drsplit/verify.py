"""Seeded invariant suites behind the `verify` CLI subcommand.

Each suite replays a family of analytic identities or oracle agreements
on randomly drawn instances and reports per-check pass/fail counters.
These are runtime self-checks; the pytest suite covers the same ground
(and more) with fixed frozen values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import DrParams, fejer_monitor, run
from .operators import OperatorSpec, resolvent
from .planner import PlannerInput, brute_force_delta, optimal_delta
from .prox import penalty_phi, prox_grid_oracle, prox_phi_scalar
from .reform import InclusionProblem
from .stacks import Point, Stack, Weights, embed, lambda_inner

__all__ = ["SuiteReport", "run_suite", "SUITES"]


@dataclass
class SuiteReport:
    suite: str
    seed: int
    checks: list = field(default_factory=list)  # (name, passed, detail)

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append((name, bool(passed), detail))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def lines(self):
        for name, ok, detail in self.checks:
            status = "pass" if ok else "FAIL"
            suffix = f" ({detail})" if detail else ""
            yield f"  [{status}] {name}{suffix}"


def _random_stack(rng, blocks: int, dim: int) -> Stack:
    return Stack(tuple(Point.vector(rng.standard_normal(dim))
                       for _ in range(blocks)))


def _random_weights(rng, count: int) -> Weights:
    raw = rng.uniform(0.2, 1.0, count)
    return Weights.of(tuple(raw / raw.sum()))


def suite_identities(seed: int) -> SuiteReport:
    rep = SuiteReport("identities", seed)
    rng = np.random.default_rng(seed)
    ok_sq = ok_sq2 = True
    for _ in range(200):
        alpha, beta = rng.standard_normal(2)
        x = Point.vector(rng.standard_normal(4))
        y = Point.vector(rng.standard_normal(4))
        lhs = (alpha * x + beta * y).norm() ** 2
        rhs = (alpha * (alpha + beta) * x.norm() ** 2
               + beta * (alpha + beta) * y.norm() ** 2
               - alpha * beta * (x - y).norm() ** 2)
        scale = max(1.0, abs(lhs))
        ok_sq &= abs(lhs - rhs) <= 1e-10 * scale
        if abs(alpha + beta) > 1e-3:
            lhs2 = alpha * x.norm() ** 2 + beta * y.norm() ** 2
            rhs2 = (alpha * beta / (alpha + beta) * (x - y).norm() ** 2
                    + (alpha * x + beta * y).norm() ** 2 / (alpha + beta))
            ok_sq2 &= abs(lhs2 - rhs2) <= 1e-10 * max(1.0, abs(lhs2))
    rep.add("squared-norm identity", ok_sq)
    rep.add("squared-norm rearrangement", ok_sq2)

    ok_bilin = True
    for _ in range(50):
        w = _random_weights(rng, 3)
        x, y, z = (_random_stack(rng, 3, 5) for _ in range(3))
        a, b = rng.standard_normal(2)
        lhs = lambda_inner(a * x + b * y, z, w)
        rhs = a * lambda_inner(x, z, w) + b * lambda_inner(y, z, w)
        ok_bilin &= abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))
        ok_bilin &= abs(lambda_inner(x, y, w) - lambda_inner(y, x, w)) <= 1e-12
        ok_bilin &= lambda_inner(x, x, w) >= 0.0
    rep.add("weighted inner product bilinear/symmetric/psd", ok_bilin)
    return rep


def suite_resolvents(seed: int) -> SuiteReport:
    rep = SuiteReport("resolvents", seed)
    rng = np.random.default_rng(seed)

    ok_affine = True
    for _ in range(100):
        n = int(rng.integers(1, 5))
        m_raw = rng.standard_normal((n, n))
        m_sym = (m_raw + m_raw.T) / 2 + n * np.eye(n)
        op = OperatorSpec.affine(m_sym, Point.vector(rng.standard_normal(n)))
        gamma = float(rng.uniform(0.05, 2.0))
        x = Point.vector(rng.standard_normal(n))
        w = resolvent(op, gamma, x)
        # definitional check: x = w + gamma (M w + b)
        lhs = w.data + gamma * (m_sym @ w.data + op.offset.data)
        ok_affine &= np.allclose(lhs, x.data, atol=1e-10)
    rep.add("affine resolvent solves the definitional equation", ok_affine)

    ok_coco = True
    for _ in range(100):
        slope = float(rng.uniform(-0.4, 2.0))
        op = OperatorSpec.scalar_linear(slope)
        gamma = float(rng.uniform(0.05, 1.5))
        if 1.0 + gamma * op.sigma <= 1e-6:
            continue
        x, y = (Point.vector(rng.standard_normal(1)) for _ in range(2))
        jx, jy = resolvent(op, gamma, x), resolvent(op, gamma, y)
        lhs = (x - y).inner(jx - jy)
        rhs = (1.0 + gamma * op.sigma) * (jx - jy).norm() ** 2
        ok_coco &= lhs >= rhs - 1e-9
    rep.add("resolvent cocoercivity inequality", ok_coco)

    # nonconvex split between prox and resolvent: f(t) = -t^2/2
    op = OperatorSpec.gradient(lambda p: -0.5 * p.norm() ** 2,
                               lambda p: -1.0 * p, lipschitz=1.0, sigma=-1.0)
    gamma = 2.0
    t = 1.0
    res = resolvent(op, gamma, Point.vector([t]))
    expected = t / (1.0 - gamma)
    rep.add("concave-quadratic resolvent t/(1-gamma)",
            abs(res.data[0] - expected) <= 1e-9,
            f"gamma={gamma}, got {res.data[0]:.6f}")
    return rep


def suite_prox(seed: int) -> SuiteReport:
    rep = SuiteReport("prox", seed)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        omega = float(rng.uniform(0.0, 2.0))
        kappa = float(rng.uniform(0.0, min(1.2, 0.95 / max(omega, 1e-9))))
        t = float(rng.uniform(-0.3, 0.3))
        p = prox_phi_scalar(t, omega, kappa)
        g = prox_grid_oracle(lambda w: kappa * penalty_phi(w, omega), t, 1.0,
                             radius=max(abs(t), 1e-3))
        worst = max(worst, abs(p - g))
    rep.add("scalar penalty prox vs grid oracle", worst <= 1e-5,
            f"max deviation {worst:.2e}")
    return rep


def suite_planner(seed: int) -> SuiteReport:
    rep = SuiteReport("planner", seed)
    rng = np.random.default_rng(seed)
    agree = 0
    total = 0
    worst = 0.0
    while total < 100:
        m = int(rng.integers(2, 6))
        sig = np.round(rng.uniform(-1.0, 2.0, m), 3)
        inp_ok = (any(s < 0 for s in sig) and sig[-1] != 0.0 and sig.sum() > 0.05)
        if not inp_ok:
            continue
        total += 1
        w = _random_weights(rng, m - 1)
        inp = PlannerInput(sigmas=tuple(sig), weights=w,
                           mu=float(rng.uniform(0.5, 1.5)))
        res = optimal_delta(inp)
        _, lam_bf = brute_force_delta(inp)
        rel = abs(res.lambda_bar_star - lam_bf) / max(abs(res.lambda_bar_star), 1e-12)
        worst = max(worst, rel)
        if rel <= 1e-3:
            agree += 1
    rep.add("closed form vs grid oracle on random profiles", agree == total,
            f"{agree}/{total} within 1e-3 (worst {worst:.2e})")
    return rep


def _affine_test_problem():
    ops = (OperatorSpec.scalar_linear(1.0, -3.0),
           OperatorSpec.scalar_linear(1.0),
           OperatorSpec.scalar_linear(2.0))
    return InclusionProblem(ops, shape=(1,))


def suite_fejer(seed: int) -> SuiteReport:
    rep = SuiteReport("fejer", seed)
    rng = np.random.default_rng(seed)
    prob = _affine_test_problem()
    w = Weights.equal(2)
    params = DrParams(mu=1.0, lam=0.5, weights=w, max_iter=3000, tol=1e-20)
    x0 = Stack((Point.vector(rng.uniform(-5, 5, 1)),
                Point.vector(rng.uniform(-5, 5, 1))))
    result = run(params, prob, x0, keep_iterates=True)
    dists, violation = fejer_monitor(result.xs, result.state.x, w)
    rep.add("distances to the limit are non-increasing", violation is None,
            f"{len(dists)} iterates")
    return rep


def suite_merit(seed: int) -> SuiteReport:
    from .planner import smooth_stepsize

    rep = SuiteReport("merit", seed)
    rng = np.random.default_rng(seed)
    curvature = -0.2
    lips = 1.0
    ops = (
        OperatorSpec.gradient(
            lambda p: 0.5 * curvature * p.norm() ** 2,
            lambda p: curvature * p, lipschitz=lips, sigma=curvature),
        OperatorSpec.gradient(
            lambda p: 0.5 * p.norm() ** 2 - 2.0 * float(np.sum(p.data)),
            lambda p: p - Point.vector(np.full(p.entry_count, 2.0)),
            lipschitz=1.0, sigma=0.0),
        OperatorSpec.phi_elementwise(tau=0.3, omega=1.0),
    )
    prob = InclusionProblem(ops, shape=(2,))
    w = Weights.equal(2)
    plan = smooth_stepsize([lips, 1.0], [curvature, 0.0], w, mu=1.0)
    params = DrParams(mu=1.0, lam=plan.lam, weights=w, max_iter=400, tol=1e-22)
    x0 = embed(Point.vector(rng.uniform(-2, 2, 2)), 2)
    result = run(params, prob, x0, keep_iterates=True, compute_merit=True)
    merits = [v for v in result.log.merit if v is not None]
    ok = True
    for k in range(len(merits) - 1):
        dz = sum(c * (result.zs[k + 1][i] - result.zs[k][i]).norm() ** 2
                 for i, c in enumerate(plan.c_coefficients))
        ok &= merits[k] - merits[k + 1] >= dz - 1e-8
    rep.add("merit decreases by the certified margin", ok,
            f"{len(merits)} iterations")
    return rep


SUITES = {
    "identities": suite_identities,
    "resolvents": suite_resolvents,
    "prox": suite_prox,
    "planner": suite_planner,
    "fejer": suite_fejer,
    "merit": suite_merit,
}


def run_suite(name: str, seed: int) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](seed)

#!/usr/bin/env python3
# Solve a three-operator inclusion 0 in A_1(x) + A_2(x) + A_3(x) on the real
# line, where A_1(x) = x - 3, A_2(x) = x, A_3(x) = 2x. The sum is 4x - 3, so
# the unique zero is x = 0.75. The solver never forms the sum: it works on
# the product space H^2 through the operators' resolvents.

import numpy as np

from drsplit import (
    DrParams,
    InclusionProblem,
    OperatorSpec,
    Point,
    Stack,
    Weights,
    fejer_monitor,
    rate_monitor,
    run,
)

ops = (
    OperatorSpec.scalar_linear(1.0, -3.0),  # A_1(x) = x - 3
    OperatorSpec.scalar_linear(1.0),        # A_2(x) = x
    OperatorSpec.scalar_linear(2.0),        # A_3(x) = 2x, the coupling block
)
problem = InclusionProblem(ops, shape=(1,))
weights = Weights.equal(2)

x0 = Stack((Point.vector([0.0]), Point.vector([0.0])))

# run both operator orders; their shadow sequences converge to the same zero
for variant in ("FG", "GF"):
    params = DrParams(mu=1.0, lam=0.5, weights=weights, variant=variant,
                      max_iter=1000, tol=1e-18)
    result = run(params, problem, x0, keep_iterates=True)
    print(f"{variant}: shadow = {result.shadow.data[0]:.12f} "
          f"after {result.iterations} iterations "
          f"(target 0.75, certificate: {result.certificate.success})")

    # the iterates are Fejer monotone: distances to the limit never increase
    dists, violation = fejer_monitor(result.xs, result.state.x, weights)
    print(f"    Fejer distances {dists[0]:.3f} -> {dists[-1]:.2e}, "
          f"monotone: {violation is None}")

# the residual rate: k * ||Res||^2 must vanish; replay a long fixed horizon
params = DrParams(mu=1.0, lam=0.5, weights=weights, max_iter=300, tol=0.0)
report = rate_monitor(run(params, problem, x0).log)
print(f"rate check: head-quartile mean {report.head_mean:.3e}, "
      f"tail-quartile mean {report.tail_mean:.3e}, passes: {report.passes}")

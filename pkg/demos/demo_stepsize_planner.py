#!/usr/bin/env python3
# Step-size certification for operator profiles that mix strongly and weakly
# monotone blocks. The planner maximizes the admissible step over auxiliary
# weights delta; a brute-force grid search over the feasible set provides an
# independent check, and the equal-weights baseline bound shows what the
# two-operator theory alone would allow.

from drsplit import (
    PlannerInput,
    Weights,
    brute_force_delta,
    classify,
    naive_stepsize,
    optimal_delta,
)

profiles = [
    ("two operators, weak + strong", (-1.0, 2.0), Weights.of((1.0,))),
    ("covariance-experiment profile", (0.0, 1.0, -0.1, -0.1), Weights.equal(3)),
    ("baseline inapplicable", (-1.0, 3.0, 0.5), Weights.equal(2)),
    ("monotone profile", (0.0, 0.5, 0.0), Weights.equal(2)),
    ("uncertifiable (negative sum)", (-1.0, 0.5), Weights.of((1.0,))),
]

for name, sigmas, weights in profiles:
    inp = PlannerInput(sigmas=sigmas, weights=weights, mu=1.0)
    case, reason = classify(inp)
    print(f"{name}: sigmas = {sigmas}")
    print(f"    case: {case.value}" + (f" ({reason})" if reason else ""))
    result = optimal_delta(inp)
    if result.delta_star is not None:
        print(f"    lambda_bar* = {result.lambda_bar_star:.6f}, "
              f"delta* = { {i + 1: round(v, 4) for i, v in result.delta_star.items()} }")
        _, brute = brute_force_delta(inp)
        print(f"    grid-search oracle: {brute:.6f}")
    elif result.case.value == "MonotoneB":
        print("    lambda_bar* = +inf (every positive step is admissible)")
    naive = naive_stepsize(sigmas, 1.0)
    if naive is None:
        print("    equal-weights baseline: inapplicable")
    else:
        print(f"    equal-weights baseline: {naive}")
    print()

"""Desk-scale sparse low-rank PSD covariance estimation experiment.

Generates block-diagonal rank-K population covariances, estimates them
from noisy sample covariances by splitting the objective into a PSD
indicator, a quadratic tracking term, a spectral shrinkage penalty and
an elementwise shrinkage penalty, and sweeps operator orderings and
mixing weights. Emits CSV tables and SVG convergence/heatmap figures.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .engine import DrParams, IterateLog, run
from .planner import Case, PlannerInput, optimal_delta
from .reform import InclusionProblem
from .operators import OperatorSpec
from .stacks import Point, Weights, embed

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "generate_instance",
    "build_problem",
    "mse",
    "simplex_grid",
    "sweep",
    "emit",
    "read_sweep_csv",
    "ordering_trend",
]

SWEEP_HEADER = ["ordering", "lambda1", "lambda2", "lambda3", "seed",
                "iterations", "mse"]
SUMMARY_HEADER = ["row_type", "ordering", "lambda1", "lambda2", "lambda3",
                  "mean_iterations", "mean_mse"]


@dataclass(frozen=True)
class ExperimentConfig:
    p: int = 60
    K: int = 3
    n: int = 50
    seeds: tuple = (0, 1, 2, 3, 4)
    tau0: float = 0.1
    tau1: float = 0.1
    omega0: float = 1.0
    omega1: float = 1.0
    mu: float = 1.0
    orderings: tuple = ((1, 2, 3, 4), (1, 4, 3, 2))
    weight_grid_step: Fraction = Fraction(1, 30)
    weights: Optional[tuple] = None  # explicit weight triples; overrides the grid
    tol: float = 1e-6
    max_iter: int = 10_000
    lambda_safety: float = 0.95

    def __post_init__(self):
        if not (self.p >= self.K >= 1):
            raise ValueError(f"need p >= K >= 1, got p={self.p}, K={self.K}")
        if self.n < 2:
            raise ValueError(f"need n >= 2 samples, got {self.n}")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        orderings = tuple(tuple(int(v) for v in o) for o in self.orderings)
        for o in orderings:
            if sorted(o) != [1, 2, 3, 4]:
                raise ValueError(f"ordering must permute (1,2,3,4), got {o}")
            if o[-1] == 1:
                raise ValueError(
                    f"ordering {o} places the zero-modulus PSD block last; "
                    "the step-size theory needs a nonzero last modulus"
                )
        object.__setattr__(self, "orderings", orderings)
        step = self.weight_grid_step
        if not isinstance(step, Fraction):
            step = Fraction(step).limit_denominator(10_000)
        if not (0 < step < 1):
            raise ValueError(f"weight_grid_step must lie in (0, 1), got {step}")
        object.__setattr__(self, "weight_grid_step", step)
        if self.weights is not None:
            object.__setattr__(
                self, "weights",
                tuple(tuple(float(v) for v in w) for w in self.weights))

    @staticmethod
    def from_json(obj: dict) -> "ExperimentConfig":
        kwargs = dict(obj)
        if "weight_grid_step" in kwargs and isinstance(kwargs["weight_grid_step"], str):
            kwargs["weight_grid_step"] = Fraction(kwargs["weight_grid_step"])
        known = set(ExperimentConfig.__dataclass_fields__)
        unknown = set(kwargs) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return ExperimentConfig(**kwargs)


@dataclass(frozen=True)
class RunRecord:
    ordering: tuple
    weights: tuple
    seed: int
    iterations: int
    mse: float
    terminated: bool

    def __post_init__(self):
        if self.mse < 0:
            raise ValueError("mse cannot be negative")


def generate_instance(p: int, K: int, n: int, seed: int):
    """Draw one synthetic instance; deterministic given the seed.

    The population covariance is block diagonal with K rank-one blocks
    v v^T, v ~ Unif[-1, 1], over a uniformly random composition of p
    into K positive parts, so its rank is exactly K. The observation y
    is the unbiased sample covariance of n Gaussian samples with that
    population covariance, centered about the sample mean.
    """
    if not (p >= K >= 1):
        raise ValueError(f"need p >= K >= 1, got p={p}, K={K}")
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    rng = np.random.default_rng(seed)

    if K == 1:
        sizes = [p]
    else:
        cuts = np.sort(rng.choice(np.arange(1, p), size=K - 1, replace=False))
        sizes = np.diff(np.concatenate(([0], cuts, [p]))).tolist()

    sigma0 = np.zeros((p, p))
    start = 0
    for size in sizes:
        v = rng.uniform(-1.0, 1.0, size)
        sigma0[start:start + size, start:start + size] = np.outer(v, v)
        start += size

    vals, vecs = np.linalg.eigh(sigma0)
    root = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
    samples = rng.standard_normal((n, p)) @ root.T
    centered = samples - samples.mean(axis=0)
    y = centered.T @ centered / (n - 1)
    return Point.symmetric(sigma0), Point.symmetric(y)


def _block_operators(y: Point, cfg: ExperimentConfig) -> dict:
    return {
        1: OperatorSpec.psd_indicator(),
        2: OperatorSpec.quadratic_tracking(y),
        3: OperatorSpec.phi_spectral(cfg.tau0, cfg.omega0),
        4: OperatorSpec.phi_elementwise(cfg.tau1, cfg.omega1),
    }


def build_problem(ordering: Sequence[int], y: Point,
                  cfg: ExperimentConfig) -> InclusionProblem:
    """Wire the four objective blocks in the given order (the last one is
    the coupling operator)."""
    ordering = tuple(int(v) for v in ordering)
    if sorted(ordering) != [1, 2, 3, 4]:
        raise ValueError(f"ordering must permute (1,2,3,4), got {ordering}")
    blocks = _block_operators(y, cfg)
    ops = tuple(blocks[i] for i in ordering)
    return InclusionProblem(ops, shape=y.shape)


def mse(yk: Point, sigma0: Point) -> float:
    """Entry-averaged squared error (1/p^2) sum_ij (yk - sigma0)_ij^2."""
    return (yk - sigma0).mean_square()


def simplex_grid(step: Fraction, parts: int = 3):
    """All weight tuples with positive coordinates on the step lattice
    summing to one, in lexicographic order. The step must be a unit
    fraction 1/q so the lattice actually meets the simplex."""
    step = Fraction(step)
    if step.numerator != 1:
        raise ValueError(f"weight grid step must be a unit fraction, got {step}")
    q = step.denominator
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            if remaining >= 1:
                out.append(prefix + (remaining,))
            return
        for k in range(1, remaining - slots + 2):
            rec(prefix + (k,), remaining - k, slots - 1)

    rec(tuple(), q, parts)
    return [tuple(k / q for k in combo) for combo in out]


def _plan(problem: InclusionProblem, weights: Weights, cfg: ExperimentConfig):
    inp = PlannerInput(sigmas=problem.sigmas, weights=weights, mu=cfg.mu)
    result = optimal_delta(inp)
    if result.case is Case.UNSUPPORTED:
        raise ValueError(f"planner cannot certify this profile: {result.reason}")
    if math.isinf(result.lambda_bar_star):
        return 1.0, result
    return cfg.lambda_safety * result.lambda_bar_star, result


def plan_step(problem: InclusionProblem, weights: Weights,
              cfg: ExperimentConfig) -> float:
    """Certified step: lambda_safety times the planner's maximal step
    (1.0 when every positive step is admissible)."""
    return _plan(problem, weights, cfg)[0]


def _run_single(cfg: ExperimentConfig, ordering: tuple, weight_values: tuple,
                seed: int):
    sigma0, y = generate_instance(cfg.p, cfg.K, cfg.n, seed)
    problem = build_problem(ordering, y, cfg)
    weights = Weights.of(weight_values)
    lam, plan = _plan(problem, weights, cfg)
    params = DrParams(mu=cfg.mu, lam=lam, weights=weights, variant="FG",
                      max_iter=cfg.max_iter, tol=cfg.tol,
                      plan=None if math.isinf(plan.lambda_bar_star) else plan)
    result = run(params, problem, embed(y, problem.m - 1))
    record = RunRecord(ordering=ordering, weights=weight_values, seed=seed,
                       iterations=result.iterations,
                       mse=mse(result.shadow, sigma0),
                       terminated=result.terminated)
    return record, result.log, result.certificate


def _weight_list(cfg: ExperimentConfig):
    if cfg.weights is not None:
        return list(cfg.weights)
    return simplex_grid(cfg.weight_grid_step, parts=3)


def _representative_weights(weight_values):
    """The grid point closest to equal weights (ties lexicographic)."""
    return min(weight_values,
               key=lambda w: (max(abs(v - 1.0 / len(w)) for v in w), w))


@dataclass
class SweepOutput:
    records: list
    rate_logs: dict  # ordering -> IterateLog of the representative run
    certificates: dict = field(default_factory=dict)


def sweep(cfg: ExperimentConfig, parallel: int = 1) -> SweepOutput:
    """Run every ordering x weight x seed combination.

    Runs are independent; with parallel > 1 they execute in worker
    processes. Results are sorted by (ordering, weights, seed) before
    aggregation, so the output never depends on the schedule. Per-run
    failures are recorded as non-terminated records with infinite mse
    and the sweep continues.
    """
    weight_values = _weight_list(cfg)
    rep = _representative_weights(weight_values)
    tasks = [(ordering, tuple(w), seed)
             for ordering in cfg.orderings
             for w in weight_values
             for seed in cfg.seeds]

    outputs = {}
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            futures = {key: pool.submit(_run_single, cfg, *key) for key in tasks}
            for key, fut in futures.items():
                try:
                    outputs[key] = fut.result()
                except Exception as exc:  # noqa: BLE001 - per-run failures recorded
                    outputs[key] = exc
    else:
        for key in tasks:
            try:
                outputs[key] = _run_single(cfg, *key)
            except Exception as exc:  # noqa: BLE001
                outputs[key] = exc

    records = []
    rate_logs = {}
    certificates = {}
    for key in sorted(tasks):
        ordering, w, seed = key
        out = outputs[key]
        if isinstance(out, Exception):
            records.append(RunRecord(ordering=ordering, weights=w, seed=seed,
                                     iterations=cfg.max_iter, mse=math.inf,
                                     terminated=False))
            continue
        record, log, cert = out
        records.append(record)
        certificates[key] = cert
        if w == rep and seed == cfg.seeds[0]:
            rate_logs[ordering] = log
    return SweepOutput(records=records, rate_logs=rate_logs,
                       certificates=certificates)


def ordering_trend(records, fast=(1, 4, 3, 2), slow=(1, 2, 3, 4)):
    """Soft check: is the `fast` ordering at least as fast as `slow` at
    equal weights? Returns ('pass'|'warn'|'skip', means)."""
    def mean_iters(ordering):
        vals = [r.iterations for r in records
                if r.ordering == tuple(ordering)
                and max(abs(v - 1.0 / 3.0) for v in r.weights) < 1e-9]
        return float(np.mean(vals)) if vals else None

    m_fast, m_slow = mean_iters(fast), mean_iters(slow)
    if m_fast is None or m_slow is None:
        return "skip", {"fast": m_fast, "slow": m_slow}
    status = "pass" if m_fast <= m_slow else "warn"
    return status, {"fast": m_fast, "slow": m_slow}


# -- emission ---------------------------------------------------------------

def _ordering_tag(ordering) -> str:
    return "-".join(str(v) for v in ordering)


def _fmt(x: float) -> str:
    return repr(float(x))


def emit(out: SweepOutput, out_dir) -> list:
    """Write sweep.csv, summary.csv and the per-ordering SVG figures.

    CSV content is a pure function of the records (rows sorted, floats
    via repr), so identical sweeps yield byte-identical files.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    records = sorted(out.records, key=lambda r: (r.ordering, r.weights, r.seed))
    if not records:
        raise ValueError("nothing to emit: no records")

    sweep_path = out_dir / "sweep.csv"
    with open(sweep_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for r in records:
            writer.writerow([_ordering_tag(r.ordering), _fmt(r.weights[0]),
                             _fmt(r.weights[1]), _fmt(r.weights[2]), r.seed,
                             r.iterations, _fmt(r.mse)])
    written.append(sweep_path)

    groups = {}
    for r in records:
        groups.setdefault((r.ordering, r.weights), []).append(r)
    means = {
        key: (float(np.mean([r.iterations for r in rs])),
              float(np.mean([r.mse for r in rs])))
        for key, rs in sorted(groups.items())
    }

    summary_path = out_dir / "summary.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for (ordering, w), (it_mean, mse_mean) in means.items():
            writer.writerow(["mean", _ordering_tag(ordering), _fmt(w[0]),
                             _fmt(w[1]), _fmt(w[2]), _fmt(it_mean),
                             _fmt(mse_mean)])
        orderings = sorted({o for o, _ in means})
        for ordering in orderings:
            sub = {w: v for (o, w), v in means.items() if o == ordering}
            w_mse = min(sub, key=lambda w: (sub[w][1], w))
            w_it = min(sub, key=lambda w: (sub[w][0], w))
            writer.writerow(["argmin_mse", _ordering_tag(ordering),
                             _fmt(w_mse[0]), _fmt(w_mse[1]), _fmt(w_mse[2]),
                             _fmt(sub[w_mse][0]), _fmt(sub[w_mse][1])])
            writer.writerow(["argmin_iterations", _ordering_tag(ordering),
                             _fmt(w_it[0]), _fmt(w_it[1]), _fmt(w_it[2]),
                             _fmt(sub[w_it][0]), _fmt(sub[w_it][1])])
    written.append(summary_path)

    written.extend(_emit_figures(out, means, out_dir))
    return written


def _emit_figures(out: SweepOutput, means: dict, out_dir: Path) -> list:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    for ordering, log in sorted(out.rate_logs.items()):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(log.k, log.k_res_sq)
        ax.set_xlabel("k")
        ax.set_ylabel(r"$k\,\|\mathrm{Res}\|_{\infty,F}^2$")
        ax.set_title(f"ordering {_ordering_tag(ordering)}")
        path = out_dir / f"rate_{_ordering_tag(ordering)}.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

    orderings = sorted({o for o, _ in means})
    for ordering in orderings:
        sub = {w: v for (o, w), v in means.items() if o == ordering}
        l1 = [w[0] for w in sub]
        l2 = [w[1] for w in sub]
        it_vals = [sub[w][0] for w in sub]
        mse_vals = [sub[w][1] for w in sub]
        fig, axes = plt.subplots(1, 2, figsize=(10, 4))
        for ax, vals, label in ((axes[0], mse_vals, "mean MSE"),
                                (axes[1], it_vals, "mean iterations")):
            sc = ax.scatter(l1, l2, c=vals, s=250, marker="s", cmap="viridis")
            ax.set_xlabel(r"$\lambda_1$")
            ax.set_ylabel(r"$\lambda_2$")
            ax.set_title(label)
            fig.colorbar(sc, ax=ax)
        fig.suptitle(f"ordering {_ordering_tag(ordering)}")
        path = out_dir / f"heatmap_{_ordering_tag(ordering)}.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written


def read_sweep_csv(path) -> list:
    """Parse sweep.csv back into RunRecords.

    Termination is not a CSV column; it is reconstructed as mse-is-finite,
    which matches any sweep whose runs all converged.
    """
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SWEEP_HEADER:
            raise ValueError(f"unexpected sweep.csv header: {header}")
        for row in reader:
            ordering = tuple(int(v) for v in row[0].split("-"))
            m = float(row[6])
            records.append(RunRecord(
                ordering=ordering,
                weights=(float(row[1]), float(row[2]), float(row[3])),
                seed=int(row[4]), iterations=int(row[5]), mse=m,
                terminated=math.isfinite(m)))
    return records

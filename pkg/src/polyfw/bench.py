"""Benchmark harness: seeded problem generators, rate fits, trace files.

Three experiment families exercise the solvers where the rate theory
makes checkable predictions: an l1-constrained least-squares problem
(linear vs sublinear separation between active-set variants and plain
FW), a thin-triangle sweep (empirical contraction rate against the
tan^2(theta/2) prediction over random starts) and a rank-deficient
quadratic over the simplex (linear decay despite zero strong
convexity).  Runs are deterministic given the config: identical configs
serialize to byte-identical trace CSVs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from polyfw.core import ActiveIterate, RunTrace, StepKind
from polyfw.objectives import Objective, QuadraticObjective
from polyfw.oracles import L1Ball, PolytopeSpec, Simplex, VertexList, spec_from_json
from polyfw.solvers import (
    CorrectionPostconditionError,
    CorrectionStallError,
    DegenerateActiveSetError,
    SolverConfig,
    Variant,
    solve,
)

RATE_QUANTITIES = ("f_gap_to_opt", "fw_gap")
CLEAN_EXITS = ("converged", "max_iter")


@dataclass
class RateFit:
    """Log-linear fit of a decaying run quantity.

    ``rho_hat`` is the negated least-squares slope of log(value) against
    the step index, so value ~ exp(-rho_hat * t) on the fit window.
    """

    rho_hat: float
    r_squared: float
    window: Tuple[int, int]
    theoretical_rho: Optional[float] = None

    def to_json(self) -> Dict:
        return {
            "rho_hat": self.rho_hat,
            "r_squared": self.r_squared,
            "window": list(self.window),
            "theoretical_rho": self.theoretical_rho,
        }


@dataclass
class ExperimentConfig:
    """One benchmark request: a problem recipe plus solver settings."""

    name: str
    problem: Dict
    variants: List[str]
    epsilon: float = 1e-8
    max_iter: int = 2000

    def __post_init__(self) -> None:
        if not self.name or not str(self.name).strip():
            raise ValueError("experiment name must be nonempty")
        if not self.variants:
            raise ValueError("variants list must be nonempty")
        self.variants = [Variant(str(v).upper()).value for v in self.variants]
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        kind = self.problem.get("kind")
        if kind == "lasso":
            m, n, k = (int(self.problem[key]) for key in ("m", "n", "k"))
            if m < 1 or n < 1:
                raise ValueError("lasso dimensions must be positive")
            if k > n:
                raise ValueError("lasso sparsity k cannot exceed n")
        elif kind == "triangle":
            thetas = self.problem.get("thetas", [])
            if not thetas:
                raise ValueError("triangle experiment needs at least one theta")
            for theta in thetas:
                if not 0.0 < float(theta) <= math.pi / 2:
                    raise ValueError("theta must lie in (0, pi/2]")
            if int(self.problem.get("n_starts", 0)) < 1:
                raise ValueError("triangle experiment needs n_starts >= 1")
        elif kind == "rankdef":
            if not int(self.problem["rank"]) < int(self.problem["d"]):
                raise ValueError("rankdef needs rank < d")
        elif kind == "custom":
            for key in ("A_csv", "y_csv", "spec"):
                if key not in self.problem:
                    raise ValueError(f"custom problem is missing {key!r}")
        else:
            raise ValueError(f"unknown problem kind {kind!r}")

    @classmethod
    def from_json(cls, source) -> "ExperimentConfig":
        """Build from a dict, a JSON string, or a path to a JSON file."""
        if isinstance(source, dict):
            doc = source
        else:
            text = str(source)
            if text.lstrip().startswith("{"):
                doc = json.loads(text)
            else:
                doc = json.loads(Path(text).read_text())
        return cls(
            name=doc["name"],
            problem=dict(doc["problem"]),
            variants=list(doc["variants"]),
            epsilon=float(doc.get("epsilon", 1e-8)),
            max_iter=int(doc.get("max_iter", 2000)),
        )


def gen_lasso(
    m: int, n: int, k: int, noise: float, seed: int, radius: float = 20.0
) -> Tuple[QuadraticObjective, L1Ball]:
    """Sparse-recovery least squares ||Ax - b||^2 over an l1 ball.

    A has standard Gaussian entries, the planted signal has k entries of
    +-1, and b adds Gaussian noise with per-coordinate standard
    deviation noise * ||A x_true|| / sqrt(m).  With radius below the
    planted l1 mass the constraint is active at the optimum, which is
    the regime where plain FW zig-zags sublinearly.
    """
    if k > n:
        raise ValueError("sparsity k cannot exceed n")
    if m < 1 or n < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    x_true = np.zeros(n)
    support = rng.choice(n, size=k, replace=False)
    x_true[support] = rng.choice([-1.0, 1.0], size=k)
    clean = A @ x_true
    b = clean + noise * np.linalg.norm(clean) / math.sqrt(m) * rng.standard_normal(m)
    return QuadraticObjective.least_squares(A, b), L1Ball(n, radius)


def gen_triangle(theta: float) -> Tuple[QuadraticObjective, VertexList, float, float]:
    """Thin triangle with corners (-1,0), (0,0), (cos t, sin t).

    The objective is half the squared distance to (-0.5, 1).  Also
    returns the closed-form pyramidal width sin(theta/2) and diameter
    2 cos(theta/2), which drive the theoretical contraction factors.
    """
    if not 0.0 < theta <= math.pi / 2:
        raise ValueError("theta must lie in (0, pi/2]")
    vertices = np.array(
        [[-1.0, 0.0], [0.0, 0.0], [math.cos(theta), math.sin(theta)]]
    )
    obj = QuadraticObjective.distance_to(np.array([-0.5, 1.0]))
    delta = math.sin(theta / 2.0)
    diameter = 2.0 * math.cos(theta / 2.0)
    return obj, VertexList(vertices), delta, diameter


def gen_rankdef(d: int, rank: int, seed: int) -> Tuple[QuadraticObjective, Simplex]:
    """Rank-deficient least squares over the simplex: mu = 0 exactly.

    b = A x0 for a random simplex point x0, so the optimum value is 0
    and is attained inside the domain's intersection with an affine
    subspace; strong convexity vanishes but active-set variants still
    contract in practice.
    """
    if not rank < d:
        raise ValueError("rank must be strictly below d")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((rank, d))
    x0 = rng.dirichlet(np.ones(d))
    return QuadraticObjective.least_squares(A, A @ x0), Simplex(d)


def fit_rate(
    trace: RunTrace,
    quantity: str = "f_gap_to_opt",
    window: Optional[Tuple[int, int]] = None,
    f_star: Optional[float] = None,
    floor: float = 0.0,
) -> RateFit:
    """Least-squares slope of log(quantity) against the step index.

    For ``f_gap_to_opt`` on away-step and min-norm-point traces the drop
    records are excluded and the remaining steps re-indexed, because the
    contraction theory promises progress only on the non-drop steps of
    those variants; every other trace (and ``fw_gap``) uses every
    record.  The series is truncated at its first value at or below
    ``floor`` (or nonpositive value), and the fit runs over ``window``
    in truncated indices, defaulting to the middle 60%.
    """
    if quantity not in RATE_QUANTITIES:
        raise ValueError(f"quantity must be one of {RATE_QUANTITIES}")
    if quantity == "f_gap_to_opt":
        if f_star is None:
            raise ValueError("f_gap_to_opt requires f_star")
        records = trace.records
        if trace.config_echo.get("variant") in ("AFW", "MNP"):
            records = [r for r in records if r.kind is not StepKind.DROP]
        raw = [r.f_value - f_star for r in records]
    else:
        raw = [r.fw_gap for r in trace.records]
    logs: List[float] = []
    for v in raw:
        if not v > max(floor, 0.0):
            break
        logs.append(math.log(v))
    n = len(logs)
    if n < 3:
        return RateFit(rho_hat=0.0, r_squared=0.0, window=(0, n))
    if window is None:
        start = int(math.floor(0.2 * n))
        end = int(math.ceil(0.8 * n))
        if end - start < min(10, n):
            start, end = 0, n
    else:
        start = max(0, int(window[0]))
        end = min(n, int(window[1]))
        if end - start < 2:
            raise ValueError("fit window must contain at least two points")
    xs = np.arange(start, end, dtype=np.float64)
    ys = np.array(logs[start:end])
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return RateFit(rho_hat=float(-slope), r_squared=r2, window=(start, end))


def reference_optimum(obj: Objective, spec: PolytopeSpec, max_iter: int = 20000) -> float:
    """Near-exact optimal value for suboptimality fits.

    Drives the fully-corrective variant to a very small gap, falling
    back to a looser target and an away-step run if the correction
    stalls at machine precision; returns the best value seen.
    """
    best = math.inf
    attempts = [("FCFW", 1e-13), ("FCFW", 1e-12), ("AFW", 1e-12)]
    for variant, eps in attempts:
        try:
            trace = solve(
                obj,
                spec,
                SolverConfig(variant=variant, epsilon=eps, max_iter=max_iter),
            )
        except (CorrectionStallError, CorrectionPostconditionError):
            continue
        best = min(best, float(trace.config_echo["f0"]))
        if trace.records:
            best = min(best, float(trace.f_values().min()))
        if trace.config_echo["exit_status"] == "converged":
            break
    if not math.isfinite(best):
        raise RuntimeError("no reference run completed")
    return best


def _run_record(
    key: str, variant: str, trace: RunTrace, trace_file: str, fit: Optional[RateFit]
) -> Dict:
    last_f = trace.records[-1].f_value if trace.records else trace.config_echo.get("f0")
    ratio = None
    if fit is not None and fit.theoretical_rho:
        ratio = fit.rho_hat / fit.theoretical_rho
    return {
        "key": key,
        "variant": variant,
        "trace_file": trace_file,
        "exit_status": trace.config_echo["exit_status"],
        "iterations": len(trace.records),
        "final_fw_gap": trace.config_echo["final_fw_gap"],
        "final_f": last_f,
        "step_counts": trace.step_counts(),
        "rate_fit": fit.to_json() if fit is not None else None,
        "ratio": ratio,
    }


def _error_record(key: str, variant: str, exc: Exception) -> Dict:
    return {
        "key": key,
        "variant": variant,
        "trace_file": None,
        "exit_status": f"error:{type(exc).__name__}",
        "error": str(exc),
        "iterations": None,
        "final_fw_gap": None,
        "final_f": None,
        "step_counts": {},
        "rate_fit": None,
        "ratio": None,
    }


_SOLVER_ERRORS = (
    CorrectionStallError,
    CorrectionPostconditionError,
    DegenerateActiveSetError,
    FloatingPointError,
)


def _fit_floor(f_star: float) -> float:
    return 1e-12 * max(1.0, abs(f_star))


def _run_quadratic_family(
    config: ExperimentConfig,
    out_dir: Path,
    tag: str,
    obj: QuadraticObjective,
    spec: PolytopeSpec,
    f_star: float,
) -> List[Dict]:
    runs = []
    for variant in config.variants:
        key = f"{tag}_{variant.lower()}"
        cfg = SolverConfig(
            variant=variant, epsilon=config.epsilon, max_iter=config.max_iter
        )
        try:
            trace = solve(obj, spec, cfg)
        except _SOLVER_ERRORS as exc:
            runs.append(_error_record(key, variant, exc))
            continue
        fname = f"{config.name}_{key}.csv"
        trace.write_csv(out_dir / fname)
        fit = fit_rate(trace, "f_gap_to_opt", f_star=f_star, floor=_fit_floor(f_star))
        runs.append(_run_record(key, variant, trace, fname, fit))
    return runs


def _triangle_theoretical(variant: str, delta: float, diameter: float) -> Optional[float]:
    base = delta ** 2 / diameter ** 2  # mu = L = 1 for the half squared distance
    if variant in ("AFW", "FCFW"):
        return base / 4.0
    if variant in ("PFW", "MNP"):
        return min(0.5, base)
    return None


def _run_triangle(config: ExperimentConfig, out_dir: Path) -> Tuple[List[Dict], List[Dict]]:
    p = config.problem
    n_starts = int(p["n_starts"])
    seed = int(p["rng_seed"])
    runs: List[Dict] = []
    aggregates: List[Dict] = []
    for ti, theta in enumerate(p["thetas"]):
        theta = float(theta)
        obj, spec, delta, diameter = gen_triangle(theta)
        atoms = spec.enumerate_atoms()
        f_star = reference_optimum(obj, spec)
        rng = np.random.default_rng([seed, ti])
        starts = [rng.dirichlet(np.ones(len(atoms))) for _ in range(n_starts)]
        for variant in config.variants:
            theoretical = _triangle_theoretical(variant, delta, diameter)
            ratios = []
            for si, w in enumerate(starts):
                key = f"triangle_t{ti}_{variant.lower()}_s{si:02d}"
                x0 = ActiveIterate.from_weights(
                    {atoms[i]: float(w[i]) for i in range(len(atoms))}
                )
                cfg = SolverConfig(
                    variant=variant, epsilon=config.epsilon, max_iter=config.max_iter
                )
                try:
                    trace = solve(obj, spec, cfg, x0=x0)
                except _SOLVER_ERRORS as exc:
                    rec = _error_record(key, variant, exc)
                    rec["theta"] = theta
                    runs.append(rec)
                    continue
                # A start whose very first step is a drop carries no rate
                # information (the offending corner's mass is shed at once
                # and the run collapses), so it is excluded but counted.
                drop_start = bool(trace.records) and trace.records[0].kind is StepKind.DROP
                fname = f"{config.name}_{key}.csv"
                trace.write_csv(out_dir / fname)
                fit = None
                degenerate = False
                if not drop_start:
                    fit = fit_rate(
                        trace, "f_gap_to_opt", f_star=f_star, floor=_fit_floor(f_star)
                    )
                    fit.theoretical_rho = theoretical
                    # Runs that land on the optimum before three positive
                    # suboptimality values accrue have no fittable decay;
                    # they converged essentially at once and are excluded
                    # the same way drop starts are.
                    if fit.rho_hat <= 0.0 and fit.window[1] - fit.window[0] < 3:
                        degenerate = True
                        fit = None
                rec = _run_record(key, variant, trace, fname, fit)
                rec["theta"] = theta
                rec["start"] = si
                rec["drop_start"] = drop_start
                rec["degenerate"] = degenerate
                runs.append(rec)
                if rec["ratio"] is not None:
                    ratios.append(rec["ratio"])
            mine = [
                r
                for r in runs
                if r.get("theta") == theta and r["variant"] == variant
            ]
            aggregates.append(
                {
                    "theta": theta,
                    "variant": variant,
                    "theoretical_rho": theoretical,
                    "n_included": len(ratios),
                    "n_drop_start": sum(1 for r in mine if r.get("drop_start")),
                    "n_degenerate": sum(1 for r in mine if r.get("degenerate")),
                    "median_ratio": float(np.median(ratios)) if ratios else None,
                    "min_ratio": min(ratios) if ratios else None,
                }
            )
    return runs, aggregates


def run_experiment(config: ExperimentConfig, out_dir) -> Dict:
    """Run every (variant, start) of the configured experiment.

    Writes one trace CSV per run plus ``<name>_summary.json`` into
    ``out_dir`` and returns the summary.  Solver errors are recorded in
    the affected run's entry; the experiment continues.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kind = config.problem["kind"]
    summary: Dict = {
        "name": config.name,
        "problem": config.problem,
        "variants": config.variants,
        "epsilon": config.epsilon,
        "max_iter": config.max_iter,
    }
    if kind == "lasso":
        p = config.problem
        obj, spec = gen_lasso(
            int(p["m"]),
            int(p["n"]),
            int(p["k"]),
            float(p.get("noise", 0.1)),
            int(p["rng_seed"]),
            float(p.get("radius", 20.0)),
        )
        f_star = reference_optimum(obj, spec)
        summary["f_star"] = f_star
        summary["runs"] = _run_quadratic_family(config, out, "lasso", obj, spec, f_star)
    elif kind == "triangle":
        runs, aggregates = _run_triangle(config, out)
        summary["runs"] = runs
        summary["aggregates"] = aggregates
    elif kind == "rankdef":
        p = config.problem
        obj, spec = gen_rankdef(int(p["d"]), int(p["rank"]), int(p["rng_seed"]))
        summary["mu"] = obj.strong_convexity
        summary["f_star"] = 0.0  # b = A x0 is consistent by construction
        summary["runs"] = _run_quadratic_family(config, out, "rankdef", obj, spec, 0.0)
    elif kind == "custom":
        p = config.problem
        A = np.loadtxt(p["A_csv"], delimiter=",", ndmin=2)
        y = np.loadtxt(p["y_csv"], delimiter=",")
        obj = QuadraticObjective.least_squares(A, y)
        spec = spec_from_json(p["spec"])
        f_star = reference_optimum(obj, spec)
        summary["f_star"] = f_star
        summary["runs"] = _run_quadratic_family(config, out, "custom", obj, spec, f_star)
    else:  # unreachable given config validation
        raise ValueError(f"unknown problem kind {kind!r}")
    (out / f"{config.name}_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    return summary


def all_runs_clean(summary: Dict) -> bool:
    """True when every run converged or stopped at the iteration cap."""
    return all(run["exit_status"] in CLEAN_EXITS for run in summary["runs"])

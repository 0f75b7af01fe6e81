"""Frank-Wolfe solver variants over a linear minimization oracle.

All variants share one driver: compute the gradient, ask the oracle for
the best atom, stop once the duality gap is small, otherwise move.
They differ only in the move:

* ``FW``   classic step toward the oracle atom;
* ``AFW``  away steps can also shift weight off a bad active atom;
* ``PFW``  pairwise steps move weight directly from the worst active
           atom onto the oracle atom;
* ``FCFW`` each iteration re-optimizes over a pool of correction atoms
           until the pool's internal gaps are small;
* ``MNP``  each iteration runs the min-norm-point style minor cycle,
           landing on the exact minimizer over its active set's hull.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from polyfw.core import (
    ActiveIterate,
    Atom,
    RunTrace,
    StepKind,
    StepRecord,
    apply_away_step,
    apply_fw_step,
    apply_pairwise_step,
)
from polyfw.objectives import Objective, QuadraticObjective
from polyfw.oracles import PolytopeSpec, lmo


class CorrectionStallError(RuntimeError):
    """Inner correction loop hit its iteration cap before meeting its contract."""

    def __init__(self, message: str, partial: Optional["CorrectionResult"] = None) -> None:
        super().__init__(message)
        self.partial = partial


class CorrectionPostconditionError(RuntimeError):
    """A correction returned without satisfying its advertised guarantees."""


class DegenerateActiveSetError(RuntimeError):
    """Affine solve over the active set stayed singular after retries."""


class Variant(str, Enum):
    FW = "FW"
    AFW = "AFW"
    PFW = "PFW"
    FCFW = "FCFW"
    MNP = "MNP"


@dataclass
class SolverConfig:
    variant: Variant
    epsilon: float = 1e-8
    max_iter: int = 1000
    correction_epsilon: Optional[float] = None
    rng_seed: Optional[int] = None

    def __post_init__(self) -> None:
        if not isinstance(self.variant, Variant):
            self.variant = Variant(str(self.variant).upper())
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.correction_epsilon is None:
            self.correction_epsilon = self.epsilon
        if not 0 < self.correction_epsilon <= self.epsilon:
            raise ValueError("correction_epsilon must lie in (0, epsilon]")


@dataclass
class CorrectionResult:
    """Outcome of one FCFW/MNP correction call."""

    iterate: ActiveIterate
    correction_atoms: Dict[bytes, np.ndarray]
    inner_steps: int
    post_away_gap: float


def away_atom(it: ActiveIterate, grad: np.ndarray) -> Tuple[bytes, float]:
    """Worst active atom and the away gap <-grad, x - v>.

    Ties on the gradient value go to the larger weight, then to the
    atom id, so the choice is deterministic.
    """
    best_key = None
    best_id = None
    for atom_id, weight in it.weights.items():
        dot = float(grad @ it.atom_point(atom_id))
        key = (dot, weight, atom_id)
        if best_key is None or key > best_key:
            best_key = key
            best_id = atom_id
    gap = best_key[0] - float(grad @ it.x)
    return best_id, gap


def afw_choose_direction(
    it: ActiveIterate, grad: np.ndarray, s: Atom
) -> Tuple[StepKind, np.ndarray, float, Optional[bytes]]:
    """Pick the better of the FW and away directions (ties favor FW)."""
    fw_dir = s.point - it.x
    fw_descent = float(-grad @ fw_dir)
    v_id, away_gap = away_atom(it, grad)
    if fw_descent >= away_gap or len(it) == 1:
        return StepKind.FW, fw_dir, 1.0, None
    alpha = it.weights[v_id]
    away_dir = it.x - it.atom_point(v_id)
    return StepKind.AWAY, away_dir, alpha / (1.0 - alpha), v_id


def pfw_step(
    it: ActiveIterate, grad: np.ndarray, s: Atom
) -> Tuple[np.ndarray, float, bytes]:
    """Pairwise direction s - v and its maximum step alpha_v."""
    v_id, _ = away_atom(it, grad)
    direction = s.point - it.atom_point(v_id)
    return direction, it.weights[v_id], v_id


def fcfw_correction(
    obj: Objective,
    it: ActiveIterate,
    correction_atoms: Dict[bytes, np.ndarray],
    s: Atom,
    eps: float,
    step_cap: Optional[int] = None,
) -> CorrectionResult:
    """Approximate correction over the atom pool plus the new atom.

    Runs an away-step loop restricted to the pool until the pool's FW
    gap and away gap both fall to ``eps`` and the objective is no worse
    than an exact line search toward ``s`` from the incoming iterate.
    Zero-weight atoms are retained in the returned pool up to four times
    the active-set size, evicting oldest-first.
    """
    pool: Dict[bytes, np.ndarray] = dict(correction_atoms)
    for atom_id in it.weights:
        if atom_id not in pool:
            pool[atom_id] = it.atom_point(atom_id)
    pool[s.id] = s.point
    atoms = [Atom(p) for p in pool.values()]
    matrix = np.stack([a.point for a in atoms])
    if step_cap is None:
        step_cap = 10 * max(2, len(correction_atoms)) ** 2

    fw_dir = s.point - it.x
    if np.any(fw_dir):
        gamma_fw = obj.line_search(it.x, fw_dir, 1.0)
        f_target = obj.value(it.x + gamma_fw * fw_dir)
    else:
        f_target = obj.value(it.x)
    f_slack = f_target + 1e-12 * (1.0 + abs(f_target))

    z = it
    inner = 0
    while True:
        f_z, grad = obj.value_and_gradient(z.x)
        dots = matrix @ grad
        i_s = int(np.argmin(dots))
        g_fw = float(grad @ z.x) - float(dots[i_s])
        v_id, g_away = away_atom(z, grad)
        if g_fw <= eps and g_away <= eps and f_z <= f_slack:
            break
        if inner >= step_cap:
            raise CorrectionStallError(
                f"correction did not meet eps={eps} within {step_cap} inner steps",
                partial=CorrectionResult(z, pool, inner, g_away),
            )
        s_in = atoms[i_s]
        fw_dir_in = s_in.point - z.x
        if g_fw >= g_away or len(z) == 1:
            gamma = obj.line_search(z.x, fw_dir_in, 1.0) if np.any(fw_dir_in) else 0.0
            z = apply_fw_step(z, s_in, gamma)
        else:
            alpha = z.weights[v_id]
            gmax = alpha / (1.0 - alpha)
            away_dir = z.x - z.atom_point(v_id)
            gamma = obj.line_search(z.x, away_dir, gmax)
            z, _ = apply_away_step(z, v_id, gamma, gmax)
        inner += 1

    f_final, grad_final = obj.value_and_gradient(z.x)
    _, post_away = away_atom(z, grad_final)
    if f_final > f_slack:
        raise CorrectionPostconditionError("correction ended above the FW line-search value")
    if post_away > eps:
        raise CorrectionPostconditionError("correction ended with away gap above eps")

    active = set(z.weights)
    cap = 4 * len(active)
    inactive = [atom_id for atom_id in pool if atom_id not in active]
    room = max(cap - len(active), 0)
    keep_inactive = set(inactive[len(inactive) - room :]) if room else set()
    new_pool = {
        atom_id: point
        for atom_id, point in pool.items()
        if atom_id in active or atom_id in keep_inactive
    }
    return CorrectionResult(z, new_pool, inner, post_away)


def _affine_minimizer(obj: QuadraticObjective, points: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of argmin f over the affine hull of the rows."""
    m = points.shape[0]
    if m == 1:
        return np.array([1.0])
    H = points @ obj.Q @ points.T
    g = points @ obj.b
    K = np.zeros((m + 1, m + 1))
    K[:m, :m] = H
    K[:m, m] = 1.0
    K[m, :m] = 1.0
    rhs = np.concatenate([-g, [1.0]])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateActiveSetError("singular affine system") from exc
    scale = max(1.0, float(np.max(np.abs(K))), float(np.max(np.abs(sol))))
    if not np.all(np.isfinite(sol)) or np.max(np.abs(K @ sol - rhs)) > 1e-7 * scale:
        raise DegenerateActiveSetError("affine system solved with a large residual")
    return sol[:m]


MNP_AWAY_GAP_LIMIT = 1e-9
_MNP_INTERIOR_TOL = 1e-12


def mnp_correction(obj: Objective, it: ActiveIterate, s: Atom) -> CorrectionResult:
    """Minor cycle: exact minimization over the hull of the active set + s.

    Repeatedly minimizes f over the affine hull of the current atoms; a
    minimizer interior to their convex hull is returned, otherwise the
    segment toward it is followed to the boundary and the vanishing
    atoms are dropped.  Quadratic objectives only (one linear solve per
    pass).  The returned iterate has away gap 0 up to 1e-9.
    """
    if not isinstance(obj, QuadraticObjective):
        raise TypeError("the min-norm-point correction requires a quadratic objective")
    ids: List[bytes] = list(it.weights)
    beta = np.array([it.weights[i] for i in ids])
    points = [it.atom_point(i) for i in ids]
    if s.id not in it.weights:
        ids.append(s.id)
        points.append(s.point)
        beta = np.concatenate([beta, [0.0]])
    matrix = np.stack(points)
    inner = 0
    away_gap = np.inf

    for _ in range(5):  # re-entries on a numerically failed away-gap check
        for _ in range(len(ids) + 2):
            inner += 1
            while True:
                try:
                    lam = _affine_minimizer(obj, matrix)
                    break
                except DegenerateActiveSetError:
                    # Affine dependence from rounding: drop the most
                    # recent atom (the newest is the likeliest culprit).
                    if len(ids) == 1:
                        raise
                    keep = list(range(len(ids) - 1))
                    total = beta[keep].sum()
                    if total <= 0:
                        raise
                    ids = [ids[i] for i in keep]
                    beta = beta[keep] / total
                    matrix = matrix[keep]
            if np.min(lam) > _MNP_INTERIOR_TOL:
                beta = lam
                break
            negative = lam < 0
            if np.any(negative):
                ratios = beta[negative] / (beta[negative] - lam[negative])
                theta = min(1.0, float(np.min(ratios)))
            else:
                theta = 1.0
            beta = (1.0 - theta) * beta + theta * lam
            beta = np.where(beta < 0, 0.0, beta)
            keep = [i for i in range(len(ids)) if beta[i] > _MNP_INTERIOR_TOL]
            if len(keep) == len(ids):
                # theta reached 1 with coordinates in the zero range
                keep = [i for i in range(len(ids)) if lam[i] > _MNP_INTERIOR_TOL]
            if not keep:
                keep = [int(np.argmax(beta))]
            ids = [ids[i] for i in keep]
            beta = beta[keep]
            beta = beta / beta.sum()
            matrix = matrix[keep]
        beta = beta / beta.sum()
        x_new = beta @ matrix
        grad = obj.gradient(x_new)
        away_gap = float(np.max(matrix @ grad) - grad @ x_new)
        if away_gap <= MNP_AWAY_GAP_LIMIT:
            weights = {ids[i]: float(beta[i]) for i in range(len(ids))}
            atoms = {ids[i]: matrix[i] for i in range(len(ids))}
            out = ActiveIterate(weights, atoms, x_new)
            return CorrectionResult(out, dict(atoms), inner, away_gap)
    raise CorrectionPostconditionError(
        f"minor cycle away gap {away_gap} stayed above {MNP_AWAY_GAP_LIMIT}"
    )


def _initial_iterate(
    spec: PolytopeSpec, config: SolverConfig, x0: Union[Atom, ActiveIterate, None]
) -> ActiveIterate:
    if isinstance(x0, ActiveIterate):
        return x0
    if isinstance(x0, Atom):
        return ActiveIterate.from_atom(x0)
    if x0 is not None:
        raise TypeError("x0 must be an Atom, an ActiveIterate, or None")
    if config.rng_seed is None:
        u = np.ones(spec.dimension)
    else:
        u = np.random.default_rng(config.rng_seed).standard_normal(spec.dimension)
    return ActiveIterate.from_atom(lmo(spec, u))


def solve(
    obj: Objective,
    spec: PolytopeSpec,
    config: SolverConfig,
    x0: Union[Atom, ActiveIterate, None] = None,
) -> RunTrace:
    """Run the configured variant until the FW gap certifies epsilon-optimality.

    Returns the full per-iteration trace; the final iterate rides along
    on the ``final_iterate`` attribute.  The trace's JSON header records
    the configuration, the initial objective value, the exit status
    (``converged``, ``max_iter``, ``stall``, or an error tag), and the
    final gap.
    """
    start = time.perf_counter()
    it = _initial_iterate(spec, config, x0)
    init_size = len(it)
    f0 = obj.value(it.x)
    records: List[StepRecord] = []
    pool: Dict[bytes, np.ndarray] = it.atoms()
    exit_status = "max_iter"
    final_gap = np.nan

    for t in range(config.max_iter):
        f_t, grad = obj.value_and_gradient(it.x)
        s = lmo(spec, grad)
        g_fw = float(-grad @ (s.point - it.x))
        final_gap = g_fw
        if g_fw <= config.epsilon:
            exit_status = "converged"
            break

        if config.variant in (Variant.FW, Variant.AFW, Variant.PFW):
            v_id, pre_away_gap = away_atom(it, grad)
            away_record = pre_away_gap
            if config.variant is Variant.FW:
                direction, gamma_max = s.point - it.x, 1.0
                apply = "fw"
            elif config.variant is Variant.AFW:
                if g_fw >= pre_away_gap or len(it) == 1:
                    direction, gamma_max = s.point - it.x, 1.0
                    apply = "fw"
                else:
                    alpha = it.weights[v_id]
                    direction = it.x - it.atom_point(v_id)
                    gamma_max = alpha / (1.0 - alpha)
                    apply = "away"
            else:
                direction = s.point - it.atom_point(v_id)
                gamma_max = it.weights[v_id]
                apply = "pairwise"
            if float(-grad @ direction) <= 0.0:
                exit_status = "stall"
                break
            gamma = obj.line_search(it.x, direction, gamma_max)
            if apply == "fw":
                it = apply_fw_step(it, s, gamma)
                kind = StepKind.FW
            elif apply == "away":
                it, dropped = apply_away_step(it, v_id, gamma, gamma_max)
                kind = StepKind.DROP if dropped else StepKind.AWAY
            else:
                it, kind = apply_pairwise_step(it, v_id, s, gamma)
        elif config.variant is Variant.FCFW:
            result = fcfw_correction(obj, it, pool, s, config.correction_epsilon)
            it = result.iterate
            pool = result.correction_atoms
            kind = StepKind.CORRECTION
            gamma = gamma_max = 0.0
            away_record = result.post_away_gap
        elif config.variant is Variant.MNP:
            pre_size = len(it)
            result = mnp_correction(obj, it, s)
            it = result.iterate
            pool = result.correction_atoms
            kind = StepKind.DROP if len(it) < pre_size else StepKind.CORRECTION
            gamma = gamma_max = 0.0
            away_record = result.post_away_gap
        else:  # pragma: no cover
            raise ValueError(f"unknown variant {config.variant}")

        f_new = obj.value(it.x)
        if not np.isfinite(f_new):
            exit_status = "error:nonfinite"
            break
        records.append(
            StepRecord(
                iteration=t,
                kind=kind,
                gamma=float(gamma),
                gamma_max=float(gamma_max),
                fw_gap=g_fw,
                away_gap=float(away_record),
                f_value=f_new,
                active_size=len(it),
            )
        )

    wall = time.perf_counter() - start
    echo = {
        "variant": config.variant.value,
        "epsilon": config.epsilon,
        "max_iter": config.max_iter,
        "correction_epsilon": config.correction_epsilon,
        "rng_seed": config.rng_seed,
        "dimension": spec.dimension,
        "init_active_size": init_size,
        "f0": f0,
        "exit_status": exit_status,
        "final_fw_gap": None if np.isnan(final_gap) else final_gap,
    }
    return RunTrace(records=records, config_echo=echo, wall_time=wall, final_iterate=it)

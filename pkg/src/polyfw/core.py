"""Shared domain types for active-set Frank-Wolfe solvers.

An iterate is kept as an explicit convex combination of atoms (the
"active set") next to its dense coordinates.  The three step operations
below are the only ways solvers mutate that representation, so the
bookkeeping rules live in one place: weights stay positive and sum to
one, removals are exact (no epsilon residue), and the dense point is
periodically re-synthesized from the expansion so incremental updates
cannot drift.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np

# Numerical policy shared by all step operations.
WEIGHT_FLOOR = 1e-14      # weights at or below this are treated as exact zeros
WEIGHT_SUM_TOL = 1e-12    # allowed deviation of the weight sum from 1
DRIFT_LIMIT = 1e-9        # max infinity-norm gap between x and its expansion
RESYNTH_PERIOD = 100      # full re-synthesis cadence for incremental updates
GAMMA_SNAP = 1e-12        # relative snap of gamma onto gamma_max


class FullWeightAwayError(ValueError):
    """Away step requested from an atom carrying the whole weight."""


class DegenerateDirectionError(ValueError):
    """Pairwise step whose source and target atoms coincide."""


def atom_key(point: np.ndarray) -> bytes:
    """Canonical byte encoding of coordinates.

    Equal coordinate vectors map to the same key, so an atom
    re-discovered by a later oracle call is interned to the same id.
    """
    arr = np.ascontiguousarray(point, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("atom coordinates must be finite")
    return (arr + 0.0).tobytes()  # +0.0 folds -0.0 into +0.0


class Atom:
    """A candidate vertex of the feasible polytope.

    Identity is the canonical encoding of the coordinates: two atoms
    with equal coordinates are the same atom.
    """

    __slots__ = ("id", "point")

    def __init__(self, point) -> None:
        pt = np.array(point, dtype=np.float64)
        self.id: bytes = atom_key(pt)
        pt.setflags(write=False)
        self.point: np.ndarray = pt

    def __eq__(self, other) -> bool:
        return isinstance(other, Atom) and self.id == other.id

    def __hash__(self) -> int:
        return hash(self.id)

    def __repr__(self) -> str:
        return f"Atom({np.array2string(self.point, precision=6)})"


def point_from_key(key: bytes) -> np.ndarray:
    """Inverse of :func:`atom_key`."""
    return np.frombuffer(key, dtype=np.float64).copy()


class ActiveIterate:
    """A point of the polytope with its explicit convex decomposition.

    Invariants: every stored weight is positive, the weights sum to one
    within ``WEIGHT_SUM_TOL``, and the dense point ``x`` matches the
    weighted atom sum within ``DRIFT_LIMIT`` in infinity norm.
    Instances are value-like: step operations return new iterates.
    """

    __slots__ = ("weights", "x", "_atoms", "_steps_since_sync")

    def __init__(
        self,
        weights: Dict[bytes, float],
        atoms: Dict[bytes, np.ndarray],
        x: np.ndarray,
        steps_since_sync: int = 0,
    ) -> None:
        self.weights = weights
        self._atoms = atoms
        self.x = x
        self._steps_since_sync = steps_since_sync

    @classmethod
    def from_atom(cls, atom: Atom) -> "ActiveIterate":
        return cls({atom.id: 1.0}, {atom.id: atom.point}, atom.point.copy())

    @classmethod
    def from_weights(cls, pairs: Mapping[Atom, float]) -> "ActiveIterate":
        """Build an iterate from an {atom: weight} convex combination."""
        weights: Dict[bytes, float] = {}
        atoms: Dict[bytes, np.ndarray] = {}
        for atom, w in pairs.items():
            if w < 0:
                raise ValueError("weights must be nonnegative")
            if w <= WEIGHT_FLOOR:
                continue
            weights[atom.id] = weights.get(atom.id, 0.0) + float(w)
            atoms[atom.id] = atom.point
        if not weights:
            raise ValueError("at least one positive weight required")
        total = sum(weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {total}")
        weights = {k: w / total for k, w in weights.items()}
        x = _synthesize(weights, atoms)
        return cls(weights, atoms, x)

    def __len__(self) -> int:
        return len(self.weights)

    def active_ids(self) -> List[bytes]:
        return list(self.weights)

    def atom_point(self, atom_id: bytes) -> np.ndarray:
        return self._atoms[atom_id]

    def atoms(self) -> Dict[bytes, np.ndarray]:
        return dict(self._atoms)

    def synthesize(self) -> np.ndarray:
        return _synthesize(self.weights, self._atoms)

    def drift(self) -> float:
        return float(np.max(np.abs(self.x - self.synthesize())))

    def check(self) -> None:
        """Raise if a representation invariant is violated."""
        if not self.weights:
            raise AssertionError("empty active set")
        if min(self.weights.values()) <= 0.0:
            raise AssertionError("nonpositive weight in active set")
        total = sum(self.weights.values())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise AssertionError(f"weight sum {total} off by more than {WEIGHT_SUM_TOL}")
        if self.drift() > DRIFT_LIMIT:
            raise AssertionError("dense point drifted from its expansion")


def _synthesize(weights: Mapping[bytes, float], atoms: Mapping[bytes, np.ndarray]) -> np.ndarray:
    ids = list(weights)
    mat = np.stack([atoms[i] for i in ids])
    w = np.array([weights[i] for i in ids])
    return w @ mat


def _cleaned(weights: Dict[bytes, float]) -> Dict[bytes, float]:
    """Drop exact-zero-range weights and renormalize.

    Removing a weight below ``WEIGHT_FLOOR`` leaves a deficit; dividing
    by the surviving total redistributes it proportionally.
    """
    kept = {k: w for k, w in weights.items() if w > WEIGHT_FLOOR}
    if not kept:
        raise AssertionError("all weights collapsed below the floor")
    total = sum(kept.values())
    return {k: w / total for k, w in kept.items()}


def _advance(
    it: ActiveIterate,
    weights: Dict[bytes, float],
    atoms: Dict[bytes, np.ndarray],
    x_new: np.ndarray,
    force_sync: bool = False,
) -> ActiveIterate:
    """Package an updated state, re-synthesizing x on the usual cadence."""
    steps = it._steps_since_sync + 1
    if force_sync or steps >= RESYNTH_PERIOD:
        x_new = _synthesize(weights, atoms)
        steps = 0
    return ActiveIterate(weights, atoms, x_new, steps)


def apply_fw_step(it: ActiveIterate, s: Atom, gamma: float) -> ActiveIterate:
    """Move toward atom ``s``: x <- x + gamma (s - x).

    All weights scale by (1 - gamma) and ``s`` picks up gamma.  At
    gamma = 1 the active set collapses to {s} exactly.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma {gamma} outside [0, 1]")
    if gamma >= 1.0:
        return ActiveIterate.from_atom(s)
    weights = {k: (1.0 - gamma) * w for k, w in it.weights.items()}
    weights[s.id] = weights.get(s.id, 0.0) + gamma
    atoms = dict(it._atoms)
    atoms[s.id] = s.point
    x_new = it.x + gamma * (s.point - it.x)
    return _advance(it, _cleaned(weights), atoms, x_new)


def apply_away_step(
    it: ActiveIterate, v: bytes, gamma: float, gamma_max: float
) -> Tuple[ActiveIterate, bool]:
    """Move away from active atom ``v``: x <- x + gamma (x - v).

    gamma_max must equal alpha_v / (1 - alpha_v); at gamma = gamma_max
    the atom is removed exactly (a drop step).  Returns the new iterate
    and whether the step was a drop.
    """
    if v not in it.weights:
        raise ValueError("away atom is not active")
    alpha = it.weights[v]
    if len(it) == 1 or alpha >= 1.0:
        raise FullWeightAwayError("cannot step away from a full-weight atom")
    limit = alpha / (1.0 - alpha)
    if abs(gamma_max - limit) > 1e-9 * (1.0 + limit):
        raise ValueError("gamma_max does not match alpha_v / (1 - alpha_v)")
    gamma_max = limit
    if not 0.0 <= gamma <= gamma_max * (1.0 + 1e-12):
        raise ValueError(f"gamma {gamma} outside [0, {gamma_max}]")
    if gamma_max - gamma <= GAMMA_SNAP * max(1.0, gamma_max):
        gamma = gamma_max
    point_v = it._atoms[v]
    if gamma == gamma_max:
        weights = {k: (1.0 + gamma) * w for k, w in it.weights.items() if k != v}
        atoms = {k: p for k, p in it._atoms.items() if k != v}
        out = _advance(it, _cleaned(weights), atoms, it.x, force_sync=True)
        return out, True
    weights = {k: (1.0 + gamma) * w for k, w in it.weights.items()}
    weights[v] = (1.0 + gamma) * alpha - gamma
    x_new = it.x + gamma * (it.x - point_v)
    return _advance(it, _cleaned(weights), dict(it._atoms), x_new), False


def apply_pairwise_step(
    it: ActiveIterate, v: bytes, s: Atom, gamma: float
) -> Tuple[ActiveIterate, "StepKind"]:
    """Shift mass gamma from active atom ``v`` onto atom ``s``.

    Only the two named weights change; every other entry is preserved
    exactly.  Classification: Drop when gamma exhausts alpha_v and s was
    already active, Swap when it exhausts alpha_v and s was inactive,
    Pairwise otherwise.
    """
    if v not in it.weights:
        raise ValueError("source atom is not active")
    if s.id == v:
        raise DegenerateDirectionError("pairwise step onto the same atom")
    gamma_max = it.weights[v]
    if not 0.0 <= gamma <= gamma_max * (1.0 + 1e-12):
        raise ValueError(f"gamma {gamma} outside [0, {gamma_max}]")
    if gamma_max - gamma <= GAMMA_SNAP:
        gamma = gamma_max
    weights = dict(it.weights)
    atoms = dict(it._atoms)
    point_v = it._atoms[v]
    if gamma == gamma_max:
        s_was_active = s.id in weights
        del weights[v]
        del atoms[v]
        weights[s.id] = weights.get(s.id, 0.0) + gamma
        atoms[s.id] = s.point
        kind = StepKind.DROP if s_was_active else StepKind.SWAP
        out = _advance(it, weights, atoms, it.x, force_sync=True)
        return out, kind
    if gamma > 0.0:
        weights[v] = gamma_max - gamma
        weights[s.id] = weights.get(s.id, 0.0) + gamma
        atoms[s.id] = s.point
    x_new = it.x + gamma * (s.point - point_v)
    return _advance(it, weights, atoms, x_new), StepKind.PAIRWISE


class StepKind(str, Enum):
    FW = "FW"
    AWAY = "AWAY"
    PAIRWISE = "PAIRWISE"
    DROP = "DROP"
    SWAP = "SWAP"
    CORRECTION = "CORRECTION"


@dataclass
class StepRecord:
    """One solver iteration.

    Gaps are measured at the pre-step iterate; ``f_value`` and
    ``active_size`` describe the post-step iterate, so a Drop record
    shows the shrunken set.  For correction-style records (FCFW, MNP)
    ``away_gap`` is the post-correction away gap, the quantity the
    correction contract bounds, and gamma/gamma_max are zero.
    """

    iteration: int
    kind: StepKind
    gamma: float
    gamma_max: float
    fw_gap: float
    away_gap: float
    f_value: float
    active_size: int

    def to_csv_row(self) -> str:
        return ",".join(
            [
                str(self.iteration),
                self.kind.value,
                repr(float(self.gamma)),
                repr(float(self.gamma_max)),
                repr(float(self.fw_gap)),
                repr(float(self.away_gap)),
                repr(float(self.f_value)),
                str(self.active_size),
            ]
        )

    @classmethod
    def from_csv_row(cls, row: str) -> "StepRecord":
        parts = row.strip().split(",")
        if len(parts) != 8:
            raise ValueError(f"malformed step record: {row!r}")
        return cls(
            iteration=int(parts[0]),
            kind=StepKind(parts[1]),
            gamma=float(parts[2]),
            gamma_max=float(parts[3]),
            fw_gap=float(parts[4]),
            away_gap=float(parts[5]),
            f_value=float(parts[6]),
            active_size=int(parts[7]),
        )


CSV_COLUMNS = "iter,kind,gamma,gamma_max,fw_gap,away_gap,f_value,active_size"


@dataclass
class RunTrace:
    """Everything one solver run produced.

    ``config_echo`` carries the solver configuration plus run outcome
    (initial objective value, exit status, final gap); ``wall_time`` is
    kept out of the CSV so identical configurations serialize to
    byte-identical files.
    """

    records: List[StepRecord] = field(default_factory=list)
    config_echo: Dict = field(default_factory=dict)
    wall_time: float = 0.0
    final_iterate: Optional[ActiveIterate] = None

    def to_csv(self) -> str:
        lines = ["# " + json.dumps(self.config_echo, sort_keys=True), CSV_COLUMNS]
        lines.extend(r.to_csv_row() for r in self.records)
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "RunTrace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("#"):
            raise ValueError("trace is missing its JSON header line")
        config_echo = json.loads(lines[0][1:].strip())
        body = lines[1:]
        if body and body[0].replace(" ", "") == CSV_COLUMNS:
            body = body[1:]
        records = [StepRecord.from_csv_row(ln) for ln in body]
        return cls(records=records, config_echo=config_echo)

    @classmethod
    def read_csv(cls, path) -> "RunTrace":
        with open(path) as fh:
            return cls.from_csv(fh.read())

    def f_values(self) -> np.ndarray:
        return np.array([r.f_value for r in self.records])

    def fw_gaps(self) -> np.ndarray:
        return np.array([r.fw_gap for r in self.records])

    def step_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for r in self.records:
            counts[r.kind.value] = counts.get(r.kind.value, 0) + 1
        return counts

    def validate(self, initial_active_size: int = 1) -> None:
        """Check the trace-level bookkeeping invariants."""
        prev_f = None
        prev_size = initial_active_size
        drops = 0
        for t, rec in enumerate(self.records, start=1):
            if prev_f is not None and rec.f_value > prev_f + 1e-12 * max(1.0, abs(prev_f)):
                raise AssertionError(f"objective increased at iteration {rec.iteration}")
            if rec.kind is StepKind.DROP:
                drops += 1
                if rec.active_size >= prev_size:
                    raise AssertionError("drop step did not shrink the active set")
            if rec.kind is StepKind.SWAP and rec.active_size != prev_size:
                raise AssertionError("swap step changed the active-set size")
            if drops > t / 2.0 + initial_active_size / 2.0:
                raise AssertionError(f"too many drop steps in prefix of length {t}")
            prev_f = rec.f_value
            prev_size = rec.active_size

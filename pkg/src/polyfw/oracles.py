"""Linear minimization oracles over structured polytopes.

Each feasible region is described by a ``PolytopeSpec``.  Solvers touch
the region only through ``lmo`` (exact argmin of a linear function over
the atom set, with deterministic tie-breaking) and, for small
instances, ``enumerate_atoms``.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from polyfw.core import Atom

ENUMERATION_CAP = 20_000


class EnumerationError(ValueError):
    """Atom enumeration requested on a spec with too many atoms."""


def _check_direction(r, dimension: int) -> np.ndarray:
    arr = np.asarray(r, dtype=np.float64)
    if arr.shape != (dimension,):
        raise ValueError(f"direction has shape {arr.shape}, expected ({dimension},)")
    if not np.all(np.isfinite(arr)):
        raise ValueError("direction entries must be finite")
    return arr


class PolytopeSpec:
    """Base class: a polytope given as the convex hull of its atoms."""

    dimension: int

    def lmo(self, r) -> Atom:
        """Exact argmin of <r, x> over the atom set."""
        raise NotImplementedError

    def enumerate_atoms(self) -> List[Atom]:
        raise NotImplementedError

    def atom_count(self) -> int:
        """Number of atoms enumeration would yield (before interning)."""
        raise NotImplementedError

    def to_json(self) -> Dict:
        raise NotImplementedError


class Simplex(PolytopeSpec):
    """Probability simplex: convex hull of the canonical basis vectors."""

    def __init__(self, dimension: int) -> None:
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = int(dimension)

    def lmo(self, r) -> Atom:
        r = _check_direction(r, self.dimension)
        i = int(np.argmin(r))  # argmin returns the lowest index on ties
        point = np.zeros(self.dimension)
        point[i] = 1.0
        return Atom(point)

    def enumerate_atoms(self) -> List[Atom]:
        return [Atom(row) for row in np.eye(self.dimension)]

    def atom_count(self) -> int:
        return self.dimension

    def to_json(self) -> Dict:
        return {"variant": "simplex", "dimension": self.dimension}


class L1Ball(PolytopeSpec):
    """Scaled cross-polytope {x : ||x||_1 <= radius}."""

    def __init__(self, dimension: int, radius: float) -> None:
        if dimension < 1:
            raise ValueError("dimension must be positive")
        if not radius > 0:
            raise ValueError("radius must be positive")
        self.dimension = int(dimension)
        self.radius = float(radius)

    def lmo(self, r) -> Atom:
        r = _check_direction(r, self.dimension)
        i = int(np.argmax(np.abs(r)))
        point = np.zeros(self.dimension)
        # At r_i == 0 (only when r == 0) fall back to the first atom in
        # enumeration order, +radius * e_0.
        point[i] = self.radius if r[i] <= 0 else -self.radius
        return Atom(point)

    def enumerate_atoms(self) -> List[Atom]:
        out = []
        for i in range(self.dimension):
            for sign in (1.0, -1.0):
                point = np.zeros(self.dimension)
                point[i] = sign * self.radius
                out.append(Atom(point))
        return out

    def atom_count(self) -> int:
        return 2 * self.dimension

    def to_json(self) -> Dict:
        return {"variant": "l1ball", "dimension": self.dimension, "radius": self.radius}


class Cube(PolytopeSpec):
    """Unit hypercube {0, 1}^d (convex hull of the binary vectors)."""

    def __init__(self, dimension: int) -> None:
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = int(dimension)

    def lmo(self, r) -> Atom:
        r = _check_direction(r, self.dimension)
        # Per-coordinate rule; the tie at r_i == 0 is broken toward 0.
        return Atom((r < 0).astype(np.float64))

    def enumerate_atoms(self) -> List[Atom]:
        if self.atom_count() > ENUMERATION_CAP:
            raise EnumerationError(f"cube with 2^{self.dimension} atoms is not enumerable")
        return [
            Atom(np.array(bits, dtype=np.float64))
            for bits in itertools.product((0.0, 1.0), repeat=self.dimension)
        ]

    def atom_count(self) -> int:
        return 2 ** self.dimension

    def to_json(self) -> Dict:
        return {"variant": "cube", "dimension": self.dimension}


class VertexList(PolytopeSpec):
    """Explicit atom matrix, one atom per row.

    Rows are not required to be vertices of the hull; the oracle simply
    minimizes over the listed atoms.
    """

    def __init__(self, atoms) -> None:
        mat = np.array(atoms, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] < 1:
            raise ValueError("atom matrix must be 2-d with at least one row")
        if not np.all(np.isfinite(mat)):
            raise ValueError("atom coordinates must be finite")
        self.matrix = mat
        self.dimension = mat.shape[1]

    def lmo(self, r) -> Atom:
        r = _check_direction(r, self.dimension)
        i = int(np.argmin(self.matrix @ r))  # lowest row index wins ties
        return Atom(self.matrix[i])

    def enumerate_atoms(self) -> List[Atom]:
        return [Atom(row) for row in self.matrix]

    def atom_count(self) -> int:
        return self.matrix.shape[0]

    def to_json(self) -> Dict:
        return {"variant": "vertices", "atoms": self.matrix.tolist()}

    @classmethod
    def from_csv(cls, text: str) -> "VertexList":
        rows = []
        for row in csv.reader(io.StringIO(text)):
            if not row or all(not cell.strip() for cell in row):
                continue
            rows.append([float(cell) for cell in row])
        return cls(rows)

    @classmethod
    def read_csv(cls, path) -> "VertexList":
        with open(path) as fh:
            return cls.from_csv(fh.read())


class FlowDag(PolytopeSpec):
    """Unit-flow (path) polytope of a DAG.

    Coordinates are indexed by arcs; atoms are indicator vectors of
    source-to-sink paths.  The oracle is a shortest-path dynamic program
    over a topological order, with ties broken toward the
    lexicographically smallest arc-index sequence.
    """

    def __init__(
        self,
        arcs: Sequence[Tuple[str, str]],
        source: Optional[str] = None,
        sink: Optional[str] = None,
    ) -> None:
        self.arcs: List[Tuple[str, str]] = [(str(u), str(v)) for u, v in arcs]
        if not self.arcs:
            raise ValueError("arc list is empty")
        self.dimension = len(self.arcs)
        nodes = []
        seen = set()
        for u, v in self.arcs:
            for w in (u, v):
                if w not in seen:
                    seen.add(w)
                    nodes.append(w)
        self.nodes = nodes
        heads = {v for _, v in self.arcs}
        tails = {u for u, _ in self.arcs}
        if source is None:
            candidates = [n for n in nodes if n not in heads]
            if len(candidates) != 1:
                raise ValueError("source is ambiguous; pass it explicitly")
            source = candidates[0]
        if sink is None:
            candidates = [n for n in nodes if n not in tails]
            if len(candidates) != 1:
                raise ValueError("sink is ambiguous; pass it explicitly")
            sink = candidates[0]
        if source not in seen or sink not in seen:
            raise ValueError("source/sink must appear in the arc list")
        self.source = source
        self.sink = sink
        self._out: Dict[str, List[int]] = {n: [] for n in nodes}
        self._in: Dict[str, List[int]] = {n: [] for n in nodes}
        for idx, (u, v) in enumerate(self.arcs):
            self._out[u].append(idx)
            self._in[v].append(idx)
        self._topo = self._topological_order()
        self._validate_connectivity()

    def _topological_order(self) -> List[str]:
        indeg = {n: len(self._in[n]) for n in self.nodes}
        frontier = [n for n in self.nodes if indeg[n] == 0]
        order: List[str] = []
        while frontier:
            n = frontier.pop()
            order.append(n)
            for idx in self._out[n]:
                v = self.arcs[idx][1]
                indeg[v] -= 1
                if indeg[v] == 0:
                    frontier.append(v)
        if len(order) != len(self.nodes):
            raise ValueError("arc list contains a cycle")
        return order

    def _validate_connectivity(self) -> None:
        reach = {self.source}
        for n in self._topo:
            if n in reach:
                for idx in self._out[n]:
                    reach.add(self.arcs[idx][1])
        coreach = {self.sink}
        for n in reversed(self._topo):
            if n in coreach:
                for idx in self._in[n]:
                    coreach.add(self.arcs[idx][0])
        stranded = [n for n in self.nodes if n not in reach or n not in coreach]
        if stranded:
            raise ValueError(f"nodes not on any source-sink path: {stranded}")

    def lmo(self, r) -> Atom:
        r = _check_direction(r, self.dimension)
        dist: Dict[str, float] = {self.sink: 0.0}
        for n in reversed(self._topo):
            if n == self.sink:
                continue
            best = np.inf
            for idx in self._out[n]:
                v = self.arcs[idx][1]
                if v in dist:
                    best = min(best, r[idx] + dist[v])
            if np.isfinite(best):
                dist[n] = best
        # Greedy walk from the source; taking the smallest arc index that
        # attains the optimum yields the lexicographically smallest path.
        point = np.zeros(self.dimension)
        node = self.source
        while node != self.sink:
            chosen = None
            for idx in self._out[node]:
                v = self.arcs[idx][1]
                if v in dist and r[idx] + dist[v] == dist[node]:
                    chosen = idx
                    break
            if chosen is None:  # guard against rounding surprises
                chosen = min(
                    (idx for idx in self._out[node] if self.arcs[idx][1] in dist),
                    key=lambda idx: (r[idx] + dist[self.arcs[idx][1]], idx),
                )
            point[chosen] = 1.0
            node = self.arcs[chosen][1]
        return Atom(point)

    def enumerate_atoms(self) -> List[Atom]:
        atoms: List[Atom] = []
        stack: List[int] = []

        def expand(node: str) -> None:
            if len(atoms) > ENUMERATION_CAP:
                raise EnumerationError("path count exceeds the enumeration cap")
            if node == self.sink:
                point = np.zeros(self.dimension)
                point[stack] = 1.0
                atoms.append(Atom(point))
                return
            for idx in self._out[node]:
                stack.append(idx)
                expand(self.arcs[idx][1])
                stack.pop()

        expand(self.source)
        if len(atoms) > ENUMERATION_CAP:
            raise EnumerationError("path count exceeds the enumeration cap")
        return atoms

    def atom_count(self) -> int:
        count: Dict[str, int] = {self.sink: 1}
        for n in reversed(self._topo):
            if n == self.sink:
                continue
            count[n] = sum(count[self.arcs[idx][1]] for idx in self._out[n])
        return count[self.source]

    def to_json(self) -> Dict:
        return {
            "variant": "flowdag",
            "arcs": [[u, v] for u, v in self.arcs],
            "source": self.source,
            "sink": self.sink,
        }


class BasePolytope(PolytopeSpec):
    """Base polytope of a submodular function on {0, .., n-1}.

    The oracle is the greedy algorithm: sort coordinates by ascending
    cost (stable, so index order breaks ties) and assign marginal gains
    of ``function`` along that permutation.
    """

    def __init__(self, n: int, function: Callable[[FrozenSet[int]], float]) -> None:
        if n < 1:
            raise ValueError("ground set must be nonempty")
        self.dimension = int(n)
        self.function = function
        if abs(float(function(frozenset()))) > 1e-12:
            raise ValueError("submodular function must have F(empty) = 0")

    def _greedy(self, order: Sequence[int]) -> np.ndarray:
        point = np.zeros(self.dimension)
        prefix: set = set()
        prev = 0.0
        for i in order:
            prefix.add(int(i))
            cur = float(self.function(frozenset(prefix)))
            point[i] = cur - prev
            prev = cur
        return point

    def lmo(self, r) -> Atom:
        r = _check_direction(r, self.dimension)
        order = np.argsort(r, kind="stable")
        return Atom(self._greedy(order))

    def enumerate_atoms(self) -> List[Atom]:
        import math

        if math.factorial(self.dimension) > ENUMERATION_CAP:
            raise EnumerationError("too many greedy orderings to enumerate")
        out: List[Atom] = []
        seen = set()
        for order in itertools.permutations(range(self.dimension)):
            atom = Atom(self._greedy(order))
            if atom.id not in seen:
                seen.add(atom.id)
                out.append(atom)
        return out

    def atom_count(self) -> int:
        # distinct greedy vertices, not orderings; requires enumeration
        return len(self.enumerate_atoms())

    def to_json(self) -> Dict:
        raise ValueError("base polytope with a callable handle has no JSON form")


# Named submodular families available to JSON configs.

def cardinality_cap(cap: float) -> Callable[[FrozenSet[int]], float]:
    """F(S) = min(|S|, cap)."""
    return lambda s: float(min(len(s), cap))


def weighted_concave_cardinality(values: Sequence[float]) -> Callable[[FrozenSet[int]], float]:
    """F(S) = g(|S|) for a table g with g[0] = 0 and concave increments."""
    table = [float(v) for v in values]
    if abs(table[0]) > 1e-12:
        raise ValueError("g[0] must be 0")
    increments = np.diff(table)
    if np.any(np.diff(increments) > 1e-12):
        raise ValueError("increment table must be concave")
    return lambda s: table[len(s)]


def lmo(spec: PolytopeSpec, r) -> Atom:
    """Linear minimization oracle: argmin over atoms of <r, x>."""
    return spec.lmo(r)


def enumerate_atoms(spec: PolytopeSpec) -> List[Atom]:
    """All atoms of a small spec, interned and deduplicated."""
    if spec.atom_count() > ENUMERATION_CAP:
        raise EnumerationError(
            f"spec has {spec.atom_count()} atoms, above the {ENUMERATION_CAP} cap"
        )
    atoms = spec.enumerate_atoms()
    seen = set()
    out = []
    for atom in atoms:
        if atom.id not in seen:
            seen.add(atom.id)
            out.append(atom)
    return out


def spec_from_json(doc) -> PolytopeSpec:
    """Parse a PolytopeSpec from a JSON document (dict or string)."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    if not isinstance(doc, dict) or "variant" not in doc:
        raise ValueError("spec document must be an object with a 'variant' key")
    variant = doc["variant"]
    if variant == "simplex":
        return Simplex(doc["dimension"])
    if variant == "l1ball":
        return L1Ball(doc["dimension"], doc["radius"])
    if variant == "cube":
        return Cube(doc["dimension"])
    if variant == "vertices":
        if "csv" in doc:
            return VertexList.read_csv(doc["csv"])
        return VertexList(doc["atoms"])
    if variant == "flowdag":
        arcs = []
        for arc in doc["arcs"]:
            if isinstance(arc, str):
                u, v = arc.split()
            else:
                u, v = arc
            arcs.append((u, v))
        return FlowDag(arcs, source=doc.get("source"), sink=doc.get("sink"))
    if variant == "basepoly":
        fdoc = doc["function"]
        kind = fdoc["kind"]
        if kind == "cardinality_cap":
            fn = cardinality_cap(fdoc["cap"])
        elif kind == "concave_cardinality":
            fn = weighted_concave_cardinality(fdoc["values"])
        else:
            raise ValueError(f"unknown submodular family {kind!r}")
        return BasePolytope(doc["n"], fn)
    raise ValueError(f"unknown polytope variant {variant!r}")

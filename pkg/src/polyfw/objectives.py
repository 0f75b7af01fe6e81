"""Smooth convex objectives and their exact constants.

The quadratic family is the workhorse: values, gradients, and the step
size of an exact line search all have closed forms, and the smoothness
and strong-convexity constants are eigenvalues.  A generic objective
only needs value/gradient; it inherits a golden-section line search.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from polyfw import oracles

LOGGER = logging.getLogger(__name__)

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class Objective:
    """Interface: differentiable convex function on R^d."""

    dimension: int

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def value_and_gradient(self, x) -> Tuple[float, np.ndarray]:
        return self.value(x), self.gradient(x)

    def line_search(self, x, d, gamma_max: float) -> float:
        """Golden-section search for argmin of f(x + gamma d) on [0, gamma_max]."""
        x = np.asarray(x, dtype=np.float64)
        d = np.asarray(d, dtype=np.float64)
        _check_search_args(self, x, d, gamma_max)
        lo, hi = 0.0, float(gamma_max)
        width_target = 1e-12 * gamma_max
        a = hi - GOLDEN * (hi - lo)
        b = lo + GOLDEN * (hi - lo)
        fa, fb = self.value(x + a * d), self.value(x + b * d)
        while hi - lo > width_target:
            if fa <= fb:
                hi, b, fb = b, a, fa
                a = hi - GOLDEN * (hi - lo)
                fa = self.value(x + a * d)
            else:
                lo, a, fa = a, b, fb
                b = lo + GOLDEN * (hi - lo)
                fb = self.value(x + b * d)
        candidates = [0.0, 0.5 * (lo + hi), gamma_max]
        values = [self.value(x + g * d) for g in candidates]
        return candidates[int(np.argmin(values))]


def _check_search_args(obj: Objective, x: np.ndarray, d: np.ndarray, gamma_max: float) -> None:
    if x.shape != (obj.dimension,) or d.shape != (obj.dimension,):
        raise ValueError("x and d must match the objective dimension")
    if not gamma_max > 0:
        raise ValueError("gamma_max must be positive")
    if not np.any(d):
        raise ValueError("search direction is zero")


class QuadraticObjective(Objective):
    """f(x) = 1/2 x^T Q x + b^T x + c with symmetric positive semidefinite Q."""

    def __init__(self, Q, b, c: float = 0.0) -> None:
        Q = np.array(Q, dtype=np.float64)
        b = np.array(b, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if b.shape != (Q.shape[0],):
            raise ValueError("b must match Q")
        scale = max(1.0, float(np.max(np.abs(Q))))
        if np.max(np.abs(Q - Q.T)) > 1e-12 * scale:
            raise ValueError("Q must be symmetric within 1e-12")
        self.Q = 0.5 * (Q + Q.T)
        self.b = b
        self.c = float(c)
        self.dimension = Q.shape[0]
        self._eigenvalues: Optional[np.ndarray] = None

    @classmethod
    def least_squares(cls, A, y) -> "QuadraticObjective":
        """f(x) = ||A x - y||^2, stored as Q = 2 A^T A."""
        A = np.asarray(A, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        return cls(2.0 * (A.T @ A), -2.0 * (A.T @ y), float(y @ y))

    @classmethod
    def distance_to(cls, target) -> "QuadraticObjective":
        """f(x) = 1/2 ||x - target||^2."""
        target = np.asarray(target, dtype=np.float64)
        return cls(np.eye(target.shape[0]), -target, 0.5 * float(target @ target))

    def _eigh(self) -> np.ndarray:
        if self._eigenvalues is None:
            self._eigenvalues = np.linalg.eigvalsh(self.Q)
            if self._eigenvalues[0] < -1e-10:
                raise ValueError(f"Q has negative eigenvalue {self._eigenvalues[0]}")
        return self._eigenvalues

    @property
    def smoothness(self) -> float:
        return float(self._eigh()[-1])

    @property
    def strong_convexity(self) -> float:
        return float(max(self._eigh()[0], 0.0))

    def value(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dimension,):
            raise ValueError("x has the wrong dimension")
        return float(0.5 * x @ (self.Q @ x) + self.b @ x + self.c)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dimension,):
            raise ValueError("x has the wrong dimension")
        return self.Q @ x + self.b

    def value_and_gradient(self, x) -> Tuple[float, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dimension,):
            raise ValueError("x has the wrong dimension")
        Qx = self.Q @ x
        return float(0.5 * x @ Qx + self.b @ x + self.c), Qx + self.b

    def line_search(self, x, d, gamma_max: float) -> float:
        """Exact minimizer of the quadratic on [0, gamma_max].

        gamma* = <-grad f(x), d> / (d^T Q d), clipped to the interval.
        A flat direction (d^T Q d <= 0) means the function is linear
        along d: go all the way if it descends, stay put otherwise.
        """
        x = np.asarray(x, dtype=np.float64)
        d = np.asarray(d, dtype=np.float64)
        _check_search_args(self, x, d, gamma_max)
        descent = -float(self.gradient(x) @ d)
        curvature = float(d @ (self.Q @ d))
        if curvature <= 0.0:
            if descent > 0.0:
                return float(gamma_max)
            LOGGER.warning("line search called with a non-descent direction")
            return 0.0
        return float(np.clip(descent / curvature, 0.0, gamma_max))


def value_and_gradient(obj: Objective, x) -> Tuple[float, np.ndarray]:
    return obj.value_and_gradient(x)


def line_search(obj: Objective, x, d, gamma_max: float) -> float:
    return obj.line_search(x, d, gamma_max)


@dataclass
class CurvatureEstimates:
    """Exact eigenvalue constants plus sampled affine-invariant estimates.

    The sampled curvatures are maxima over samples, hence lower bounds
    of the true suprema; the sampled away curvature is a minimum, hence
    an upper bound of the true infimum.
    """

    L: float
    mu: float
    C_f_hat: float
    C_fA_hat: float
    mu_fA_hat: float


def analytic_diameter(spec: oracles.PolytopeSpec) -> Optional[float]:
    """Closed-form diameter where the polytope family has one."""
    if isinstance(spec, oracles.Simplex):
        return float(np.sqrt(2.0)) if spec.dimension >= 2 else 0.0
    if isinstance(spec, oracles.Cube):
        return float(np.sqrt(spec.dimension))
    if isinstance(spec, oracles.L1Ball):
        return 2.0 * spec.radius
    return None


def polytope_diameter(spec: oracles.PolytopeSpec) -> float:
    """Diameter: analytic where known, else max pairwise atom distance."""
    analytic = analytic_diameter(spec)
    if analytic is not None:
        return analytic
    try:
        atoms = oracles.enumerate_atoms(spec)
    except oracles.EnumerationError as exc:
        raise ValueError("diameter unavailable for this spec") from exc
    mat = np.stack([a.point for a in atoms])
    best = 0.0
    block = 512
    for lo in range(0, mat.shape[0], block):
        chunk = mat[lo : lo + block]
        d2 = (
            np.sum(chunk ** 2, axis=1)[:, None]
            + np.sum(mat ** 2, axis=1)[None, :]
            - 2.0 * chunk @ mat.T
        )
        best = max(best, float(np.max(d2)))
    return float(np.sqrt(max(best, 0.0)))


def exact_constants(
    obj: Objective, spec: oracles.PolytopeSpec
) -> Tuple[float, float, float]:
    """(L, mu, M): extreme eigenvalues of Q and the polytope diameter."""
    if not isinstance(obj, QuadraticObjective):
        raise TypeError("exact constants are only available for quadratics")
    return obj.smoothness, obj.strong_convexity, polytope_diameter(spec)

"""Independent reference implementations used to cross-check the library.

Everything in this module is written from the defining formulas, not
from the library code: argmin-by-scan linear oracles, sort-based
projections, an exhaustive face-inspection quadratic program, and a
subset-enumeration pyramidal directional width.  Slow is fine here;
these only run at test sizes.
"""

import itertools
import math

import numpy as np
from scipy.optimize import linprog

# Frozen analytic pyramidal widths (unit cube 1/sqrt(d); probability
# simplex 2/sqrt(d) for even d and 2/sqrt(d - 1/d) for odd d).
PWIDTH_CUBE = {2: 1.0 / math.sqrt(2.0), 3: 1.0 / math.sqrt(3.0)}
PWIDTH_SIMPLEX = {
    2: 2.0 / math.sqrt(2.0),
    3: 2.0 / math.sqrt(3.0 - 1.0 / 3.0),
    4: 2.0 / math.sqrt(4.0),
}


def simplex_lmo(r):
    """Basis vector at the smallest entry of r (lowest index on ties)."""
    r = np.asarray(r, dtype=np.float64)
    out = np.zeros_like(r)
    out[int(np.argmin(r))] = 1.0
    return out


def cube_lmo(r):
    """Per-coordinate sign rule on the unit cube; zero entries stay 0."""
    r = np.asarray(r, dtype=np.float64)
    return (r < 0).astype(np.float64)


def l1ball_lmo(r, radius):
    """Signed radius vertex at the largest-magnitude entry of r."""
    r = np.asarray(r, dtype=np.float64)
    i = int(np.argmax(np.abs(r)))
    out = np.zeros_like(r)
    out[i] = -radius if r[i] > 0 else radius
    return out


def project_to_simplex(y):
    """Euclidean projection onto the probability simplex (sort method)."""
    y = np.asarray(y, dtype=np.float64)
    u = np.sort(y)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, y.size + 1)
    cond = u - (css - 1.0) / ks > 0
    k = int(ks[cond][-1])
    tau = (css[k - 1] - 1.0) / k
    return np.maximum(y - tau, 0.0)


def project_to_cube(y):
    return np.clip(np.asarray(y, dtype=np.float64), 0.0, 1.0)


def project_to_l1ball(y, radius):
    """Euclidean projection onto the l1 ball of the given radius."""
    y = np.asarray(y, dtype=np.float64)
    a = np.abs(y)
    if a.sum() <= radius:
        return y.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, y.size + 1)
    k = int(ks[u - (css - radius) / ks > 0][-1])
    tau = (css[k - 1] - radius) / k
    return np.sign(y) * np.maximum(a - tau, 0.0)


def project_by_faces(points, target, tol=1e-12):
    """argmin ||x - target|| over conv(points) by exhaustive face inspection.

    Solves the equality-constrained least squares problem on every
    nonempty subset of the points and keeps the best candidate whose
    barycentric coefficients are nonnegative.  Exponential in the number
    of points; intended for triangles and tetrahedra.
    """
    pts = np.asarray(points, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    n = pts.shape[0]
    best_x, best_val = None, np.inf
    for size in range(1, n + 1):
        for idx in itertools.combinations(range(n), size):
            P = pts[list(idx)].T  # d x size
            G = P.T @ P
            kkt = np.zeros((size + 1, size + 1))
            kkt[:size, :size] = G
            kkt[:size, size] = 1.0
            kkt[size, :size] = 1.0
            rhs = np.concatenate([P.T @ target, [1.0]])
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            lam = sol[:size]
            if abs(lam.sum() - 1.0) > 1e-8 or np.any(lam < -tol):
                continue
            x = P @ lam
            val = float(np.linalg.norm(x - target))
            if val < best_val - 1e-15:
                best_x, best_val = x, val
    assert best_x is not None
    return best_x, best_val


def min_norm_point_by_faces(points):
    z = np.zeros(np.asarray(points).shape[1])
    return project_by_faces(points, z)


def _is_proper_member(pts_subset, x):
    """x is a convex combination of the subset with all coefficients > 0."""
    P = np.asarray(pts_subset, dtype=np.float64).T
    d, k = P.shape
    A_eq = np.vstack([P, np.ones((1, k))])
    b_eq = np.concatenate([np.asarray(x, dtype=np.float64), [1.0]])
    res = linprog(
        np.zeros(k),
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=[(1e-10, None)] * k,
        method="highs",
    )
    return res.status == 0


def pdirw_bruteforce(atoms, r, x):
    """Pyramidal directional width by enumerating every active set.

    min over subsets S with x a proper convex combination of S of
    <r_hat, s(r)> - min_{v in S} <r_hat, v>, where s(r) maximizes
    <r_hat, .> over all atoms.
    """
    A = np.asarray(atoms, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    r_hat = r / np.linalg.norm(r)
    dots = A @ r_hat
    top = float(dots.max())
    n = A.shape[0]
    best = np.inf
    for size in range(1, n + 1):
        for idx in itertools.combinations(range(n), size):
            if not _is_proper_member(A[list(idx)], x):
                continue
            width = top - float(dots[list(idx)].min())
            best = min(best, width)
    assert math.isfinite(best), "x not in the convex hull of the atoms"
    return best


def drop_prefix_ok(kinds, initial_active_size=1):
    """Drop-count prefix bound: drops in the first t records <= t/2 + 1."""
    drops = 0
    for t, kind in enumerate(kinds, start=1):
        if kind == "DROP":
            drops += 1
        if drops > t / 2.0 + 1.0:
            return False
    return True

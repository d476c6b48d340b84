"""Geometry on the belief simplex.

Beliefs are probability vectors over a finite state space, kept in full
n-coordinate form (no dropped coordinate).  Hyperplanes therefore carry an
n-vector normal; on the simplex's affine hull this is equivalent to the
usual (n-1)-dimensional representation, with the advantage that no state
index is privileged.

Hull membership and strict separation reduce to small linear programs
solved with scipy's HiGHS backend, which is deterministic for fixed
inputs, so every witness produced here is reproducible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

# Construction tolerance for probability vectors (sum and negativity).
TOL_SUM = 1e-12
# Default geometric tolerance for membership / segment / separation tests.
TOL_GEO = 1e-9


class EmptyInput(ValueError):
    """Raised when an operation receives an empty point list."""


class NoStrictSeparation(ValueError):
    """Raised when the query point cannot be strictly separated from the hull.

    Signals that the caller should re-classify the point as a hull member.
    """


def _coerce(x) -> np.ndarray:
    """Accept a Belief or a raw coordinate array; return a float64 array."""
    if isinstance(x, Belief):
        return x.coords
    return np.asarray(x, dtype=np.float64)


def _coerce_many(points: Iterable) -> np.ndarray:
    arr = np.asarray([_coerce(p) for p in points], dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput("expected at least one point")
    return arr


@dataclass(frozen=True, eq=False)
class Belief:
    """A point of the probability simplex: n nonnegative weights summing to 1.

    Coordinates within ``TOL_SUM`` of zero are clamped to exactly zero on
    construction; anything more negative, or a sum off by more than
    ``TOL_SUM``, is rejected.
    """

    coords: np.ndarray

    def __init__(self, coords) -> None:
        arr = np.array(coords, dtype=np.float64).ravel()
        if arr.size < 1:
            raise ValueError("a belief needs at least one coordinate")
        if np.min(arr) < -TOL_SUM:
            raise ValueError(f"negative probability weight: {np.min(arr)}")
        arr = np.maximum(arr, 0.0)
        total = float(arr.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {total}")
        # Tiny drift (clamping, float accumulation) is renormalized away.
        if total != 1.0:
            arr = arr / total
        arr.flags.writeable = False
        object.__setattr__(self, "coords", arr)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def is_interior(self, tol: float = 0.0) -> bool:
        return bool(np.all(self.coords > tol))

    def face(self, tol: float = TOL_GEO) -> "Face":
        """The face of the simplex this belief lies in: its positive support."""
        support = tuple(int(i) for i in np.nonzero(self.coords > tol)[0])
        return Face(support)

    def allclose(self, other, tol: float = TOL_GEO) -> bool:
        return bool(np.max(np.abs(self.coords - _coerce(other))) <= tol)

    def to_json(self) -> list:
        return [float(v) for v in self.coords]

    def __repr__(self) -> str:
        inner = ", ".join(f"{v:.6g}" for v in self.coords)
        return f"Belief([{inner}])"


def uniform_belief(n: int) -> Belief:
    return Belief(np.full(n, 1.0 / n))


def vertex_belief(n: int, i: int) -> Belief:
    e = np.zeros(n)
    e[i] = 1.0
    return Belief(e)


@dataclass(frozen=True)
class Face:
    """A face of the simplex, identified by its (sorted) support indices."""

    support: tuple

    def __post_init__(self) -> None:
        support = tuple(sorted(set(int(i) for i in self.support)))
        if not support:
            raise ValueError("a face needs a non-empty support")
        object.__setattr__(self, "support", support)

    @property
    def dim(self) -> int:
        return len(self.support) - 1

    def contains(self, other: "Face") -> bool:
        return set(other.support) <= set(self.support)

    def vertices(self, n: int) -> list:
        return [vertex_belief(n, i) for i in self.support]


def enumerate_faces(n: int, min_dim: int = 0, max_dim: Optional[int] = None) -> list:
    """All faces of the (n-1)-simplex with dimension in [min_dim, max_dim]."""
    if max_dim is None:
        max_dim = n - 1
    faces = []
    for size in range(min_dim + 1, max_dim + 2):
        for support in itertools.combinations(range(n), size):
            faces.append(Face(support))
    return faces


@dataclass(frozen=True)
class Hyperplane:
    """The set {x : normal . x = offset}; classification is scale-invariant."""

    normal: np.ndarray
    offset: float

    def __init__(self, normal, offset: float) -> None:
        arr = np.array(normal, dtype=np.float64).ravel()
        if np.max(np.abs(arr)) == 0.0:
            raise ValueError("hyperplane normal must be non-zero")
        arr.flags.writeable = False
        object.__setattr__(self, "normal", arr)
        object.__setattr__(self, "offset", float(offset))

    def value(self, x) -> float:
        """Signed evaluation normal . x - offset."""
        return float(self.normal @ _coerce(x) - self.offset)

    def to_json(self) -> dict:
        return {"normal": [float(v) for v in self.normal], "offset": self.offset}


class SegmentLocation(NamedTuple):
    on: bool
    lam: float


def on_segment(x, y, z, tol: float = TOL_GEO) -> SegmentLocation:
    """Test whether z lies on the segment from x to y.

    Returns the least-squares mixing weight lam (clamped to [0, 1]) with
    lam * x + (1 - lam) * y as the nearest segment point; ``on`` is true
    when that point is within ``tol`` of z in the sup norm.  lam = 1 at x
    and lam = 0 at y.
    """
    xa, ya, za = _coerce(x), _coerce(y), _coerce(z)
    d = xa - ya
    denom = float(d @ d)
    if denom == 0.0:
        lam = 1.0
    else:
        lam = float(np.clip((za - ya) @ d / denom, 0.0, 1.0))
    resid = float(np.max(np.abs(lam * xa + (1.0 - lam) * ya - za)))
    return SegmentLocation(resid <= tol, lam)


def affinely_independent(points: Sequence, tol: float = TOL_GEO) -> bool:
    """True when the difference vectors {p_i - p_0} have full rank.

    Rank is judged by the smallest singular value exceeding ``tol``; a
    single point is trivially independent.
    """
    arr = _coerce_many(points)
    k = arr.shape[0]
    if k == 1:
        return True
    if k > arr.shape[1]:
        return False
    diffs = arr[1:] - arr[0]
    sv = np.linalg.svd(diffs, compute_uv=False)
    return bool(sv[-1] > tol)


def dedupe_points(points: np.ndarray, tol: float = TOL_GEO) -> np.ndarray:
    """Drop near-duplicate rows (sup-norm within tol), keeping first occurrences."""
    kept: list = []
    for row in points:
        if not any(np.max(np.abs(row - k)) <= tol for k in kept):
            kept.append(row)
    return np.asarray(kept)


def in_convex_hull(p, hull_points: Sequence, tol: float = TOL_GEO) -> bool:
    """True when p is reproducible as a convex combination of hull_points.

    Solved as a linear program minimizing the sup-norm reconstruction
    error over convex weights; membership means the optimum is <= tol.
    """
    pa = _coerce(p)
    H = _coerce_many(hull_points)
    k, n = H.shape
    # Variables: weights w (k of them) then the error bound t.
    c = np.zeros(k + 1)
    c[-1] = 1.0
    A_eq = np.concatenate([np.ones(k), [0.0]])[None, :]
    b_eq = np.array([1.0])
    rows = []
    rhs = []
    for sign in (+1.0, -1.0):
        block = np.hstack([sign * H.T, -np.ones((n, 1))])
        rows.append(block)
        rhs.append(sign * pa)
    A_ub = np.vstack(rows)
    b_ub = np.concatenate(rhs)
    bounds = [(0.0, 1.0)] * k + [(0.0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"hull membership LP failed: {res.message}")
    return bool(res.fun <= tol)


def separating_hyperplane(p, hull_points: Sequence, margin: float = TOL_GEO) -> Hyperplane:
    """Strictly separate p from the convex hull of hull_points.

    Maximizes the two-sided margin m subject to normal . p >= offset + m
    and normal . h <= offset - m for every hull point, with the normal
    boxed to [-1, 1]; the witness is then rescaled so its sup norm is 1.
    Raises NoStrictSeparation when the achievable margin is <= ``margin``.
    """
    pa = _coerce(p)
    H = dedupe_points(_coerce_many(hull_points), tol=TOL_GEO)
    n = pa.shape[0]
    # Variables: normal (n), offset, margin m; maximize m.
    c = np.zeros(n + 2)
    c[-1] = -1.0
    rows = [np.concatenate([-pa, [1.0, 1.0]])]
    for h in H:
        rows.append(np.concatenate([h, [-1.0, 1.0]]))
    A_ub = np.asarray(rows)
    b_ub = np.zeros(len(rows))
    bounds = [(-1.0, 1.0)] * n + [(-2.0, 2.0), (0.0, 4.0)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"separation LP failed: {res.message}")
    m = float(res.x[-1])
    if m <= margin:
        raise NoStrictSeparation(
            f"achievable margin {m:.3e} does not exceed required {margin:.3e}"
        )
    alpha = res.x[:n]
    beta = float(res.x[n])
    scale = float(np.max(np.abs(alpha)))
    return Hyperplane(alpha / scale, beta / scale)


def separating_hyperplane_sets(above: Sequence, below: Sequence, margin: float = TOL_GEO) -> Hyperplane:
    """Strictly separate two point sets: hull(above) strictly above, hull(below) strictly below.

    Same maximized-margin program as :func:`separating_hyperplane` with
    several points on the upper side.  Raises NoStrictSeparation when the
    hulls are closer than ``margin``.
    """
    A = dedupe_points(_coerce_many(above), tol=TOL_GEO)
    B = dedupe_points(_coerce_many(below), tol=TOL_GEO)
    n = A.shape[1]
    c = np.zeros(n + 2)
    c[-1] = -1.0
    rows = [np.concatenate([-a, [1.0, 1.0]]) for a in A]
    rows += [np.concatenate([b, [-1.0, 1.0]]) for b in B]
    A_ub = np.asarray(rows)
    b_ub = np.zeros(len(rows))
    bounds = [(-1.0, 1.0)] * n + [(-2.0, 2.0), (0.0, 4.0)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"separation LP failed: {res.message}")
    m = float(res.x[-1])
    if m <= margin:
        raise NoStrictSeparation(
            f"achievable margin {m:.3e} does not exceed required {margin:.3e}"
        )
    alpha = res.x[:n]
    beta = float(res.x[n])
    scale = float(np.max(np.abs(alpha)))
    return Hyperplane(alpha / scale, beta / scale)


def separation_margin(h: Hyperplane, p, hull_points: Sequence) -> float:
    """Worst-case two-sided margin of a separation witness (negative = invalid)."""
    pa = _coerce(p)
    H = _coerce_many(hull_points)
    above = float(h.normal @ pa - h.offset)
    below = float(np.min(h.offset - H @ h.normal))
    return min(above, below)


def simplex_lattice(n: int, grid_size: int, max_points: int = 2_000_000) -> np.ndarray:
    """Barycentric lattice on the (n-1)-simplex with ``grid_size`` levels per axis.

    Coordinates are multiples of 1/(grid_size - 1).  The resolution is
    lowered automatically if the lattice would exceed ``max_points`` (only
    relevant for n >= 5 at fine grids); the result is always deterministic.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    res = grid_size - 1

    def count(r: int) -> int:
        from math import comb

        return comb(r + n - 1, n - 1)

    while count(res) > max_points and res > 1:
        res = max(1, res // 2)

    if n == 2:
        t = np.arange(res + 1, dtype=np.float64) / res
        return np.column_stack([t, 1.0 - t])

    if n <= 4:
        axes = np.meshgrid(*([np.arange(res + 1, dtype=np.int32)] * (n - 1)), indexing="ij")
        flat = np.column_stack([a.ravel() for a in axes])
        keep = flat.sum(axis=1) <= res
        flat = flat[keep]
        last = res - flat.sum(axis=1)
        grid = np.column_stack([flat, last]).astype(np.float64) / res
        return grid

    rows = []
    for combo in itertools.combinations(range(res + n - 1), n - 1):
        prev = -1
        parts = []
        for c in combo:
            parts.append(c - prev - 1)
            prev = c
        parts.append(res + n - 2 - prev)
        rows.append(parts)
    return np.asarray(rows, dtype=np.float64) / res


def interior_lattice(n: int, grid_size: int, max_points: int = 2_000_000) -> np.ndarray:
    """The strictly positive points of :func:`simplex_lattice`."""
    grid = simplex_lattice(n, grid_size, max_points=max_points)
    return grid[np.all(grid > 0.0, axis=1)]


# Low-discrepancy interior sampling used by the structural checkers.  A
# Kronecker (additive golden-ratio) sequence keyed by the face support makes
# every refutation point reproducible without carrying RNG state.

def _kronecker_alphas(dim: int) -> np.ndarray:
    # Generalized golden ratios: x = 1/phi_d, phi_d solves x**(d+1) + x = 1.
    alphas = np.empty(dim)
    for d in range(dim):
        x = 0.5
        for _ in range(64):
            x = (1.0 + x) ** (-1.0 / (d + 2))
        alphas[d] = 1.0 - x
    return alphas


def face_samples(face: Face, n: int, count: int, interior_pad: float = 1e-3) -> np.ndarray:
    """Deterministic well-spread points in the relative interior of a face.

    The sequence is keyed by the face's support so refutations are stable
    across runs; ``interior_pad`` mixes each point slightly toward the
    face centroid to keep samples strictly inside.
    """
    support = face.support
    d = len(support) - 1
    out = np.zeros((count, n))
    if d == 0:
        out[:, support[0]] = 1.0
        return out
    alphas = _kronecker_alphas(d)
    seed = sum((i + 1) * 0.618033988749895 for i in support) % 1.0
    idx = np.arange(1, count + 1)[:, None]
    u = (seed + idx * alphas[None, :]) % 1.0
    # Sorted-uniform (stick-breaking) map from the unit cube to the simplex.
    u_sorted = np.sort(u, axis=1)
    bary = np.diff(np.concatenate([np.zeros((count, 1)), u_sorted, np.ones((count, 1))], axis=1), axis=1)
    centroid = np.full(d + 1, 1.0 / (d + 1))
    bary = (1.0 - interior_pad) * bary + interior_pad * centroid
    out[:, list(support)] = bary
    return out

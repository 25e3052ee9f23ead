"""Small dense convex geometry on weight sets.

Two questions are asked of a finite set of points ``α_1..α_N`` in ``R^d``:
which point of their convex hull is closest to the origin (Wolfe's
min-norm-point algorithm), and whether the origin is a strictly positive
convex combination of them (relative interior).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

POSITIVE_TOL = 1e-10


class MinNormError(RuntimeError):
    def __init__(self, message: str, best: "MinNormCertificate"):
        super().__init__(message)
        self.best = best


@dataclass
class MinNormCertificate:
    point: np.ndarray
    coefficients: np.ndarray
    active_set: tuple[int, ...]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.point))

    def optimality_residual(self, points: np.ndarray) -> float:
        """``max(0, -min_i <β, α_i - β>)``; zero at the true minimizer."""
        pts = np.asarray(points, dtype=float)
        if pts.shape[1] == 0:
            return 0.0
        gaps = (pts - self.point) @ self.point
        return float(max(0.0, -gaps.min()))


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] == 0:
        raise ValueError("point set must be nonempty")
    return pts


def _affine_minimizer(pts: np.ndarray) -> np.ndarray:
    """Coefficients ``v`` (summing to 1) of the point of least norm in the affine hull."""
    k = pts.shape[0]
    gram = pts @ pts.T
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = gram
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    v = sol[:k]
    return v / v.sum()


def min_norm_point(points, max_iter: int = 1000, tol: float = 1e-12) -> MinNormCertificate:
    """Point of least norm in the convex hull of ``points`` (rows), Wolfe's algorithm.

    Ties are broken by lowest index, so the result is deterministic for a given
    input order.
    """
    pts = _as_points(points)
    n, d = pts.shape
    if d == 0:
        c = np.zeros(n)
        c[0] = 1.0
        return MinNormCertificate(np.zeros(0), c, (0,))
    scale = max(1.0, float(np.max(np.sum(pts * pts, axis=1))))
    sq = np.sum(pts * pts, axis=1)
    first = int(np.argmin(sq))
    active = [first]
    w = np.array([1.0])
    x = pts[first].copy()

    def cert() -> MinNormCertificate:
        c = np.zeros(n)
        c[active] = w
        return MinNormCertificate(pts.T @ c, c, tuple(sorted(active)))

    for _ in range(max_iter):
        dots = pts @ x
        j = int(np.argmin(dots))
        if dots[j] >= x @ x - tol * scale or j in active:
            break
        active.append(j)
        w = np.append(w, 0.0)
        for _minor in range(n + 1):
            v = _affine_minimizer(pts[active])
            if np.all(v > POSITIVE_TOL * 1e-2):
                w = v
                break
            mask = v <= POSITIVE_TOL * 1e-2
            theta = np.min(w[mask] / (w[mask] - v[mask]))
            theta = min(max(theta, 0.0), 1.0)
            w = theta * v + (1 - theta) * w
            keep = w > POSITIVE_TOL * 1e-2
            # always drop at least the blocking index
            if keep.all():
                keep[int(np.argmin(w))] = False
            active = [a for a, k in zip(active, keep) if k]
            w = w[keep]
            w = w / w.sum()
        x = pts[active].T @ w
    else:
        best = cert()
        raise MinNormError(
            f"min_norm_point exceeded {max_iter} iterations (residual {best.optimality_residual(pts):.2e})",
            best,
        )
    # polish the coefficients on the final active set
    v = _affine_minimizer(pts[active])
    if np.all(v > 0):
        w = v
    return cert()


@dataclass
class RelIntResult:
    inside: bool
    coefficients: np.ndarray | None  # strictly positive, sums to 1, when inside
    separator: np.ndarray | None  # <β, α_i> >= 0 for all i, > 0 for some, when not inside
    zero_set: tuple[int, ...]  # indices positive in some nonnegative combination equal to 0

    def __bool__(self) -> bool:
        return self.inside


def zero_face(points) -> tuple[int, ...]:
    """Indices ``i`` admitting ``Σ c_j α_j = 0`` with ``c >= 0`` and ``c_i > 0``.

    One linear program: maximize ``Σ y_i`` with ``y_i <= c_i``, ``0 <= y <= 1``.
    The optimum has ``y_i = 1`` exactly on the zero face.
    """
    pts = _as_points(points)
    n, d = pts.shape
    if d == 0 or np.allclose(pts, 0.0):
        return tuple(range(n))
    scale = np.abs(pts).max()
    a = pts / scale
    cost = np.concatenate([np.zeros(n), -np.ones(n)])
    a_eq = np.hstack([a.T, np.zeros((d, n))])
    a_ub = np.hstack([-np.eye(n), np.eye(n)])
    bounds = [(0, None)] * n + [(0, 1)] * n
    res = linprog(cost, A_ub=a_ub, b_ub=np.zeros(n), A_eq=a_eq, b_eq=np.zeros(d), bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"zero-face LP failed: {res.message}")
    y = res.x[n:]
    return tuple(int(i) for i in np.flatnonzero(y > 0.5))


def separating_direction(points, zero_set: tuple[int, ...]) -> np.ndarray:
    """β with ``<β, α_i> = 0`` on ``zero_set`` and ``<β, α_i> >= |β|^2 > 0`` elsewhere.

    The weights outside the zero face are projected onto the orthogonal
    complement of the span of the zero face; β is the min-norm point of the
    projected hull.
    """
    pts = _as_points(points)
    n, d = pts.shape
    rest = [i for i in range(n) if i not in set(zero_set)]
    if not rest:
        raise ValueError("origin is in the relative interior; no separator")
    if zero_set:
        span = pts[list(zero_set)]
        u, s, _ = np.linalg.svd(span.T, full_matrices=False)
        rank = int(np.sum(s > 1e-12 * max(1.0, s[0])))
        q = u[:, :rank]
        proj = pts[rest] - (pts[rest] @ q) @ q.T
    else:
        proj = pts[rest]
    return min_norm_point(proj).point


def zero_in_relative_interior(points) -> RelIntResult:
    """Decide ``0 ∈ relint(conv(points))``.

    True comes with a strictly positive coefficient vector (the max-min
    coefficient LP solution); false comes with a separating functional.
    """
    pts = _as_points(points)
    n, d = pts.shape
    zs = zero_face(pts)
    if len(zs) < n:
        beta = separating_direction(pts, zs)
        return RelIntResult(False, None, beta, zs)
    if d == 0 or np.allclose(pts, 0.0):
        return RelIntResult(True, np.full(n, 1.0 / n), None, zs)
    scale = np.abs(pts).max()
    a = pts / scale
    # variables (c_1..c_n, s): maximize s subject to c_i >= s, Σc = 1, Σ c_i α_i = 0
    cost = np.zeros(n + 1)
    cost[-1] = -1.0
    a_eq = np.vstack([np.hstack([a.T, np.zeros((d, 1))]), np.concatenate([np.ones(n), [0.0]])])
    b_eq = np.concatenate([np.zeros(d), [1.0]])
    a_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
    bounds = [(0, None)] * n + [(None, 1)]
    res = linprog(cost, A_ub=a_ub, b_ub=np.zeros(n), A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0 or res.x[-1] <= POSITIVE_TOL:
        raise RuntimeError(f"max-min coefficient LP inconsistent with zero face: {res.message}")
    c = np.clip(res.x[:n], 0, None)
    return RelIntResult(True, c / c.sum(), None, zs)

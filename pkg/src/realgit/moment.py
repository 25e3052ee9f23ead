"""Moment map, energy ``F = |m|^2`` and its negative gradient flow on the unit sphere."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rep import LinearAction


class DomainError(ValueError):
    """The moment map is undefined at the origin."""


class NotCriticalError(ValueError):
    def __init__(self, residual: float):
        super().__init__(f"point is not critical for the energy (gradient norm {residual:.3e})")
        self.residual = residual


def _vec(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    if not np.any(v):
        raise DomainError("moment map is defined on V \\ {0}")
    return v


@dataclass
class MomentValue:
    p_coords: np.ndarray
    operator: np.ndarray
    energy: float

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.energy))


def _p_images(action: LinearAction, v: np.ndarray) -> np.ndarray:
    p = action.split.p_ops
    if p.shape[0] == 0:
        return np.zeros((0, v.size))
    return p @ v


def moment_coords(v, action: LinearAction) -> np.ndarray:
    v = _vec(v)
    pv = _p_images(action, v)
    return pv @ v / (v @ v)


def moment(v, action: LinearAction) -> MomentValue:
    """``m(v)`` in the orthonormal ``p`` basis: ``<m(v), A> = <A v, v> / |v|^2``."""
    c = moment_coords(v, action)
    return MomentValue(c, action.split.p_element(c), float(c @ c))


def energy(v, action: LinearAction) -> float:
    c = moment_coords(v, action)
    return float(c @ c)


def pairing(v, op: np.ndarray, action: LinearAction) -> float:
    """``<m(v), A>`` for a symmetric operator ``A`` in ``p``; equals ``<A v, v>/|v|^2``."""
    return float(moment_coords(v, action) @ action.split.p_coords(op))


def beta_plus(beta_coords, action: LinearAction) -> np.ndarray:
    """``β - |β|^2 Id_V`` for ``β`` given by its ``p`` coordinates."""
    b = np.asarray(beta_coords, dtype=float)
    return action.split.p_element(b) - float(b @ b) * np.eye(action.dim_v)


def grad_energy(v, action: LinearAction) -> np.ndarray:
    """``(4/|v|^2) m(v)^+ v``."""
    v = _vec(v)
    s = v @ v
    pv = _p_images(action, v)
    c = pv @ v / s
    return 4.0 / s * (c @ pv - (c @ c) * v) if c.size else np.zeros_like(v)


def energy_and_grad(v: np.ndarray, action: LinearAction) -> tuple[float, np.ndarray]:
    s = v @ v
    pv = _p_images(action, v)
    c = pv @ v / s
    f = float(c @ c)
    if not c.size:
        return 0.0, np.zeros_like(v)
    return f, 4.0 / s * (c @ pv - f * v)


def energy_hessian(v, action: LinearAction) -> np.ndarray:
    """Euclidean Hessian of ``F`` at ``v`` (closed form in ``q_j = <P_j v, v>``)."""
    v = _vec(v)
    n = v.size
    s = v @ v
    pv = _p_images(action, v)
    if pv.shape[0] == 0:
        return np.zeros((n, n))
    q = pv @ v
    big_q = float(q @ q)
    p = action.split.p_ops
    h = (4.0 / s**2) * (2.0 * pv.T @ pv + np.tensordot(q, p, axes=1))
    a = q @ pv
    h -= (16.0 / s**3) * (np.outer(a, v) + np.outer(v, a))
    h -= (4.0 * big_q / s**3) * np.eye(n)
    h += (24.0 * big_q / s**4) * np.outer(v, v)
    return (h + h.T) / 2


def moment_differential(v, w, action: LinearAction) -> np.ndarray:
    """Derivative of ``m`` at ``v`` along ``w``, in ``p`` coordinates.

    For ``w ⟂ v`` this is ``<dm_v w, A> = (2/|v|^2) <A v, w>``.
    """
    v = _vec(v)
    w = np.asarray(w, dtype=float).ravel()
    s = v @ v
    pv = _p_images(action, v)
    return 2.0 / s * (pv @ w - (pv @ v) * (v @ w) / s)


def hessian_energy_at_critical(v_c, w, action: LinearAction, tol: float = 1e-8) -> float:
    """Second derivative of ``F`` at a critical point ``v_c`` along ``w``.

    ``w`` is projected onto ``v_c^⟂`` and split into eigencomponents
    ``w_r`` of ``β^+`` (``β = m(v_c)``); the value is
    ``4 Σ λ_r |w_r|^2 / |v_c|^2 + 2 |dm_{v_c} w|^2``, which for an eigenvector
    with ``|w| = |v_c|`` is ``4 λ + 2 |dm w|^2``.
    """
    v = _vec(v_c)
    s = v @ v
    g = grad_energy(v, action)
    res = float(np.linalg.norm(g) * np.sqrt(s))
    if res > tol:
        raise NotCriticalError(res)
    w = np.asarray(w, dtype=float).ravel()
    w = w - (v @ w) / s * v
    mv = moment(v, action)
    bp = beta_plus(mv.p_coords, action)
    lam, vecs = np.linalg.eigh((bp + bp.T) / 2)
    comps = vecs.T @ w
    dm = moment_differential(v, w, action)
    return float(4.0 * np.sum(lam * comps**2) / s + 2.0 * dm @ dm)


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass
class FlowOptions:
    tol: float = 1e-10
    max_steps: int = 1_000_000
    rk_tol: float = 1e-10
    record_every: int = 1
    stall_window: int = 10_000
    newton_cutoff: float = 1e-8
    newton_trigger: float = 1e-4
    keep_trajectory: bool = True


@dataclass
class FlowResult:
    initial: np.ndarray
    limit: np.ndarray
    steps: int
    time: float
    gradient_residual: float
    converged: bool
    energy_trace: np.ndarray
    trajectory: list[tuple[int, float, float, float, np.ndarray]] = field(default_factory=list)
    accelerated: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def energy(self) -> float:
        return float(self.energy_trace[-1])


def _accept_energy(f_new: float, f_old: float) -> bool:
    return f_new <= f_old + 1e-13 * max(f_old, 1e-300) + 1e-30


def _newton_polish(v: np.ndarray, action: LinearAction, opts: FlowOptions, f: float, g: np.ndarray, max_iter: int = 30):
    """Newton steps on the sphere using the tangent Hessian minus its near-null eigenspace.

    Both curvature signs are kept, so the iteration also settles on saddle
    points of ``F`` (the critical points of the unstable strata).
    """
    history = []
    for _ in range(max_iter):
        gn = float(np.linalg.norm(g))
        if gn < opts.tol:
            break
        h = energy_hessian(v, action)
        proj = np.eye(v.size) - np.outer(v, v)
        # F is homogeneous of degree 0, so its gradient is tangent and the
        # sphere Hessian is the projected Euclidean one
        hr = proj @ h @ proj
        lam, vecs = np.linalg.eigh((hr + hr.T) / 2)
        keep = np.abs(lam) > opts.newton_cutoff * max(1e-300, np.abs(lam).max())
        if not keep.any():
            break
        step = -(vecs[:, keep] / lam[keep]) @ (vecs[:, keep].T @ g)
        improved = False
        for _ls in range(30):
            cand = v + step
            cand /= np.linalg.norm(cand)
            fc, gc = energy_and_grad(cand, action)
            if _accept_energy(fc, f) and np.linalg.norm(gc) < gn:
                v, f, g = cand, fc, gc
                history.append((f, float(np.linalg.norm(gc)), v.copy()))
                improved = True
                break
            step /= 2
        if not improved:
            break
    return v, f, g, history


def flow(v, action: LinearAction, opts: FlowOptions | None = None, **kw) -> FlowResult:
    """Negative gradient flow of ``F`` on the unit sphere.

    Adaptive Dormand-Prince 5(4) steps, renormalized after each accepted step.
    Steps that would raise the energy are rejected and retried with a smaller
    step, so ``energy_trace`` is nonincreasing.  Stops once ``|∇F| < tol``.
    """
    opts = opts or FlowOptions(**kw)
    v = _vec(v)
    v = v / np.linalg.norm(v)
    v0 = v.copy()
    f, g = energy_and_grad(v, action)
    gn = float(np.linalg.norm(g))
    trace = [f]
    traj = [(0, 0.0, f, gn, v.copy())] if opts.keep_trajectory else []
    t = 0.0
    h = min(1.0, 0.1 / max(gn, 1e-12))
    steps = 0
    accelerated = False
    rejected = 0
    newton_calls = 0
    best_gn = gn
    best_step = 0
    converged = gn < opts.tol
    last_newton = np.inf
    while not converged and steps < opts.max_steps:
        k = np.zeros((7, v.size))
        k[0] = -g
        for i in range(1, 7):
            y = v + h * (np.asarray(_A[i]) @ k[:i])
            k[i] = -energy_and_grad(y, action)[1]
        y5 = v + h * (_B5 @ k)
        y4 = v + h * (_B4 @ k)
        err = float(np.linalg.norm(y5 - y4)) / opts.rk_tol
        if err > 1.0:
            rejected += 1
            h *= max(0.2, 0.9 * err ** -0.2)
            continue
        cand = y5 / np.linalg.norm(y5)
        fc, gc = energy_and_grad(cand, action)
        if not _accept_energy(fc, f):
            rejected += 1
            h *= 0.5
            continue
        v, f, g = cand, fc, gc
        t += h
        steps += 1
        gn = float(np.linalg.norm(g))
        trace.append(f)
        if opts.keep_trajectory and steps % opts.record_every == 0:
            traj.append((steps, t, f, gn, v.copy()))
        converged = gn < opts.tol
        stalled = steps - best_step >= opts.stall_window
        if gn < 0.5 * best_gn:
            best_gn, best_step = gn, steps
        near = gn < opts.newton_trigger and gn < 0.1 * last_newton
        if not converged and (near or stalled):
            last_newton = gn
            v2, f2, g2, hist = _newton_polish(v, action, opts, f, g)
            newton_calls += 1
            if hist:
                accelerated = True
                for fh, gh, vh in hist:
                    trace.append(fh)
                    steps += 1
                    if opts.keep_trajectory:
                        traj.append((steps, t, fh, gh, vh))
                v, f, g = v2, f2, g2
                gn = float(np.linalg.norm(g))
                converged = gn < opts.tol
            best_gn, best_step = min(best_gn, gn), steps
        fac = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
        h *= max(1.0, fac)
    if opts.keep_trajectory and (not traj or traj[-1][0] != steps):
        traj.append((steps, t, f, gn, v.copy()))
    return FlowResult(
        initial=v0,
        limit=v,
        steps=steps,
        time=t,
        gradient_residual=gn,
        converged=converged,
        energy_trace=np.array(trace),
        trajectory=traj,
        accelerated=accelerated,
        diagnostics={"rejected_steps": rejected, "newton_calls": newton_calls},
    )


def write_trajectory_csv(result: FlowResult, path) -> None:
    """Rows ``step, time, energy, grad_norm, x0, x1, ...``."""
    path = Path(path)
    n = result.limit.size
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["step", "time", "energy", "grad_norm"] + [f"x{i}" for i in range(n)])
        for step, t, f, gn, v in result.trajectory:
            wr.writerow([step, repr(float(t)), repr(float(f)), repr(float(gn))] + [repr(float(x)) for x in v])

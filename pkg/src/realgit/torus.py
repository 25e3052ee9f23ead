"""Orbits of the maximal torus ``T = exp(t)``.

In the eigenbasis of a :class:`~realgit.rep.TorusFrame`, ``exp(λ)`` scales
coordinate ``i`` by ``exp(<λ, α_i>)``.  Closedness, destabilizing directions,
minimal vectors and the invariant functions ``f_w^σ`` all reduce to convex
geometry of the weights ``α_i`` on the support of a vector.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .convex import separating_direction, zero_face, zero_in_relative_interior
from .rep import TorusFrame

SUPPORT_TOL = 1e-10
ENUMERATION_CAP = 22
MAX_FAMILY_SIZE = 500_000


class NoDestabilizerError(ValueError):
    """The orbit is closed, so no one-parameter subgroup leaves it."""


class NotClosedError(ValueError):
    pass


class EnumerationCapError(RuntimeError):
    pass


@dataclass(frozen=True)
class SupportSet:
    """Nonzero frame coordinates of a vector and their signs (``0`` outside the support)."""

    indices: tuple[int, ...]
    signs: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def empty(self) -> bool:
        return not self.indices


def _threshold(u: np.ndarray, tol: float) -> np.ndarray:
    scale = float(np.linalg.norm(u))
    return np.where(np.abs(u) > tol * scale, u, 0.0) if scale > 0 else np.zeros_like(u)


def orbit_support(v, frame: TorusFrame, tol: float = SUPPORT_TOL) -> SupportSet:
    """``i`` is in the support iff ``|v_i| > tol·|v|`` in frame coordinates."""
    u = _threshold(frame.coords(v), tol)
    idx = tuple(int(i) for i in np.flatnonzero(u))
    return SupportSet(idx, tuple(int(s) for s in np.sign(u)))


def is_orbit_closed(v, frame: TorusFrame, tol: float = SUPPORT_TOL) -> bool:
    """``T·v`` is closed iff ``0`` lies in the relative interior of the weight hull of the support."""
    supp = orbit_support(v, frame, tol)
    if supp.empty:
        return True
    return bool(zero_in_relative_interior(frame.weights[list(supp.indices)]))


@dataclass
class Destabilizer:
    direction: np.ndarray  # unit vector in torus coordinates
    limit: np.ndarray  # lim exp(tα)·v, in V
    pairings: np.ndarray  # <α, α_i> for each frame index (0 outside the support)
    kept: tuple[int, ...]  # support of the limit

    def path(self, v, frame: TorusFrame, t: float) -> np.ndarray:
        return frame.act(t * self.direction, v)


def destabilizing_direction(v, frame: TorusFrame, tol: float = SUPPORT_TOL) -> Destabilizer:
    """Unit ``α ∈ t`` with ``exp(tα)·v`` converging, as ``t → ∞``, outside ``T·v``.

    ``α = -β/|β|`` for the least-norm point ``β`` of the weights off the zero
    face, after projecting out the span of the zero face.  Coordinates on the
    zero face pair to zero with ``α`` and survive; all others decay, so the
    limit is exact and its support is already admissible (or empty).
    """
    supp = orbit_support(v, frame, tol)
    if supp.empty:
        raise NoDestabilizerError("no destabilizer: v = 0 is a fixed point")
    idx = list(supp.indices)
    pts = frame.weights[idx]
    zs = zero_face(pts) if frame.rank else tuple(range(len(idx)))
    if len(zs) == len(idx):
        raise NoDestabilizerError("no destabilizer: the orbit of v is closed")
    beta = separating_direction(pts, zs)
    alpha = -beta / np.linalg.norm(beta)
    u = _threshold(frame.coords(v), tol)
    keep = [idx[j] for j in zs]
    lim = np.zeros_like(u)
    lim[keep] = u[keep]
    pair = np.zeros(frame.n)
    pair[idx] = pts @ alpha
    return Destabilizer(alpha, frame.vector(lim), pair, tuple(keep))


def kempf_ness_minimizer(v, frame: TorusFrame, tol: float = SUPPORT_TOL, max_iter: int = 200):
    """Minimize ``log Σ u_i² exp(2<λ, α_i>)`` over ``λ ∈ t`` by damped Newton.

    Returns ``(λ, exp(λ)·v, residual)`` with residual ``max_j |<λ_j v̄, v̄>|/|v̄|²``
    over the torus basis.
    """
    supp = orbit_support(v, frame, tol)
    if supp.empty:
        raise ValueError("minimal vector of 0 is undefined")
    if not is_orbit_closed(v, frame, tol):
        raise NotClosedError("orbit is not closed; use closed_orbit_in_closure")
    idx = list(supp.indices)
    u = _threshold(frame.coords(v), tol)
    a = frame.weights[idx]
    logw = np.log(u[idx] ** 2)
    lam = np.zeros(frame.rank)
    if frame.rank and np.any(a):
        uu, s, _ = np.linalg.svd(a.T, full_matrices=False)
        q = uu[:, s > 1e-12 * s[0]]
        b = a @ q  # weights in span coordinates

        def obj(y):
            z = 2.0 * b @ y + logw
            zmax = z.max()
            p = np.exp(z - zmax)
            tot = p.sum()
            return zmax + np.log(tot), p / tot

        y = np.zeros(q.shape[1])
        fy, p = obj(y)
        for _ in range(max_iter):
            mean = p @ b
            grad = 2.0 * mean
            if np.linalg.norm(grad) < 1e-15:
                break
            hess = 4.0 * ((b * p[:, None]).T @ b - np.outer(mean, mean))
            step = -np.linalg.solve(hess, grad)
            slope = grad @ step
            t = 1.0
            while True:
                fn, pn = obj(y + t * step)
                if fn <= fy + 1e-4 * t * slope or t < 1e-12:
                    break
                t *= 0.5
            if fn > fy and t < 1e-12:
                break
            y, fy, p = y + t * step, fn, pn
        lam = q @ y
    vbar = frame.act(lam, v)
    ub = frame.coords(vbar)
    nrm2 = float(ub @ ub)
    res = float(np.abs(frame.weights.T @ (ub**2)).max() / nrm2) if frame.rank else 0.0
    return lam, vbar, res


def minimal_vector_torus(v, frame: TorusFrame, tol: float = SUPPORT_TOL) -> np.ndarray:
    """Vector of least norm in the closed orbit ``T·v``."""
    return kempf_ness_minimizer(v, frame, tol)[1]


def closed_orbit_in_closure(v, frame: TorusFrame, tol: float = SUPPORT_TOL) -> np.ndarray:
    """Minimal vector of the unique closed orbit in the closure of ``T·v`` (possibly 0)."""
    w = np.asarray(v, dtype=float)
    for _ in range(frame.n + 1):
        supp = orbit_support(w, frame, tol)
        if supp.empty:
            return np.zeros(frame.n)
        if is_orbit_closed(w, frame, tol):
            return minimal_vector_torus(w, frame, tol)
        w = destabilizing_direction(w, frame, tol).limit
    raise RuntimeError("support failed to shrink")  # unreachable: each step drops a coordinate


@dataclass(frozen=True)
class SeparationFunction:
    """``f_w^σ(v) = Π_{i∈I} |v_i|^{w_i}`` if ``σ_i v_i > 0`` on ``I``, else 0."""

    exponents: np.ndarray  # length N, supported on I
    signs: tuple[int, ...]  # one sign per element of support
    support: tuple[int, ...]

    def __call__(self, u) -> float:
        u = np.asarray(u, dtype=float)
        sub = u[list(self.support)]
        if np.any(np.asarray(self.signs) * sub <= 0):
            return 0.0
        return float(np.exp(self.exponents[list(self.support)] @ np.log(np.abs(sub))))


class SeparationFamily(list):
    """List of :class:`SeparationFunction` plus stacked arrays for fast evaluation."""

    def __init__(self, frame: TorusFrame, functions: list[SeparationFunction], admissible: list[tuple[int, ...]]):
        super().__init__(functions)
        self.frame = frame
        self.admissible = admissible
        n = frame.n
        self.exponents = np.array([f.exponents for f in functions]) if functions else np.zeros((0, n))
        sig = np.zeros((len(functions), n))
        for r, f in enumerate(functions):
            sig[r, list(f.support)] = f.signs
        self.sign_matrix = sig


def _positive_basis(pts: np.ndarray) -> np.ndarray:
    """Basis of ``{w : Σ w_i α_i = 0}`` with positive entries, rows scaled to sum 1.

    Starts from the strictly positive certificate ``c`` and tilts it along an
    orthonormal complement of ``c`` inside the kernel, with a step small
    enough to keep every entry positive.
    """
    k = pts.shape[0]
    rel = zero_in_relative_interior(pts)
    c = rel.coefficients
    if pts.shape[1] == 0 or not np.any(pts):
        kern = np.eye(k)
    else:
        _, s, vt = np.linalg.svd(pts.T)
        rank = int(np.sum(s > 1e-12 * max(1.0, s[0])))
        kern = vt[rank:]
    # orthonormal complement of c inside the kernel
    cu = c / np.linalg.norm(c)
    comp = kern - np.outer(kern @ cu, cu)
    uu, s, _ = np.linalg.svd(comp.T, full_matrices=False)
    others = uu[:, s > 1e-10].T
    rows = [c]
    for n_vec in others:
        eps = 0.5 * c.min() / np.abs(n_vec).max()
        rows.append(c + eps * n_vec)
    basis = np.array(rows)
    return basis / basis.sum(axis=1, keepdims=True)


def separation_family(
    frame: TorusFrame,
    supports: list[tuple[int, ...]] | None = None,
    cap: int = ENUMERATION_CAP,
    max_size: int = MAX_FAMILY_SIZE,
) -> SeparationFamily:
    """The invariant functions ``f_w^σ`` over all admissible frame-index subsets ``I``.

    Admissibility depends only on the set of distinct weights met by ``I``, so
    subsets of distinct weights are enumerated (at most ``cap`` of them) and
    lifted to index subsets.  ``supports`` replaces the enumeration by an
    explicit list of index subsets; inadmissible entries are skipped.
    """
    reps, owner = frame.distinct_weights()
    blocks = [tuple(int(i) for i in np.flatnonzero(owner == j)) for j in range(len(reps))]
    admissible: list[tuple[int, ...]] = []
    if supports is None:
        if len(reps) > cap:
            raise EnumerationCapError(
                f"{len(reps)} distinct weights exceed the enumeration cap {cap}; pass explicit supports"
            )
        for mask in range(1, 2 ** len(reps)):
            chosen = [j for j in range(len(reps)) if mask >> j & 1]
            if not zero_in_relative_interior(reps[chosen]):
                continue
            choices = []
            for j in chosen:
                blk = blocks[j]
                choices.append([tuple(blk[b] for b in range(len(blk)) if m >> b & 1) for m in range(1, 2 ** len(blk))])
            for combo in product(*choices):
                admissible.append(tuple(sorted(i for part in combo for i in part)))
    else:
        for sup in supports:
            sup = tuple(sorted(int(i) for i in sup))
            if sup and zero_in_relative_interior(frame.weights[list(sup)]):
                admissible.append(sup)
    admissible.sort(key=lambda s: (len(s), s))
    total = 0
    bases = []
    for sup in admissible:
        basis = _positive_basis(frame.weights[list(sup)])
        total += basis.shape[0] * 2 ** len(sup)
        if total > max_size:
            raise EnumerationCapError(f"separation family exceeds {max_size} functions; pass explicit supports")
        bases.append(basis)
    funcs = []
    for sup, basis in zip(admissible, bases):
        for row in basis:
            w = np.zeros(frame.n)
            w[list(sup)] = row
            for sig in product((1, -1), repeat=len(sup)):
                funcs.append(SeparationFunction(w, sig, sup))
    return SeparationFamily(frame, funcs, admissible)


def evaluate_phi(v, family: SeparationFamily, tol: float = SUPPORT_TOL) -> np.ndarray:
    """``Φ(v) = (f(v))_{f ∈ family}``; coordinates below ``tol·|v|`` count as zero."""
    u = _threshold(family.frame.coords(v), tol)
    if not len(family):
        return np.zeros(0)
    sig = family.sign_matrix
    on = sig != 0
    ok = np.all(~on | (sig * u[None, :] > 0), axis=1)
    logs = np.log(np.where(u != 0, np.abs(u), 1.0))
    vals = np.exp(family.exponents @ logs)
    return np.where(ok, vals, 0.0)


def is_in_null_cone_torus(v, frame: TorusFrame, family: SeparationFamily | None = None, tol: float = SUPPORT_TOL) -> bool:
    """``0 ∈ closure(T·v)``; cross-checked against ``Φ(v) = 0`` when a family is supplied."""
    w = closed_orbit_in_closure(v, frame, tol)
    null = not np.any(w)
    if family is not None:
        phi = evaluate_phi(v, family, tol)
        scale = max(float(np.linalg.norm(v)), 1e-300)
        phi_null = bool(np.linalg.norm(phi) <= 1e-12 * scale)
        if phi_null != null:
            raise RuntimeError(f"closure analysis ({null}) and Φ ({phi_null}) disagree on null-cone membership")
    return null

"""Linear actions of real reductive matrix groups.

An action is given by generators of its Lie algebra ``g`` as operators on
``V``.  Everything downstream works in an orthonormal frame of ``V`` so the
adjoint of an operator is its transpose; :func:`load_action` converts a
non-standard scalar product on ``V`` into that frame once, at load time.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm, logm

DEFAULT_TOL = 1e-9
WEIGHT_MERGE_TOL = 1e-8


class ActionSpecError(ValueError):
    """Malformed or invalid action description."""

    def __init__(self, message: str, index: int | None = None, residual: float | None = None):
        self.index = index
        self.residual = residual
        if index is not None:
            message = f"{message} (generator {index}, residual {residual:.3e})"
        super().__init__(message)


class TorusError(RuntimeError):
    """Simultaneous diagonalization of the torus failed."""


def _commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def _lstsq_coords(basis_flat: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, float]:
    """Coordinates of ``target`` in the column span of ``basis_flat`` plus residual norm."""
    if basis_flat.shape[1] == 0:
        return np.zeros(0), float(np.linalg.norm(target))
    coef, *_ = np.linalg.lstsq(basis_flat, target, rcond=None)
    res = float(np.linalg.norm(basis_flat @ coef - target))
    return coef, res


def _gram_schmidt(vectors: np.ndarray, gram: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormalize the rows of ``vectors`` w.r.t. ``gram`` in order, dropping dependent rows."""
    out: list[np.ndarray] = []
    scale = max(1.0, float(np.sqrt(np.max(np.abs(np.diag(gram))))) if gram.size else 1.0)
    for v in vectors:
        w = v.astype(float).copy()
        for _ in range(2):
            for u in out:
                w = w - (u @ gram @ w) * u
        nrm2 = float(w @ gram @ w)
        if nrm2 > (tol * scale) ** 2 * max(1.0, float(v @ gram @ v)):
            out.append(w / np.sqrt(nrm2))
    if not out:
        return np.zeros((0, vectors.shape[1] if vectors.ndim == 2 else 0))
    return np.array(out)


@dataclass(frozen=True, eq=False)
class LinearAction:
    """Lie-algebra data of a linear action ``G -> Gl(V)``.

    ``generators`` are operators on ``V`` written in an orthonormal frame of
    the scalar product on ``V``.  ``inner_g`` is the Gram matrix of the scalar
    product on ``g`` in generator coordinates.  ``to_orthonormal`` maps
    user coordinates of vectors to frame coordinates (identity unless the spec
    provided ``inner_v``).
    """

    dim_v: int
    generators: np.ndarray
    inner_g: np.ndarray
    to_orthonormal: np.ndarray
    labels: tuple[str, ...] = ()
    name: str = "action"
    tol: float = DEFAULT_TOL

    @property
    def dim_g(self) -> int:
        return int(self.generators.shape[0])

    @cached_property
    def split(self) -> "CartanSplit":
        return cartan_split(self)

    @cached_property
    def transpose_map(self) -> np.ndarray:
        """Matrix of ``A -> A^t`` on ``g`` in generator coordinates."""
        m = self.dim_g
        flat = self.generators.reshape(m, self.dim_v ** 2).T
        tmat = np.zeros((m, m))
        for i, a in enumerate(self.generators):
            coef, _ = _lstsq_coords(flat, a.T.ravel())
            tmat[:, i] = coef
        return tmat

    def operator(self, coeffs: np.ndarray) -> np.ndarray:
        """Operator on ``V`` of the algebra element with generator coordinates ``coeffs``."""
        if self.dim_g == 0:
            return np.zeros((self.dim_v, self.dim_v))
        return np.tensordot(np.asarray(coeffs, dtype=float), self.generators, axes=1)

    def from_user(self, v) -> np.ndarray:
        return self.to_orthonormal @ np.asarray(v, dtype=float)

    def to_user(self, u) -> np.ndarray:
        return np.linalg.solve(self.to_orthonormal, np.asarray(u, dtype=float))

    def validate(self) -> "LinearAction":
        """Check transpose closure, bracket closure and the ad-compatibility of ``inner_g``.

        Raises :class:`ActionSpecError` naming the first offending generator.
        """
        m = self.dim_g
        if m == 0:
            return self
        flat = self.generators.reshape(m, self.dim_v ** 2).T
        if np.linalg.matrix_rank(flat, tol=self.tol * max(1.0, np.abs(flat).max())) < m:
            raise ActionSpecError("generators are linearly dependent")
        gram = self.inner_g
        if not np.allclose(gram, gram.T, atol=self.tol * max(1.0, np.abs(gram).max())):
            raise ActionSpecError("inner_g is not symmetric")
        if np.linalg.eigvalsh(gram).min() <= 0:
            raise ActionSpecError("inner_g is not positive definite")
        for i, a in enumerate(self.generators):
            scale = max(1.0, np.linalg.norm(a))
            _, res = _lstsq_coords(flat, a.T.ravel())
            if res > self.tol * scale:
                raise ActionSpecError("algebra not closed under transpose", i, res)
        for i in range(m):
            for j in range(i + 1, m):
                a, b = self.generators[i], self.generators[j]
                scale = max(1.0, np.linalg.norm(a) * np.linalg.norm(b))
                _, res = _lstsq_coords(flat, _commutator(a, b).ravel())
                if res > self.tol * scale:
                    raise ActionSpecError(f"bracket with generator {j} leaves the algebra", i, res)
        split = self.split
        for kind, ops, sign in (("k", split.k_ops, -1.0), ("p", split.p_ops, 1.0)):
            for i, x in enumerate(ops):
                ad = split.ad_matrix(x)
                res = float(np.abs(ad - sign * ad.T).max()) if ad.size else 0.0
                if res > self.tol * max(1.0, np.abs(ad).max() if ad.size else 1.0):
                    raise ActionSpecError(f"ad of {kind}-basis element violates inner_g compatibility", i, res)
        return self


def make_action(
    generators: Sequence[np.ndarray] | np.ndarray,
    dim_v: int | None = None,
    inner_v: np.ndarray | None = None,
    inner_g: np.ndarray | None = None,
    labels: Iterable[str] | None = None,
    name: str = "action",
    tol: float = DEFAULT_TOL,
) -> LinearAction:
    """Build and validate a :class:`LinearAction`.

    With ``inner_v`` given, generators are conjugated into an orthonormal frame
    (``inner_v = R^t R``, operators become ``R A R^{-1}``).  ``inner_g``
    defaults to the trace form ``tr(A B^t)`` of the frame operators.
    """
    gens = np.asarray(generators, dtype=float)
    if gens.size == 0:
        if dim_v is None:
            raise ActionSpecError("dim_v required for an action without generators")
        gens = np.zeros((0, dim_v, dim_v))
    if gens.ndim != 3 or gens.shape[1] != gens.shape[2]:
        raise ActionSpecError(f"generators must be square operators, got shape {gens.shape}")
    n = gens.shape[1]
    if dim_v is not None and dim_v != n:
        raise ActionSpecError(f"dim_v={dim_v} does not match generator size {n}")
    if inner_v is None:
        r = np.eye(n)
    else:
        inner_v = np.asarray(inner_v, dtype=float)
        if inner_v.shape != (n, n) or not np.allclose(inner_v, inner_v.T):
            raise ActionSpecError("inner_v must be a symmetric dim_v x dim_v matrix")
        try:
            r = np.linalg.cholesky(inner_v).T
        except np.linalg.LinAlgError as exc:
            raise ActionSpecError("inner_v is not positive definite") from exc
        rinv = np.linalg.inv(r)
        gens = np.einsum("ij,mjk,kl->mil", r, gens, rinv)
    if inner_g is None:
        inner_g = np.einsum("aij,bij->ab", gens, gens)
    else:
        inner_g = np.asarray(inner_g, dtype=float)
        if inner_g.shape != (gens.shape[0], gens.shape[0]):
            raise ActionSpecError("inner_g must be dim_g x dim_g")
    act = LinearAction(
        dim_v=n,
        generators=gens,
        inner_g=inner_g,
        to_orthonormal=r,
        labels=tuple(labels or ()),
        name=name,
        tol=tol,
    )
    return act.validate()


def load_action(spec) -> LinearAction:
    """Load an action from a JSON file path, JSON text, or an already-parsed mapping.

    Recognised keys: ``dim_v``, ``generators`` (row-major flattened operators),
    optional ``inner_v`` (flattened Gram matrix), ``inner_g``, ``labels``, ``name``.
    """
    if isinstance(spec, (str, Path)):
        text = str(spec)
        path = Path(text)
        try:
            is_file = path.is_file()
        except OSError:
            is_file = False
        if is_file:
            text = path.read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ActionSpecError(f"cannot parse action spec: {exc}") from exc
    else:
        data = dict(spec)
    try:
        n = int(data["dim_v"])
        gens = [np.asarray(g, dtype=float).reshape(n, n) for g in data.get("generators", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise ActionSpecError(f"cannot parse action spec: {exc!r}") from exc
    if n <= 0:
        raise ActionSpecError("dim_v must be positive")
    inner_v = data.get("inner_v")
    if inner_v is not None:
        inner_v = np.asarray(inner_v, dtype=float).reshape(n, n)
    inner_g = data.get("inner_g")
    if inner_g is not None:
        inner_g = np.asarray(inner_g, dtype=float).reshape(len(gens), len(gens))
    return make_action(
        np.array(gens) if gens else np.zeros((0, n, n)),
        dim_v=n,
        inner_v=inner_v,
        inner_g=inner_g,
        labels=data.get("labels"),
        name=data.get("name", "action"),
    )


@dataclass(frozen=True, eq=False)
class CartanSplit:
    """Orthonormal bases of ``k = g ∩ so(V)`` and ``p = g ∩ Sym(V)``.

    Bases are stored twice: as operators on ``V`` and as coefficient rows
    over the generators.  Elements of ``g`` are addressed by coordinates in
    the concatenated orthonormal basis (``k`` first, then ``p``).
    """

    action: LinearAction
    k_coef: np.ndarray
    p_coef: np.ndarray
    k_ops: np.ndarray
    p_ops: np.ndarray

    @property
    def dim_k(self) -> int:
        return int(self.k_ops.shape[0])

    @property
    def dim_p(self) -> int:
        return int(self.p_ops.shape[0])

    @cached_property
    def g_ops(self) -> np.ndarray:
        return np.concatenate([self.k_ops, self.p_ops], axis=0)

    @cached_property
    def _g_flat(self) -> np.ndarray:
        return self.g_ops.reshape(self.g_ops.shape[0], self.action.dim_v ** 2).T

    @cached_property
    def _p_flat(self) -> np.ndarray:
        return self.p_ops.reshape(self.dim_p, self.action.dim_v ** 2).T

    def g_coords(self, op: np.ndarray, check: bool = False) -> np.ndarray:
        coef, res = _lstsq_coords(self._g_flat, np.asarray(op).ravel())
        if check and res > 1e-7 * max(1.0, np.linalg.norm(op)):
            raise ValueError(f"operator not in g (residual {res:.2e})")
        return coef

    def p_coords(self, op: np.ndarray) -> np.ndarray:
        """Coordinates of a symmetric operator in ``pBasis`` (least squares)."""
        coef, _ = _lstsq_coords(self._p_flat, np.asarray(op).ravel())
        return coef

    def p_element(self, coords) -> np.ndarray:
        if self.dim_p == 0:
            return np.zeros((self.action.dim_v,) * 2)
        return np.tensordot(np.asarray(coords, dtype=float), self.p_ops, axes=1)

    def g_element(self, coords) -> np.ndarray:
        if self.g_ops.shape[0] == 0:
            return np.zeros((self.action.dim_v,) * 2)
        return np.tensordot(np.asarray(coords, dtype=float), self.g_ops, axes=1)

    def ad_matrix(self, x: np.ndarray) -> np.ndarray:
        """Matrix of ``ad(x)`` on ``g`` in the orthonormal ``k ⊕ p`` basis."""
        m = self.g_ops.shape[0]
        out = np.zeros((m, m))
        for b, op in enumerate(self.g_ops):
            out[:, b] = self.g_coords(_commutator(x, op))
        return out

    def bracket_residuals(self) -> dict[str, float]:
        """Largest relative failures of ``[k,p] ⊆ p`` and ``[p,p] ⊆ k``."""
        kflat = self.k_ops.reshape(self.dim_k, self.action.dim_v ** 2).T
        worst = {"kp_in_p": 0.0, "pp_in_k": 0.0}
        for x in self.k_ops:
            for y in self.p_ops:
                c = _commutator(x, y)
                _, res = _lstsq_coords(self._p_flat, c.ravel())
                worst["kp_in_p"] = max(worst["kp_in_p"], res)
        for i, x in enumerate(self.p_ops):
            for y in self.p_ops[i + 1:]:
                c = _commutator(x, y)
                _, res = _lstsq_coords(kflat, c.ravel())
                worst["pp_in_k"] = max(worst["pp_in_k"], res)
        return worst


def cartan_split(action: LinearAction) -> CartanSplit:
    """Split ``g = k ⊕ p`` by the transpose involution, bases orthonormal for ``inner_g``."""
    m = action.dim_g
    n = action.dim_v
    if m == 0:
        empty = np.zeros((0, n, n))
        return CartanSplit(action, np.zeros((0, 0)), np.zeros((0, 0)), empty, empty.copy())
    tmat = action.transpose_map
    eye = np.eye(m)
    sym = ((eye + tmat) / 2).T
    skew = ((eye - tmat) / 2).T
    gram = action.inner_g
    p_coef = _gram_schmidt(sym, gram, action.tol)
    k_coef = _gram_schmidt(skew, gram, action.tol)
    p_coef = p_coef.reshape(-1, m)
    k_coef = k_coef.reshape(-1, m)
    p_ops = np.tensordot(p_coef, action.generators, axes=1) if len(p_coef) else np.zeros((0, n, n))
    k_ops = np.tensordot(k_coef, action.generators, axes=1) if len(k_coef) else np.zeros((0, n, n))
    # exact symmetrization removes least-squares noise in the coefficients
    p_ops = (p_ops + p_ops.transpose(0, 2, 1)) / 2
    k_ops = (k_ops - k_ops.transpose(0, 2, 1)) / 2
    if len(p_coef) + len(k_coef) != m:
        raise ActionSpecError(f"Cartan split has dimension {len(p_coef) + len(k_coef)} != dim g = {m}")
    cross = k_coef @ gram @ p_coef.T if len(k_coef) and len(p_coef) else np.zeros(0)
    if cross.size and np.abs(cross).max() > 1e-7:
        raise ActionSpecError("inner_g does not make k and p orthogonal", None, None)
    return CartanSplit(action, k_coef, p_coef, k_ops, p_ops)


@dataclass(frozen=True, eq=False)
class TorusFrame:
    """Maximal abelian ``t ⊆ p`` with an orthonormal eigenbasis of ``V``.

    ``weights[i]`` holds the coordinates (in ``torus_ops``) of the weight of
    the basis vector ``v_basis[:, i]``; an element ``λ = Σ x_j torus_ops[j]``
    acts on that vector by ``weights[i] @ x``.
    """

    split: CartanSplit
    torus_coef: np.ndarray  # rows: p-coordinates of an orthonormal basis of t
    torus_ops: np.ndarray
    v_basis: np.ndarray
    weights: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.torus_ops.shape[0])

    @property
    def n(self) -> int:
        return int(self.v_basis.shape[0])

    def coords(self, v) -> np.ndarray:
        return self.v_basis.T @ np.asarray(v, dtype=float)

    def vector(self, u) -> np.ndarray:
        return self.v_basis @ np.asarray(u, dtype=float)

    def element(self, x) -> np.ndarray:
        """Operator of ``Σ x_j torus_ops[j]``."""
        if self.rank == 0:
            return np.zeros((self.n, self.n))
        return np.tensordot(np.asarray(x, dtype=float), self.torus_ops, axes=1)

    def act(self, x, v) -> np.ndarray:
        """``exp(λ)·v`` for ``λ`` with torus coordinates ``x``."""
        u = self.coords(v)
        return self.vector(np.exp(self.weights @ np.asarray(x, dtype=float)) * u)

    def distinct_weights(self, tol: float = WEIGHT_MERGE_TOL) -> tuple[np.ndarray, np.ndarray]:
        """Merged weights and, for each basis index, the index of its merged weight."""
        reps: list[np.ndarray] = []
        owner = np.zeros(self.n, dtype=int)
        for i, w in enumerate(self.weights):
            for j, r in enumerate(reps):
                if np.linalg.norm(w - r) <= tol * max(1.0, np.linalg.norm(r)):
                    owner[i] = j
                    break
            else:
                owner[i] = len(reps)
                reps.append(w)
        arr = np.array(reps) if reps else np.zeros((0, self.rank))
        return arr, owner

    def diagonal_residual(self) -> float:
        worst = 0.0
        for op in self.torus_ops:
            d = self.v_basis.T @ op @ self.v_basis
            worst = max(worst, float(np.abs(d - np.diag(np.diag(d))).max()))
        return worst


def _null_space(mat: np.ndarray, tol: float) -> np.ndarray:
    if mat.size == 0:
        return np.eye(mat.shape[1])
    _, s, vt = np.linalg.svd(mat)
    scale = max(1.0, s[0] if s.size else 1.0)
    rank = int(np.sum(s > tol * scale))
    return vt[rank:].T


def _centralizer_in_p(split: CartanSplit, t_coords: list[np.ndarray], tol: float) -> np.ndarray:
    """Orthonormal (coords) basis of ``{X ∈ p : [X, τ] = 0 for τ ∈ t}`` as columns."""
    dp = split.dim_p
    if not t_coords:
        return np.eye(dp)
    rows = []
    for tc in t_coords:
        tau = split.p_element(tc)
        cols = [_commutator(p, tau).ravel() for p in split.p_ops]
        rows.append(np.array(cols).T)
    return _null_space(np.vstack(rows), tol)


def _simultaneous_eigenbasis(ops: np.ndarray, n: int, tol: float) -> np.ndarray:
    basis = np.eye(n)
    blocks = [np.arange(n)]
    for op in ops:
        scale = max(1.0, np.abs(op).max())
        new_cols = []
        new_blocks = []
        start = 0
        for blk in blocks:
            q = basis[:, blk]
            sub = q.T @ op @ q
            sub = (sub + sub.T) / 2
            vals, vecs = np.linalg.eigh(sub)
            q = q @ vecs
            # split into clusters of equal eigenvalues
            cluster_start = 0
            for k in range(1, len(vals) + 1):
                if k == len(vals) or vals[k] - vals[k - 1] > tol * scale:
                    idx = np.arange(cluster_start, k)
                    new_cols.append(q[:, idx])
                    new_blocks.append(np.arange(start + cluster_start, start + k))
                    cluster_start = k
            start += len(blk)
        basis = np.hstack(new_cols)
        blocks = new_blocks
    return basis


def maximal_torus(split: CartanSplit, tol: float | None = None) -> TorusFrame:
    """Greedy maximal abelian subalgebra of ``p`` and its weight decomposition of ``V``.

    Candidates are taken from ``pBasis`` in order: at each round the first
    basis element with a nonzero component in (centralizer of t) ⊖ t is added.
    The loop ends when the centralizer of ``t`` in ``p`` equals ``t``.
    """
    tol = split.action.tol if tol is None else tol
    n = split.action.dim_v
    dp = split.dim_p
    t_coords: list[np.ndarray] = []
    while True:
        cent = _centralizer_in_p(split, t_coords, 1e-10)
        chosen = None
        for j in range(dp):
            e = np.zeros(dp)
            e[j] = 1.0
            c = cent @ (cent.T @ e)
            for tc in t_coords:
                c = c - (tc @ c) * tc
            if np.linalg.norm(c) > 1e-6:
                chosen = c / np.linalg.norm(c)
                break
        if chosen is None:
            break
        t_coords.append(chosen)
    tcoef = np.array(t_coords) if t_coords else np.zeros((0, dp))
    tops = np.tensordot(tcoef, split.p_ops, axes=1) if t_coords else np.zeros((0, n, n))
    basis = _simultaneous_eigenbasis(tops, n, WEIGHT_MERGE_TOL)
    weights = np.einsum("ia,jab,ib->ij", basis.T, tops, basis.T) if t_coords else np.zeros((n, 0))
    # canonical order: weights descending lexicographically, sign of each vector fixed
    order = sorted(range(n), key=lambda i: tuple(-np.round(weights[i], 9)) + (i,))
    basis = basis[:, order]
    weights = weights[order]
    for i in range(n):
        k = int(np.argmax(np.abs(basis[:, i])))
        if basis[k, i] < 0:
            basis[:, i] = -basis[:, i]
    frame = TorusFrame(split, tcoef, tops, basis, weights)
    res = frame.diagonal_residual()
    if res > 1e-8 * max(1.0, np.abs(tops).max() if tops.size else 1.0):
        comm = max(
            (float(np.abs(_commutator(a, b)).max()) for a in tops for b in tops),
            default=0.0,
        )
        raise TorusError(f"simultaneous diagonalization failed: off-diagonal {res:.2e}, commutator {comm:.2e}")
    return frame


@dataclass
class IwasawaReport:
    k: np.ndarray
    t: np.ndarray
    n: np.ndarray
    ktn_residual: float
    k1: np.ndarray
    t_ktk: np.ndarray
    k2: np.ndarray
    ktk_residual: float
    t_in_torus_residual: float
    n_in_g_residual: float
    ok: bool = False


def _ql_positive(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``g = Q L`` with ``Q`` orthogonal and ``L`` lower triangular with positive diagonal."""
    rev = np.eye(g.shape[0])[::-1]
    q, r = np.linalg.qr(rev @ g @ rev)
    s = np.sign(np.diag(r))
    s[s == 0] = 1.0
    q = q * s
    r = s[:, None] * r
    return rev @ q @ rev, rev @ r @ rev


def _conjugate_into_torus(frame: TorusFrame, sym: np.ndarray, iters: int = 5000) -> tuple[np.ndarray, np.ndarray]:
    """Find ``k ∈ K`` with ``k^{-1} sym k ∈ t`` by ascent of ``<k^{-1} sym k, H>`` over ``K``.

    Returns ``(k, x)`` with ``x`` the torus coordinates of the conjugate.
    """
    split = frame.split
    n = frame.n
    if frame.rank == 0:
        return np.eye(n), np.zeros(0)
    # generic element of t: irrational-ish coefficients
    h = frame.element(np.sqrt(np.arange(2, frame.rank + 2, dtype=float)))
    k = np.eye(n)
    cur = sym.copy()
    step = 0.5 / max(1e-12, np.linalg.norm(sym) * np.linalg.norm(h))
    for _ in range(iters):
        c = _commutator(cur, h)  # in k; ascent direction for <e^{-X} cur e^{X}, h>
        if split.dim_k == 0 or np.linalg.norm(c) < 1e-13 * max(1.0, np.linalg.norm(sym)):
            break
        coords = np.array([np.sum(c * x) for x in split.k_ops])
        x = np.tensordot(coords, split.k_ops, axes=1)
        if np.linalg.norm(x) < 1e-15:
            break
        e = expm(step * x)
        new = e.T @ cur @ e
        if np.sum(new * h) + 1e-15 < np.sum(cur * h):
            step /= 2
            continue
        k = k @ e
        cur = new
        step *= 1.2
    # Newton refinement: choose X in k with off-torus part of cur + [cur, X] zero
    tflat = frame.torus_ops.reshape(frame.rank, frame.n ** 2).T
    tq, _ = np.linalg.qr(tflat)
    for _ in range(20):
        resid = cur.ravel() - tq @ (tq.T @ cur.ravel())
        if split.dim_k == 0 or np.linalg.norm(resid) < 1e-15 * max(1.0, np.linalg.norm(sym)):
            break
        cols = np.array([(cur @ x - x @ cur).ravel() for x in split.k_ops]).T
        cols = cols - tq @ (tq.T @ cols)
        coef, *_ = np.linalg.lstsq(cols, -resid, rcond=None)
        e = expm(np.tensordot(coef, split.k_ops, axes=1))
        new = e.T @ cur @ e
        new_res = np.linalg.norm(new.ravel() - tq @ (tq.T @ new.ravel()))
        if new_res >= np.linalg.norm(resid):
            break
        k = k @ e
        cur = new
    tc, _ = _lstsq_coords(tflat, cur.ravel())
    return k, tc


def iwasawa_check(action: LinearAction, samples: Iterable[np.ndarray], tol: float = 1e-9) -> list[IwasawaReport]:
    """Factor each group element as ``k t n`` (Iwasawa) and ``k1 t k2``; report residuals.

    ``samples`` are operators on ``V`` (e.g. products of exponentials of
    elements of ``g``).  The ``n`` factor is unipotent lower triangular in the
    torus eigenbasis ordered by a generic linear functional on the weights.
    """
    split = action.split
    frame = maximal_torus(split)
    generic = np.sqrt(np.arange(2, frame.rank + 2, dtype=float))
    order = np.argsort(frame.weights @ generic, kind="stable") if frame.rank else np.arange(frame.n)
    basis = frame.v_basis[:, order]
    wts = frame.weights[order]
    gflat = action.generators.reshape(action.dim_g, action.dim_v ** 2).T
    reports = []
    for g in samples:
        g = np.asarray(g, dtype=float)
        gb = basis.T @ g @ basis
        q, low = _ql_positive(gb)
        d = np.diag(low)
        nmat = low / d[:, None]
        tdiag = np.diag(d)
        k = basis @ q @ basis.T
        t = basis @ tdiag @ basis.T
        nn = basis @ nmat @ basis.T
        ktn_res = float(np.linalg.norm(k @ t @ nn - g) / max(1.0, np.linalg.norm(g)))
        if frame.rank:
            _, t_res = _lstsq_coords(wts, np.log(d))
        else:
            t_res = float(np.linalg.norm(np.log(d)))
        lg = np.real(logm(nn)) if action.dim_g else np.zeros_like(nn)
        _, n_res = _lstsq_coords(gflat, lg.ravel()) if action.dim_g else (None, float(np.linalg.norm(lg)))
        # polar decomposition, then rotate the symmetric part into t
        w, u = np.linalg.eigh(g.T @ g)
        psym = u @ np.diag(0.5 * np.log(w)) @ u.T
        kpol = g @ u @ np.diag(w ** -0.5) @ u.T
        kk, x = _conjugate_into_torus(frame, psym)
        tk = expm(frame.element(x)) if frame.rank else np.eye(action.dim_v)
        k1 = kpol @ kk
        k2 = kk.T
        ktk_res = float(np.linalg.norm(k1 @ tk @ k2 - g) / max(1.0, np.linalg.norm(g)))
        rep = IwasawaReport(k, t, nn, ktn_res, k1, tk, k2, ktk_res, t_res, n_res)
        rep.ok = max(ktn_res, t_res, n_res) < tol * 100 and ktk_res < 1e-7
        reports.append(rep)
    return reports

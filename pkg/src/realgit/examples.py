"""Built-in actions: scaling on R^2, conjugation on Mat(n), change of basis on brackets."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .rep import LinearAction, make_action


def make_scaling_r2() -> LinearAction:
    """``λ·(x, y) = (λx, λ^{-1}y)``; generator ``diag(1, -1)``."""
    return make_action([np.diag([1.0, -1.0])], name="scaling-r2", labels=["a"])


def _gl_basis(n: int, traceless: bool) -> tuple[list[np.ndarray], list[str]]:
    mats, names = [], []
    if traceless:
        for k in range(n - 1):
            h = np.zeros((n, n))
            h[k, k], h[k + 1, k + 1] = 1.0, -1.0
            mats.append(h)
            names.append(f"H{k + 1}")
    else:
        for k in range(n):
            e = np.zeros((n, n))
            e[k, k] = 1.0
            mats.append(e)
            names.append(f"E{k + 1}{k + 1}")
    for a in range(n):
        for b in range(n):
            if a != b:
                e = np.zeros((n, n))
                e[a, b] = 1.0
                mats.append(e)
                names.append(f"E{a + 1}{b + 1}")
    return mats, names


def _trace_gram(mats: list[np.ndarray]) -> np.ndarray:
    return np.array([[np.sum(x * y) for y in mats] for x in mats])


def conjugation_operator(x: np.ndarray) -> np.ndarray:
    """Matrix of ``A -> XA - AX`` on row-major ``vec(A)``."""
    n = x.shape[0]
    eye = np.eye(n)
    return np.kron(x, eye) - np.kron(eye, x.T)


def make_sln_conjugation(n: int) -> LinearAction:
    """``SL_n(R)`` acting on ``Mat(n, R)`` by conjugation, scalar product ``tr(A B^t)`` on both."""
    if not 2 <= n <= 5:
        raise ValueError("sl-conj supports 2 <= n <= 5")
    mats, names = _gl_basis(n, traceless=True)
    gens = [conjugation_operator(x) for x in mats]
    act = make_action(gens, inner_g=_trace_gram(mats), labels=names, name=f"sl-conj:{n}")
    object.__setattr__(act, "realization", np.array(mats))
    return act


@dataclass(frozen=True)
class BracketTensor:
    """Skew-symmetric bilinear ``μ: R^n x R^n -> R^n``; ``coeffs[(i,j) index, k]`` for ``i < j``."""

    n: int
    coeffs: np.ndarray

    @staticmethod
    def pairs(n: int) -> list[tuple[int, int]]:
        return list(combinations(range(n), 2))

    @classmethod
    def from_vector(cls, n: int, vec) -> "BracketTensor":
        vec = np.asarray(vec, dtype=float)
        return cls(n, vec.reshape(len(cls.pairs(n)), n))

    @classmethod
    def from_brackets(cls, n: int, brackets: dict) -> "BracketTensor":
        """``brackets[(i, j)] = {k: c}`` with 1-based indices, meaning ``μ(e_i, e_j) = Σ c e_k``."""
        full = np.zeros((n, n, n))
        for (i, j), out in brackets.items():
            for k, c in out.items():
                full[i - 1, j - 1, k - 1] += c
                full[j - 1, i - 1, k - 1] -= c
        return cls.from_full(full)

    @classmethod
    def from_full(cls, full: np.ndarray) -> "BracketTensor":
        n = full.shape[0]
        return cls(n, np.array([full[i, j] for i, j in cls.pairs(n)]))

    @property
    def vector(self) -> np.ndarray:
        return self.coeffs.ravel().copy()

    def full(self) -> np.ndarray:
        t = np.zeros((self.n,) * 3)
        for idx, (i, j) in enumerate(self.pairs(self.n)):
            t[i, j] = self.coeffs[idx]
            t[j, i] = -self.coeffs[idx]
        return t

    def bracket(self, x, y) -> np.ndarray:
        return np.einsum("i,j,ijk->k", x, y, self.full())


def bracket_operator(x: np.ndarray) -> np.ndarray:
    """Matrix of ``μ -> Xμ(·,·) - μ(X·,·) - μ(·,X·)`` on bracket coordinates."""
    n = x.shape[0]
    pairs = BracketTensor.pairs(n)
    dim = len(pairs) * n
    op = np.zeros((dim, dim))
    for col in range(dim):
        e = np.zeros(dim)
        e[col] = 1.0
        c = BracketTensor.from_vector(n, e).full()
        out = np.einsum("kl,ijl->ijk", x, c) - np.einsum("li,ljk->ijk", x, c) - np.einsum("lj,ilk->ijk", x, c)
        op[:, col] = BracketTensor.from_full(out).vector
    return op


def make_bracket_action(n: int, group: str = "sl") -> LinearAction:
    """Change-of-basis action of ``GL_n`` or ``SL_n`` on ``Λ²(R^n)* ⊗ R^n``.

    The bases ``e_i* ⊗ e_j`` of ``gl_n`` and ``e_i* ∧ e_j* ⊗ e_k`` (``i < j``)
    are orthonormal; this is not the scalar product induced from ``gl(V_n)``.
    """
    if not 2 <= n <= 4:
        raise ValueError("brackets supports 2 <= n <= 4")
    if group not in ("gl", "sl"):
        raise ValueError("group must be 'gl' or 'sl'")
    mats, names = _gl_basis(n, traceless=(group == "sl"))
    gens = [bracket_operator(x) for x in mats]
    act = make_action(gens, inner_g=_trace_gram(mats), labels=names, name=f"brackets:{n}:{group}")
    object.__setattr__(act, "realization", np.array(mats))
    return act


def heisenberg(n: int = 3) -> BracketTensor:
    """``μ(e1, e2) = e3``, remaining brackets zero."""
    return BracketTensor.from_brackets(n, {(1, 2): {3: 1.0}})


def so3() -> BracketTensor:
    return BracketTensor.from_brackets(3, {(1, 2): {3: 1.0}, (2, 3): {1: 1.0}, (3, 1): {2: 1.0}})


def jacobi_defect(mu: BracketTensor) -> float:
    """Sum of squared components of the Jacobiator over all basis triples."""
    c = mu.full()
    # J(x,y,z) = μ(μ(x,y),z) + μ(μ(y,z),x) + μ(μ(z,x),y)
    j = (
        np.einsum("ijl,lkm->ijkm", c, c)
        + np.einsum("jkl,lim->ijkm", c, c)
        + np.einsum("kil,ljm->ijkm", c, c)
    )
    total = 0.0
    for i in range(mu.n):
        for jj in range(i + 1, mu.n):
            for k in range(jj + 1, mu.n):
                total += float(j[i, jj, k] @ j[i, jj, k])
    return total


def is_nilpotent_bracket(mu: BracketTensor, tol: float = 1e-8) -> bool:
    """Lower central series ``C^{k+1} = μ(R^n, C^k)`` reaches zero."""
    n = mu.n
    c = mu.full()
    space = np.eye(n)
    for _ in range(n + 1):
        vecs = [np.einsum("i,j,ijk->k", np.eye(n)[a], s, c) for a in range(n) for s in space.T]
        if not vecs:
            return True
        mat = np.array(vecs).T
        u, s, _ = np.linalg.svd(mat, full_matrices=False)
        scale = max(1.0, np.abs(c).max())
        rank = int(np.sum(s > tol * scale))
        if rank == 0:
            return True
        if rank == space.shape[1]:
            # C^{k+1} ⊆ C^k with equal dimension: the series has stabilized
            return False
        space = u[:, :rank]
    return False


def is_nilpotent_matrix(a: np.ndarray, tol: float = 1e-8) -> bool:
    """``|A^n| < tol |A|^n``."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    nrm = np.linalg.norm(a)
    if nrm == 0:
        return True
    b = a / nrm
    return bool(np.linalg.norm(np.linalg.matrix_power(b, n)) < tol)


@dataclass
class NilsolitonReport:
    gradient_norm: float
    soliton_candidate: bool
    flow: object
    label: object
    limit: BracketTensor
    limit_jacobi_defect: float


def nilsoliton_residual(mu: BracketTensor, tol: float = 1e-8, action: LinearAction | None = None) -> NilsolitonReport:
    """Energy-gradient norm at ``μ/|μ|`` under the ``SL_n`` action, plus the flow limit and its label."""
    from .moment import grad_energy
    from .strata import stratum_label

    if jacobi_defect(mu) > tol:
        raise ValueError("bracket does not satisfy the Jacobi identity")
    if not is_nilpotent_bracket(mu):
        raise ValueError("bracket is not nilpotent")
    act = action or make_bracket_action(mu.n, "sl")
    v = mu.vector
    v = v / np.linalg.norm(v)
    gn = float(np.linalg.norm(grad_energy(v, act)))
    label, fr = stratum_label(v, act)
    lim = BracketTensor.from_vector(mu.n, fr.limit)
    return NilsolitonReport(gn, gn < tol, fr, label, lim, jacobi_defect(lim))


EXAMPLE_NAMES = ("scaling-r2", "sl-conj:<n>", "brackets:<n>:<gl|sl>")


def example_action(name: str) -> LinearAction:
    """Resolve ``scaling-r2``, ``sl-conj:<n>``, ``brackets:<n>:<gl|sl>``, ``trivial:<dim>``."""
    parts = name.split(":")
    try:
        if parts[0] == "scaling-r2" and len(parts) == 1:
            return make_scaling_r2()
        if parts[0] == "sl-conj" and len(parts) == 2:
            return make_sln_conjugation(int(parts[1]))
        if parts[0] == "brackets" and len(parts) == 3:
            return make_bracket_action(int(parts[1]), parts[2])
        if parts[0] == "trivial" and len(parts) == 2:
            return make_action(np.zeros((0, int(parts[1]), int(parts[1]))), dim_v=int(parts[1]), name=name)
    except ValueError as exc:
        raise KeyError(f"bad example name {name!r}: {exc}") from exc
    raise KeyError(f"unknown example {name!r}; known: {', '.join(EXAMPLE_NAMES)}")

"""Energy strata: β-adapted data, candidate labels, flow labels and membership tests."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .convex import min_norm_point
from .moment import FlowOptions, FlowResult, beta_plus, flow, moment, moment_coords
from .rep import LinearAction, TorusFrame, maximal_torus
from .torus import ENUMERATION_CAP, EnumerationCapError

LABEL_TOL = 1e-7
EIG_MERGE = 1e-8


class ProjectionError(ValueError):
    """Vector has a component in a negative eigenspace of β⁺, so ``exp(-tβ⁺)·v`` diverges."""


class EstimateViolation(AssertionError):
    pass


def _orth(cols: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    if cols.size == 0:
        return np.zeros((cols.shape[0], 0))
    u, s, _ = np.linalg.svd(cols, full_matrices=False)
    return u[:, s > tol * max(1.0, s[0] if s.size else 1.0)]


def _merge_eigs(vals: np.ndarray, vecs: np.ndarray, tol: float) -> list[tuple[float, np.ndarray]]:
    out: list[tuple[float, np.ndarray]] = []
    i = 0
    while i < len(vals):
        j = i + 1
        while j < len(vals) and vals[j] - vals[i] <= tol:
            j += 1
        out.append((float(np.mean(vals[i:j])), vecs[:, i:j]))
        i = j
    return out


@dataclass
class BetaAdapted:
    """Eigenspace data of ``β ∈ p`` on ``V`` (through ``β⁺``) and on ``g`` (through ``ad β``).

    Subspaces of ``V`` are orthonormal column bases; subalgebras of ``g`` are
    orthonormal bases given as coordinate rows in the ``k ⊕ p`` basis of the
    Cartan split, with operators alongside.
    """

    action: LinearAction
    beta: np.ndarray  # p coordinates
    beta_op: np.ndarray
    beta_plus: np.ndarray
    eigs_v: list[tuple[float, np.ndarray]]
    v_nn: np.ndarray
    v0: np.ndarray
    ad_eigs: list[tuple[float, np.ndarray]]
    g_beta: np.ndarray
    u_beta: np.ndarray
    u_beta_t: np.ndarray
    h_beta: np.ndarray
    h_beta_p: np.ndarray  # p coordinates of an orthonormal basis of h_β ∩ p
    tol: float = 1e-8

    @property
    def norm2(self) -> float:
        return float(self.beta @ self.beta)

    @property
    def q_beta(self) -> np.ndarray:
        return np.concatenate([self.g_beta, self.u_beta], axis=0)

    def ops(self, rows: np.ndarray) -> np.ndarray:
        if rows.shape[0] == 0:
            n = self.action.dim_v
            return np.zeros((0, n, n))
        return np.tensordot(rows, self.action.split.g_ops, axes=1)

    def h_beta_p_ops(self) -> np.ndarray:
        """Operators of ``h_β ∩ p`` restricted to ``V⁰`` (in the ``v0`` basis)."""
        if self.h_beta_p.shape[0] == 0:
            d = self.v0.shape[1]
            return np.zeros((0, d, d))
        full = np.tensordot(self.h_beta_p, self.action.split.p_ops, axes=1)
        return np.einsum("ai,kab,bj->kij", self.v0, full, self.v0)

    def check(self, rng: np.random.Generator | None = None, samples: int = 5) -> dict[str, float]:
        """Residuals of the structural identities (all should be ~0)."""
        rng = np.random.default_rng(0) if rng is None else rng
        split = self.action.split
        out: dict[str, float] = {}
        dims = self.g_beta.shape[0] + self.u_beta.shape[0] + self.u_beta_t.shape[0]
        out["dimension_gap"] = float(abs(dims - split.g_ops.shape[0]))
        beta_g = np.concatenate([np.zeros(split.dim_k), self.beta])
        out["h_beta_dot_beta"] = float(np.abs(self.h_beta @ beta_g).max()) if self.h_beta.size else 0.0
        # [g_r, g_s] ⊆ g_{r+s}
        worst = 0.0
        for r, er in self.ad_eigs:
            for s, es in self.ad_eigs:
                for a in self.ops(er.T)[:2]:
                    for b in self.ops(es.T)[:2]:
                        c = split.g_coords(a @ b - b @ a)
                        ad = split.ad_matrix(self.beta_op)
                        worst = max(worst, float(np.linalg.norm(ad @ c - (r + s) * c)))
        out["grading"] = worst
        # β⁺(A v) - A β⁺ v = λ_A A v
        worst = 0.0
        for lam_a, ea in self.ad_eigs:
            for a in self.ops(ea.T)[:2]:
                for _, ev in self.eigs_v:
                    v = ev[:, 0]
                    lhs = self.beta_plus @ (a @ v) - a @ (self.beta_plus @ v)
                    worst = max(worst, float(np.linalg.norm(lhs - lam_a * (a @ v))))
        out["eigen_shift"] = worst
        # Q_β preserves V^{≥0}
        worst = 0.0
        qops = self.ops(self.q_beta)
        if qops.shape[0] and self.v_nn.shape[1]:
            proj_out = np.eye(self.action.dim_v) - self.v_nn @ self.v_nn.T
            for _ in range(samples):
                x = qops.T @ rng.normal(size=qops.shape[0])
                g = expm(0.3 * x.T)
                v = self.v_nn @ rng.normal(size=self.v_nn.shape[1])
                worst = max(worst, float(np.linalg.norm(proj_out @ (g @ v)) / np.linalg.norm(v)))
        out["q_beta_invariance"] = worst
        return out


def beta_adapted(beta, action: LinearAction, tol: float = EIG_MERGE) -> BetaAdapted:
    """β-adapted subspaces for ``β`` given by its ``p`` coordinates."""
    split = action.split
    b = np.asarray(beta, dtype=float).ravel()
    bop = split.p_element(b)
    bp = beta_plus(b, action)
    lam, vecs = np.linalg.eigh((bp + bp.T) / 2)
    rad = max(1.0, float(np.abs(lam).max()) if lam.size else 1.0)
    eigs = _merge_eigs(lam, vecs, tol * rad)
    nn = [e for val, e in eigs if val >= -tol * rad]
    zero = [e for val, e in eigs if abs(val) <= tol * rad]
    n = action.dim_v
    v_nn = np.concatenate(nn, axis=1) if nn else np.zeros((n, 0))
    v0 = np.concatenate(zero, axis=1) if zero else np.zeros((n, 0))
    m = split.g_ops.shape[0]
    if m:
        ad = split.ad_matrix(bop)
        alam, avecs = np.linalg.eigh((ad + ad.T) / 2)
        arad = max(1.0, float(np.abs(alam).max()))
        ad_eigs = _merge_eigs(alam, avecs, tol * arad)
    else:
        ad_eigs = []
    z = tol * max(1.0, max((abs(v) for v, _ in ad_eigs), default=1.0))

    def rows(pred):
        blocks = [e.T for val, e in ad_eigs if pred(val)]
        return np.concatenate(blocks, axis=0) if blocks else np.zeros((0, m))

    g_beta = rows(lambda x: abs(x) <= z)
    u_beta = rows(lambda x: x > z)
    u_beta_t = rows(lambda x: x < -z)
    beta_g = np.concatenate([np.zeros(split.dim_k), b])
    nb = float(np.linalg.norm(beta_g))
    if g_beta.shape[0] and nb > 0:
        hb = g_beta - np.outer(g_beta @ beta_g, beta_g) / nb**2
        h_beta = _orth(hb.T).T
    else:
        h_beta = g_beta.copy()
    # h_β ∩ p: ad(β)-kernel in p, orthogonal to β
    dp = split.dim_p
    if dp:
        comm = np.array([(bop @ x - x @ bop).ravel() for x in split.p_ops]).T
        _, s, vt = np.linalg.svd(comm)
        rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
        ker = vt[rank:]
        if nb > 0 and ker.shape[0]:
            ker = ker - np.outer(ker @ b, b) / nb**2
        h_beta_p = _orth(ker.T).T if ker.shape[0] else np.zeros((0, dp))
    else:
        h_beta_p = np.zeros((0, 0))
    return BetaAdapted(action, b, bop, bp, eigs, v_nn, v0, ad_eigs, g_beta, u_beta, u_beta_t, h_beta, h_beta_p, tol)


def project_p_beta(v, adapted: BetaAdapted, tol: float = 1e-8) -> np.ndarray:
    """Orthogonal projection ``V^{≥0} → V⁰``, i.e. ``lim exp(-tβ⁺)·v``."""
    v = np.asarray(v, dtype=float)
    nn = adapted.v_nn
    off = v - nn @ (nn.T @ v)
    if np.linalg.norm(off) > tol * max(1.0, np.linalg.norm(v)):
        raise ProjectionError(f"v has a component {np.linalg.norm(off):.2e} in negative β⁺-eigenspaces")
    return adapted.v0 @ (adapted.v0.T @ v)


def p_beta_by_flow(v, adapted: BetaAdapted, t: float, tol: float = 1e-8) -> np.ndarray:
    """``exp(-tβ⁺)·v`` for finite ``t`` and ``v ∈ V^{≥0}``.

    Evaluated blockwise on the nonnegative ``β⁺``-eigenspaces; round-off
    outside ``V^{≥0}`` would grow like ``exp(t·|λ|)`` and swamp the result.
    """
    v = np.asarray(v, dtype=float)
    nn = adapted.v_nn
    if np.linalg.norm(v - nn @ (nn.T @ v)) > tol * max(1.0, np.linalg.norm(v)):
        raise ProjectionError("exp(-tβ⁺)·v diverges: v is not in V^{≥0}")
    rad = max(1.0, max((abs(lam) for lam, _ in adapted.eigs_v), default=1.0))
    out = np.zeros_like(v)
    for lam, e in adapted.eigs_v:
        if lam >= -adapted.tol * rad:
            out += np.exp(-t * max(lam, 0.0)) * (e @ (e.T @ v))
    return out


@dataclass
class StratumLabel:
    """Label of a stratum: spectrum of its ``β`` plus norm.

    With ``canonical`` the spectrum is sorted (a ``K``-conjugation invariant).
    Otherwise it is the diagonal of ``β`` in the torus frame order, which
    keeps ``β`` and ``-β`` apart when ``K`` is trivial.
    """

    spectrum: tuple[float, ...]
    norm: float
    representative: np.ndarray
    beta: np.ndarray | None = None  # p coordinates of a representative β
    canonical: bool = True
    converged: bool = True
    residual: float = 0.0
    active_set: tuple[int, ...] = ()

    def distance(self, other: "StratumLabel") -> float:
        if len(self.spectrum) != len(other.spectrum):
            return float("inf")
        return float(np.max(np.abs(np.subtract(self.spectrum, other.spectrum)), initial=0.0))

    def matches(self, other: "StratumLabel", tol: float = LABEL_TOL) -> bool:
        return self.distance(other) < tol

    def as_dict(self) -> dict:
        return {
            "spectrum": [float(x) for x in self.spectrum],
            "norm": float(self.norm),
            "canonical": self.canonical,
            "converged": self.converged,
            "residual": float(self.residual),
        }


def _realized(beta_op_coords: np.ndarray, action: LinearAction) -> np.ndarray | None:
    """``β`` as a matrix of the underlying linear group, when the action records one."""
    real = getattr(action, "realization", None)
    if real is None or action.split.dim_p == 0:
        return None
    gen_coef = beta_op_coords @ action.split.p_coef
    mat = np.tensordot(gen_coef, real, axes=1)
    return (mat + mat.T) / 2


def default_canonical(action: LinearAction) -> bool:
    return action.split.dim_k > 0


def make_label(beta, action: LinearAction, canonical: bool | None = None, frame: TorusFrame | None = None, **extra) -> StratumLabel:
    """Label of ``β`` (p coordinates).

    The spectrum is that of ``β`` in the underlying matrix group when the
    action carries a ``realization`` (e.g. conjugation or bracket actions),
    otherwise that of ``β`` acting on ``V``.
    """
    b = np.asarray(beta, dtype=float)
    canonical = default_canonical(action) if canonical is None else canonical
    nrm = float(np.linalg.norm(b))
    if canonical:
        mat = _realized(b, action)
        if mat is None:
            mat = action.split.p_element(b)
        spec = np.sort(np.linalg.eigvalsh(mat))
        rep = np.diag(spec)
    else:
        frame = frame or maximal_torus(action.split)
        bop = action.split.p_element(b)
        spec = np.diag(frame.v_basis.T @ bop @ frame.v_basis)
        rep = frame.v_basis.T @ bop @ frame.v_basis
    spec = np.where(np.abs(spec) < 1e-13, 0.0, spec)
    return StratumLabel(tuple(float(x) for x in spec), nrm, rep, b.copy(), canonical, **extra)


@dataclass
class CandidateSet:
    labels: list[StratumLabel]
    unconfirmed: list[tuple[tuple[int, ...], np.ndarray]]
    realized: list[bool] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def find(self, label: StratumLabel, tol: float = 1e-6) -> int | None:
        for i, c in enumerate(self.labels):
            if c.distance(label) < tol:
                return i
        return None


def candidate_labels(
    frame: TorusFrame,
    action: LinearAction,
    cap: int = ENUMERATION_CAP,
    canonical: bool | None = None,
    check_realized: bool = True,
    seed: int = 0,
    subsets: list[tuple[int, ...]] | None = None,
) -> CandidateSet:
    """Least-norm points ``β_I`` of hulls of distinct-weight subsets that satisfy
    ``<β_I, α_i> = |β_I|^2`` on all of ``I``.

    Each surviving ``β`` is flagged ``realized`` when a random vector of its
    ``V⁰`` is ``H_β``-semistable, i.e. when its stratum is nonempty.
    ``subsets`` (indices into the distinct weights) replaces the enumeration.
    """
    reps, _ = frame.distinct_weights()
    d = len(reps)
    if subsets is None:
        if d > cap:
            raise EnumerationCapError(f"{d} distinct weights exceed the enumeration cap {cap}")
        subsets = [tuple(j for j in range(d) if mask >> j & 1) for mask in range(1, 2**d)]
    split = action.split
    labels: list[StratumLabel] = []
    unconfirmed = []
    for sub in subsets:
        sub = list(sub)
        if not sub:
            continue
        pts = reps[sub]
        cert = min_norm_point(pts)
        beta_t = cert.point
        nb2 = float(beta_t @ beta_t)
        scale = max(1.0, float(np.abs(pts).max(initial=0.0)) ** 2)
        ok = np.all(np.abs(pts @ beta_t - nb2) < 1e-9 * scale) if frame.rank else True
        beta_p = beta_t @ frame.torus_coef if frame.rank else np.zeros(split.dim_p)
        if not ok:
            unconfirmed.append((tuple(sub), beta_p))
            continue
        lab = make_label(beta_p, action, canonical, frame, active_set=tuple(sub))
        if not any(lab.matches(o) for o in labels):
            labels.append(lab)
    labels.sort(key=lambda lab: (round(lab.norm, 9), lab.spectrum))
    out = CandidateSet(labels, unconfirmed)
    if check_realized:
        rng = np.random.default_rng(seed)
        for lab in labels:
            ad = beta_adapted(lab.beta, action)
            if ad.v0.shape[1] == 0:
                out.realized.append(False)
                continue
            v0 = ad.v0 @ rng.normal(size=ad.v0.shape[1])
            out.realized.append(bool(is_semistable_for_hbeta(v0, ad, action)))
    return out


def stratum_label(v, action: LinearAction, opts: FlowOptions | None = None, canonical: bool | None = None, **kw):
    """Run the energy flow from ``v`` and label the limit by ``β = m(limit)``."""
    opts = opts or FlowOptions(**({"keep_trajectory": False} | kw))
    fr = flow(v, action, opts)
    beta = moment_coords(fr.limit, action)
    lab = make_label(beta, action, canonical, converged=fr.converged, residual=fr.gradient_residual)
    return lab, fr


PROBE_SIZE = 1e-10
PROBE_SUSPECT = 1e-2


@dataclass
class DescentResult:
    vector: np.ndarray
    status: str  # "semistable", "null" or "stalled"
    moment_norm: float
    log_scale: float  # log(|g·v| / |v|)
    iterations: int
    group_element: np.ndarray | None = None
    noise_limited: bool = False
    probe_scale: float | None = None  # log limit scale after the round-off probe

    @property
    def semistable(self) -> bool:
        return self.status == "semistable"


def _line_min(d: np.ndarray, logw: np.ndarray, s_max: float) -> float:
    """Minimize the convex ``φ(s) = Σ exp(logw_k - 2 s d_k)`` on ``[0, s_max]`` by safeguarded Newton."""
    lo, hi = 0.0, s_max

    def deriv(s):
        z = logw - 2 * s * d
        e = np.exp(z - z.max())
        return -2 * (d @ e), 4 * ((d * d) @ e)

    if deriv(hi)[0] <= 0:
        return hi
    s = min(hi, 1.0 / max(1e-300, np.abs(d).max()))
    for _ in range(200):
        g1, g2 = deriv(s)
        if g1 > 0:
            hi = s
        else:
            lo = s
        if g1 == 0:
            break
        nxt = s - g1 / g2 if g2 > 0 else (lo + hi) / 2
        if abs(nxt - s) <= 1e-14 * max(1.0, s):
            s = min(max(nxt, lo), hi)
            break
        if not lo < nxt < hi:
            nxt = (lo + hi) / 2
        s = nxt
    return s


def minimal_vector_descent(
    v,
    action: LinearAction,
    p_ops: np.ndarray | None = None,
    tol: float = 1e-10,
    floor: float = 1e-12,
    max_iter: int = 20_000,
    s_max: float = 1e6,
    track_group: bool = False,
    probe: float = PROBE_SIZE,
    suspect: float = PROBE_SUSPECT,
) -> DescentResult:
    """Descend ``|g·v|`` along ``v ← exp(-s·A)·v`` with exact line search in ``s``.

    Each step tries ``A = m(v)`` (steepest descent) and the Newton direction
    of ``log|exp(A)·v|²`` and keeps the one with the lower norm.

    ``p_ops`` (an orthonormal family of symmetric operators) replaces ``p``,
    e.g. by ``h_β ∩ p`` on ``V⁰``.  Status ``semistable`` when ``|m| < tol``,
    ``null`` when ``|g·v| < floor·|v|``.

    A vector within round-off ``δ`` of the null cone has a closed orbit of
    relative size about ``δ^(1/d)`` in its closure (``d`` an invariant
    degree), far above ``floor``.  So a semistable limit with
    ``|g·v| < suspect·|v|`` is re-derived from ``v`` plus a random
    perturbation of relative size ``probe``; if the limit norm moves by more
    than half, it is noise-dominated and the status becomes ``null``
    (``noise_limited`` set).  ``probe=0`` disables the check.
    """
    res = _descend(v, action, p_ops, tol, floor, max_iter, s_max, track_group)
    if res.status != "semistable" or probe <= 0 or res.log_scale >= np.log(suspect):
        return res
    v = np.asarray(v, dtype=float).ravel()
    pert = np.random.default_rng(0).normal(size=v.size)
    pert *= probe * np.linalg.norm(v) / np.linalg.norm(pert)
    alt = _descend(v + pert, action, p_ops, tol, floor, max_iter, s_max, False)
    r, r_alt = np.exp(res.log_scale), np.exp(alt.log_scale) if alt.status == "semistable" else 0.0
    res.probe_scale = float(np.log(r_alt)) if r_alt > 0 else -np.inf
    if abs(r_alt - r) > 0.5 * r:
        res.status = "null"
        res.noise_limited = True
    return res


def _exp_step(x: np.ndarray, op: np.ndarray, s_max: float):
    """Exact line search for ``|exp(-s·op) x|`` over ``s ≥ 0``; returns ``(Δlog|x|, x_new, s, eigvals, eigvecs)``."""
    d, u = np.linalg.eigh((op + op.T) / 2)
    y = u.T @ x
    # round-off components would otherwise be amplified without bound
    y = np.where(np.abs(y) > 1e-15, y, 0.0)
    live = y != 0
    s = _line_min(d[live], 2 * np.log(np.abs(y[live])), s_max)
    if s <= 0:
        return None
    with np.errstate(divide="ignore"):
        z = np.log(np.abs(y)) - s * d
    zmax = float(z.max())
    y = np.sign(y) * np.exp(z - zmax)
    nrm = float(np.linalg.norm(y))
    return zmax + np.log(nrm), u @ (y / nrm), s, d, u


def _descend(v, action, p_ops, tol, floor, max_iter, s_max, track_group) -> DescentResult:
    v = np.asarray(v, dtype=float).ravel()
    if not np.any(v):
        raise ValueError("descent needs a nonzero vector")
    ops = action.split.p_ops if p_ops is None else np.asarray(p_ops, dtype=float)
    x = v / np.linalg.norm(v)
    log_scale = 0.0
    log_floor = np.log(floor)
    g = np.eye(v.size) if track_group else None
    it = 0
    c = np.zeros(ops.shape[0])
    status = "stalled"
    while it < max_iter:
        c = (ops @ x) @ x if ops.shape[0] else np.zeros(0)
        cn = float(np.linalg.norm(c))
        if cn < tol:
            status = "semistable"
            break
        if log_scale < log_floor:
            status = "null"
            break
        # steepest direction m(x) and the Newton direction H⁺m(x), H = Gram of the P_j x
        px = ops @ x
        dirs = [c, np.linalg.lstsq(px @ px.T, c, rcond=1e-12)[0]]
        best = None
        for coef in dirs:
            step = _exp_step(x, np.tensordot(coef, ops, axes=1), s_max)
            if step is not None and (best is None or step[0] < best[0]):
                best = step
        if best is None:
            break
        dlog, x, s, d, u = best
        log_scale += dlog
        if g is not None:
            g = (u * np.exp(-s * d)) @ u.T @ g
        it += 1
    return DescentResult(np.exp(log_scale) * np.linalg.norm(v) * x, status, float(np.linalg.norm(c)), log_scale, it, g)


def is_semistable_for_hbeta(v0, adapted: BetaAdapted, action: LinearAction, tol: float = 1e-8) -> bool:
    """``v0 ∈ V⁰`` is semistable for ``H_β``: moment descent with ``h_β ∩ p`` on ``V⁰`` reaches ``m_{H_β} = 0``."""
    v0 = np.asarray(v0, dtype=float)
    if not np.any(v0) or adapted.v0.shape[1] == 0:
        return False
    y = adapted.v0.T @ v0
    if np.linalg.norm(adapted.v0 @ y - v0) > tol * np.linalg.norm(v0):
        raise ProjectionError("v0 is not in V⁰")
    if np.linalg.norm(y) < 1e-14 * np.linalg.norm(v0):
        return False
    res = minimal_vector_descent(y, action, adapted.h_beta_p_ops())
    if res.status == "stalled":
        raise RuntimeError(f"H_β descent did not settle (|m| = {res.moment_norm:.2e})")
    return res.semistable


@dataclass
class MembershipReport:
    member: bool
    flow_label: StratumLabel
    algebraic: bool | None
    discrepancy: bool

    def __bool__(self) -> bool:
        return self.member


def membership_in_stratum(v, label: StratumLabel, action: LinearAction, opts: FlowOptions | None = None) -> MembershipReport:
    """Flow label equals ``label``; for ``v ∈ V^{≥0}_β`` also the criterion ``p_β(v)`` semistable."""
    lab, _ = stratum_label(v, action, opts, canonical=label.canonical)
    member = lab.matches(label, 1e-6)
    algebraic = None
    if label.beta is not None:
        ad = beta_adapted(label.beta, action)
        try:
            pv = project_p_beta(v, ad)
        except ProjectionError:
            pv = None
        if pv is not None:
            algebraic = bool(np.any(pv)) and is_semistable_for_hbeta(pv, ad, action)
    return MembershipReport(member, lab, algebraic, algebraic is not None and algebraic != member)


@dataclass
class EstimateReport:
    energy: float  # |m(v)|^2
    pairing: float  # <m(v), β>
    beta_norm2: float
    equality: bool
    equality_expected: bool
    ok: bool


def estimate_check(v, adapted: BetaAdapted, tol: float = 1e-8) -> EstimateReport:
    """``|m(v)|² ≥ <m(v), β> ≥ |β|²`` on ``V^{≥0}``, with equality iff ``v ∈ V⁰`` and ``m(v) = β``."""
    v = np.asarray(v, dtype=float)
    nn = adapted.v_nn
    if np.linalg.norm(v - nn @ (nn.T @ v)) > tol * np.linalg.norm(v):
        raise ProjectionError("v is not in V^{≥0}")
    mv = moment(v, adapted.action)
    pair = float(mv.p_coords @ adapted.beta)
    b2 = adapted.norm2
    if mv.energy < pair - tol or pair < b2 - tol:
        raise EstimateViolation(f"estimate violated: {mv.energy:.12g} >= {pair:.12g} >= {b2:.12g} fails")
    equality = abs(mv.energy - b2) < tol
    in_v0 = np.linalg.norm(v - adapted.v0 @ (adapted.v0.T @ v)) < np.sqrt(tol) * np.linalg.norm(v)
    expected = bool(in_v0 and np.linalg.norm(mv.p_coords - adapted.beta) < np.sqrt(tol))
    return EstimateReport(mv.energy, pair, b2, bool(equality), expected, bool(equality) == expected)


@dataclass
class QBetaResult:
    classification: str  # "G_beta", "Q_beta", "not_Q" or "undetermined"
    limit: np.ndarray | None
    growth_exponent: float
    log_norms: np.ndarray

    def __str__(self) -> str:
        return self.classification


T_SCHEDULE = 2.0 ** np.arange(0, 11)


def q_beta_membership(g: np.ndarray, beta, action: LinearAction, schedule=T_SCHEDULE, tol: float = 1e-9) -> QBetaResult:
    """Classify ``g ∈ Gl(V)`` by the behaviour of ``exp(-tβ) g exp(tβ)`` along ``schedule``.

    Works in an eigenbasis of ``β``, where entry ``(i, j)`` is scaled by
    ``exp(-t(b_i - b_j))``; log-magnitudes avoid overflow.
    """
    bop = action.split.p_element(np.asarray(beta, dtype=float))
    b, u = np.linalg.eigh(bop)
    gh = u.T @ np.asarray(g, dtype=float) @ u
    gscale = np.linalg.norm(gh)
    gh = np.where(np.abs(gh) > 1e-12 * gscale, gh, 0.0)
    rate = -(b[:, None] - b[None, :])  # log-growth per unit t
    with np.errstate(divide="ignore"):
        logabs = np.log(np.abs(gh))
    lognorms = []
    for t in schedule:
        z = 2 * (logabs + t * rate)
        zmax = z[np.isfinite(z)].max()
        lognorms.append(0.5 * (zmax + np.log(np.sum(np.exp(z[np.isfinite(z)] - zmax)))))
    lognorms = np.array(lognorms)
    growth = (lognorms[-1] - lognorms[-2]) / (schedule[-1] - schedule[-2])
    rscale = max(1.0, float(np.abs(b).max()))
    active = gh != 0
    if lognorms[-1] - lognorms[0] > np.log(1e3):
        return QBetaResult("not_Q", None, float(growth), lognorms)
    if np.all(rate[active] <= tol * rscale):
        # converged: keep entries with zero rate
        keep = active & (np.abs(rate) <= tol * rscale)
        lim_h = np.where(keep, gh, 0.0)
        lim = u @ lim_h @ u.T
        cls = "G_beta" if np.all(keep == active) else "Q_beta"
        return QBetaResult(cls, lim, float(growth), lognorms)
    return QBetaResult("undetermined", None, float(growth), lognorms)


def group_element(action: LinearAction, factors) -> np.ndarray:
    """``Π exp(X_i)`` for ``X_i`` in ``g`` given by ``k ⊕ p`` coordinates."""
    n = action.dim_v
    g = np.eye(n)
    for x in factors:
        g = g @ expm(action.split.g_element(x))
    return g


@dataclass
class FlowDestabilizer:
    beta: np.ndarray
    limit_decay: float  # |exp(-Tβ)·v_C| at the last schedule time
    input_decay: float  # |exp(-Tβ)·v| / |v|
    destabilizes_input: bool
    flow: FlowResult


def flow_destabilizer(v, action: LinearAction, t_max: float = 50.0, opts: FlowOptions | None = None) -> FlowDestabilizer:
    """``β = m(v_C)`` from the flow limit and whether ``exp(-tβ)`` drives ``v`` (not only ``v_C``) to 0.

    ``exp(-tβ)·v_C = exp(-t|β|²)·v_C`` always decays for ``β ≠ 0``; decay of
    the input itself is reported per run, not guaranteed.
    """
    lab, fr = stratum_label(v, action, opts)
    beta = lab.beta
    bop = action.split.p_element(beta)
    e = expm(-t_max * bop)
    v = np.asarray(v, dtype=float)
    ld = float(np.linalg.norm(e @ fr.limit))
    idc = float(np.linalg.norm(e @ v) / np.linalg.norm(v))
    return FlowDestabilizer(beta, ld, idc, bool(idc < 1e-6) and lab.norm > 0, fr)


def stratum_samples(action: LinearAction, beta, count: int, rng: np.random.Generator, spread: float = 0.5) -> list[np.ndarray]:
    """Random vectors of the stratum of ``β``: ``exp(A)·w`` with ``w`` random in ``V^{≥0}``."""
    ad = beta_adapted(beta, action)
    split = action.split
    out = []
    m = split.g_ops.shape[0]
    for _ in range(count):
        w = ad.v_nn @ rng.normal(size=ad.v_nn.shape[1])
        if m:
            a = split.g_element(spread * rng.normal(size=m) / np.sqrt(m))
            w = expm(a) @ w
        out.append(w / np.linalg.norm(w))
    return out

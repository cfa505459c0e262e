"""Null space property certificates, structural checks and recovery bounds.

Four null space properties are handled, each for a measurement operator ``A``
and sparsity ``s``:

plain
    ``||v||_W < ||z - v||_W`` for every nonzero ``z`` in ``N(A)`` and every
    s-sparse ``v``.
stable
    ``||z_s||_W <= rho ||z - z_s||_W`` on ``N(A)`` with ``rho < 1``.
robust
    ``||z_s||_W <= rho ||z - z_s||_W + tau ||A z||_2`` on all of ``R^d``.
strong
    ``||z - v||_W - ||v||_W >= c ||z||_2`` on ``N(A)`` for every s-sparse ``v``.

Certificates are exact (``ExactEnumeration``) for the canonical basis, and
for the rank-one manifold when the null space has dimension at most three.
Everything else is a one-sided ``SampledBound`` that never claims
``holds=True``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, lsq_linear, minimize
from scipy.spatial import ConvexHull, QhullError

from .atoms import CanonicalBasis
from .errors import DimensionError
from .solvers import MeasurementOperator

__all__ = [
    "EXACT",
    "SAMPLED",
    "NspCertificate",
    "StructuralReport",
    "stable_rho",
    "check_plain_nsp",
    "robust_params",
    "strong_constant",
    "check_splittable",
    "check_s_even",
    "theoretical_bound",
    "min_measurement_bound",
    "unrestricted_ratio_witness",
]

EXACT = "ExactEnumeration"
SAMPLED = "SampledBound"
ENUM_LIMIT = 10**6
ZONOTOPE_LIMIT = 16  # at most 2**16 zonotope vertices handed to qhull
RANK_ONE_EXACT_DIM = 3
VIOLATION_TOL = 1e-8


@dataclass
class NspCertificate:
    """Outcome of certifying one null space property.

    ``holds`` is ``True``, ``False`` or ``None`` (unknown).  ``constants`` maps
    names (``rho``, ``tau``, ``c``) to floats; ``witness`` holds the extremal
    null-space vector ``z`` and, where meaningful, the support or the sparse
    vector ``v`` that achieves the reported constant.
    """

    kind: str
    s: int
    holds: bool | None
    constants: dict
    method: str
    witness: dict = field(default_factory=dict)
    seed: int | None = None
    limits: dict = field(default_factory=dict)
    notes: str = ""

    def to_dict(self):
        def conv(v):
            if isinstance(v, np.ndarray):
                return [float(x) for x in v.ravel()]
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            if isinstance(v, (list, tuple)):
                return [conv(x) for x in v]
            return v

        return {
            "kind": self.kind,
            "s": self.s,
            "method": self.method,
            "holds": self.holds,
            "constants": {k: conv(v) for k, v in self.constants.items()},
            "witness": {k: conv(v) for k, v in self.witness.items()},
            "seed": self.seed,
            "limits": dict(self.limits),
            "notes": self.notes,
        }


@dataclass
class StructuralReport:
    """Verdict on s-splittability or s-evenness.

    ``verdict`` is one of ``AnalyticTrue``, ``PassedSampling`` or
    ``Falsified``; a falsified report carries the violating signals and the
    size of the violation.
    """

    property: str
    s: int
    verdict: str
    counterexample: tuple | None = None
    violation: float = 0.0
    trials: int = 0
    notes: str = ""


def _operator(A):
    return A if isinstance(A, MeasurementOperator) else MeasurementOperator(A)


def _trivial(kind, s, name, value):
    return NspCertificate(kind, s, True, {name: value}, EXACT, notes="trivial null space")


# ---------------------------------------------------------------- sphere search


def _fibonacci_sphere(n):
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = np.pi * (1 + 5**0.5) * i
    return np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])


def _sphere_points(k, n, rng=None):
    """Deterministic covering of the unit sphere of R^k (up to sign) for k <= 3."""
    if k == 1:
        return np.ones((1, 1))
    if k == 2:
        th = np.linspace(0.0, np.pi, n, endpoint=False)
        return np.column_stack([np.cos(th), np.sin(th)])
    if k == 3:
        return _fibonacci_sphere(n)
    g = rng.standard_normal((n, k))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _sphere_max(f_batch, k, *, grid, refine, rng):
    """Maximise a scale-invariant function over the unit sphere of R^k.

    ``f_batch`` maps an ``(n, k)`` array of directions to ``n`` values.  The best
    grid points are refined with Nelder-Mead.  Returns ``(value, direction)``.
    """
    pts = _sphere_points(k, grid, rng)
    vals = f_batch(pts)
    best = int(np.argmax(vals))
    if k == 1 or not np.isfinite(vals[best]):
        return float(vals[best]), pts[best]
    bv, ba = float(vals[best]), pts[best]

    def neg(a):
        n = np.linalg.norm(a)
        if n == 0:
            return np.inf
        v = f_batch((a / n)[None, :])[0]
        return -v if np.isfinite(v) else -1e300

    for idx in np.argsort(-vals, kind="stable")[:refine]:
        res = minimize(neg, pts[idx], method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 400 * k})
        a = res.x / np.linalg.norm(res.x)
        v = f_batch(a[None, :])[0]
        if v > bv:
            bv, ba = float(v), a
    return bv, ba


def _batched_sv(B, shape, a):
    Z = (a @ B.T).reshape((-1,) + tuple(shape))
    return np.linalg.svd(Z, compute_uv=False)


# ---------------------------------------------------------------- stable rho


def _canonical_ratio(z, s):
    a = np.sort(np.abs(z))[::-1]
    head, tl = a[:s].sum(), a[s:].sum()
    if tl <= 1e-12 * max(head, 1e-300):
        return math.inf
    return head / tl


def _canonical_rho(B, s, stop_above, enum_limit):
    d, k = B.shape
    n_lp = math.comb(d, s) * 2 ** (s - 1)
    if n_lp > enum_limit:
        return None
    best = (-1.0, None, None)
    for T in itertools.combinations(range(d), s):
        T = list(T)
        Tc = [i for i in range(d) if i not in T]
        BT, BTc = B[T], B[Tc]
        if np.linalg.matrix_rank(BTc, tol=1e-10) < k:
            # a null vector vanishes off T: the tail is zero
            _, _, vt = np.linalg.svd(BTc) if BTc.size else (None, None, np.eye(k))
            a = vt[-1]
            return math.inf, B @ a, T
        nt = d - s
        for signs in itertools.product([1.0, -1.0], repeat=s - 1):
            sig = np.array((1.0,) + signs)
            c = np.concatenate([-(sig @ BT), np.zeros(nt)])
            A_ub = np.block([[BTc, -np.eye(nt)], [-BTc, -np.eye(nt)], [np.zeros((1, k)), np.ones((1, nt))]])
            b_ub = np.concatenate([np.zeros(2 * nt), [1.0]])
            res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * k + [(0, None)] * nt,
                          method="highs")
            if res.status != 0:
                continue
            z = B @ res.x[:k]
            val = _canonical_ratio(z, s)
            if val > best[0]:
                best = (val, z, T)
            if stop_above is not None and best[0] >= stop_above:
                return best
    return best


def stable_rho(aset, A, s, *, enum_limit=ENUM_LIMIT, samples=10_000, starts=32, seed=0,
               stop_above=None):
    """Smallest ``rho`` with ``||z_s||_W <= rho ||z - z_s||_W`` on ``N(A)``.

    Returns an ``NspCertificate`` of kind ``stable`` whose ``holds`` field says
    whether ``rho < 1``.  ``stop_above`` lets the canonical enumeration quit as
    soon as the running maximum reaches that value (the certificate is still a
    valid falsification).
    """
    A = _operator(A)
    if A.d != aset.ambient_dim:
        raise DimensionError("operator and atomic set disagree on the ambient dimension")
    aset._check_s(s)
    B = A.null_basis
    k = B.shape[1]
    limits = {"enum_limit": enum_limit, "samples": samples, "starts": starts}
    if k == 0:
        return _trivial("stable", s, "rho", 0.0)
    rng = np.random.default_rng(seed)

    if aset.kind == "canonical":
        out = _canonical_rho(B, s, stop_above, enum_limit)
        if out is not None:
            rho, z, T = out
            return NspCertificate("stable", s, bool(rho < 1), {"rho": float(rho)}, EXACT,
                                  {"z": z / np.linalg.norm(z), "support": list(T)}, seed, limits)

    if aset.kind == "rank_one":
        shape = aset.shape

        def ratio(a):
            sv = _batched_sv(B, shape, a)
            head, tl = sv[:, :s].sum(axis=1), sv[:, s:].sum(axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(tl <= 1e-12 * np.maximum(head, 1e-300), np.inf, head / tl)
            return r

        exact = k <= RANK_ONE_EXACT_DIM
        grid = {1: 1, 2: 20_000, 3: 40_000}.get(k, samples)
        rho, a = _sphere_max(ratio, k, grid=grid, refine=8 if exact else starts, rng=rng)
        z = B @ a
        holds = bool(rho < 1) if exact else (False if rho >= 1 else None)
        return NspCertificate("stable", s, holds, {"rho": float(rho)}, EXACT if exact else SAMPLED,
                              {"z": z}, seed, limits,
                              notes="" if exact else "lower bound on rho from multistart search")

    # frames, or canonical beyond the enumeration limit: sampled lower bound
    def ratio_one(z):
        t = aset.tail(z, s)
        head = aset.norm(t.approx)
        return math.inf if t.value <= 1e-12 * max(head, 1e-300) else head / t.value

    best, bz = -1.0, None
    g = rng.standard_normal((samples, k))
    for a in g:
        z = B @ (a / np.linalg.norm(a))
        r = ratio_one(z)
        if r > best:
            best, bz = r, z
        if stop_above is not None and best >= stop_above:
            break
    holds = False if best >= 1 else None
    return NspCertificate("stable", s, holds, {"rho": float(best)}, SAMPLED, {"z": bz}, seed, limits,
                          notes="lower bound on rho from random null-space directions")


# ---------------------------------------------------------------- strong constant


def _canonical_strong_T(B, T, sig):
    """``min over unit a`` of ``||z_Tc||_1 - sig . z_T`` with ``z = B a``.

    The objective is the support function of the zonotope
    ``Q = -B_T^T sig + B_Tc^T [-1, 1]^(d-s)``; its minimum over the sphere is the
    signed distance from the origin to the boundary of ``Q``.
    """
    d, k = B.shape
    Tc = [i for i in range(d) if i not in T]
    p0 = -(sig @ B[T])
    G = B[Tc].T
    if k == 1:
        hi = p0[0] + np.abs(G).sum()
        lo = p0[0] - np.abs(G).sum()
        return (hi, np.ones(1)) if hi <= -lo else (-lo, -np.ones(1))
    res = lsq_linear(G, -p0, bounds=(-1.0, 1.0), method="bvls", tol=1e-14)
    p = G @ res.x + p0
    dist = np.linalg.norm(p)
    if dist > 1e-12:
        return -dist, -p / dist
    r = np.linalg.matrix_rank(G, tol=1e-10)
    if r < k:
        _, _, vt = np.linalg.svd(G.T)
        return 0.0, vt[-1]
    if len(Tc) > ZONOTOPE_LIMIT:
        return None
    cube = np.array(list(itertools.product([-1.0, 1.0], repeat=len(Tc))))
    pts = p0 + cube @ G.T
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return None
    offs = -hull.equations[:, -1]
    j = int(np.argmin(offs))
    return float(offs[j]), hull.equations[j, :-1]


def _strong_value_canonical(z, s):
    a = np.sort(np.abs(z))[::-1]
    return a[s:].sum() - a[:s].sum()


def _strong_value_rank_one(sv, s):
    return sv[..., s:].sum(axis=-1) - sv[..., :s].sum(axis=-1)


def _frame_strong_inner(aset, z, s, rng, n_scales=41):
    """Upper bound on ``min over v in Sigma_s of ||z - v|| - ||v||`` for a frame."""
    best, bv = math.inf, None
    t = aset.tail(z, s)
    cands = [t.approx * c for c in np.linspace(0.0, 3.0, n_scales)]
    F = aset.atoms
    if s == 1:
        for j in range(aset.n_atoms):
            proj = z @ F[:, j] / (F[:, j] @ F[:, j])
            for c in np.linspace(-2.0, 2.0, n_scales) * max(abs(proj), 1.0):
                cands.append(c * F[:, j])
            cands.append(proj * F[:, j])
    else:
        for _ in range(20):
            idx = rng.choice(aset.n_atoms, size=s, replace=False)
            coef, *_ = np.linalg.lstsq(F[:, idx], z, rcond=None)
            cands.append(F[:, idx] @ coef)
    for v in cands:
        val = aset.norm(z - v) - aset.norm(v)
        if val < best:
            best, bv = val, v
    return best, bv


def strong_constant(aset, A, s, *, enum_limit=ENUM_LIMIT, samples=10_000, starts=32, seed=0):
    """Largest ``c`` with ``||z - v||_W - ||v||_W >= c ||z||_2`` on ``N(A)``.

    For the canonical basis and the rank-one manifold the minimum over ``v``
    is attained at the best s-term approximation, so ``c`` is the minimum over
    the unit sphere of ``N(A)`` of ``tail - head``.
    """
    A = _operator(A)
    if A.d != aset.ambient_dim:
        raise DimensionError("operator and atomic set disagree on the ambient dimension")
    aset._check_s(s)
    B = A.null_basis
    k = B.shape[1]
    limits = {"enum_limit": enum_limit, "samples": samples, "starts": starts}
    if k == 0:
        return _trivial("strong", s, "c", math.inf)
    rng = np.random.default_rng(seed)

    if aset.kind == "canonical":
        d = B.shape[0]
        ok = math.comb(d, s) * 2 ** (s - 1) <= enum_limit
        best = (math.inf, None, None)
        if ok:
            for T in itertools.combinations(range(d), s):
                for signs in itertools.product([1.0, -1.0], repeat=s - 1):
                    out = _canonical_strong_T(B, list(T), np.array((1.0,) + signs))
                    if out is None:
                        ok = False
                        break
                    if out[0] < best[0]:
                        best = (out[0], out[1], list(T))
                if not ok:
                    break
        if ok:
            z = B @ (best[1] / np.linalg.norm(best[1]))
            c = _strong_value_canonical(z, s)
            return NspCertificate("strong", s, bool(c > 1e-12), {"c": float(c)}, EXACT,
                                  {"z": z, "support": best[2]}, seed, limits)

        def f(a):
            return -np.array([_strong_value_canonical(B @ x, s) for x in a])

    elif aset.kind == "rank_one":
        def f(a):
            return -_strong_value_rank_one(_batched_sv(B, aset.shape, a), s)

        if k == 1:
            z = B[:, 0]
            c = float(-f(np.ones((1, 1)))[0])
            return NspCertificate("strong", s, bool(c > 1e-12), {"c": c}, EXACT, {"z": z}, seed, limits)
    else:
        best, bz, bv = math.inf, None, None
        for a in rng.standard_normal((samples, k)):
            z = B @ (a / np.linalg.norm(a))
            val, v = _frame_strong_inner(aset, z, s, rng)
            if val < best:
                best, bz, bv = val, z, v
        holds = False if best <= 0 else None
        return NspCertificate("strong", s, holds, {"c": float(best)}, SAMPLED, {"z": bz, "v": bv},
                              seed, limits, notes="upper bound on c from two-level sampling")

    grid = {2: 20_000, 3: 40_000}.get(k, samples)
    neg_c, a = _sphere_max(f, k, grid=grid, refine=starts, rng=rng)
    z = B @ a
    c = -neg_c
    holds = False if c <= 0 else None
    return NspCertificate("strong", s, holds, {"c": float(c)}, SAMPLED, {"z": z}, seed, limits,
                          notes="upper bound on c from multistart search")


# ---------------------------------------------------------------- plain NSP


def check_plain_nsp(aset, A, s, **kwargs):
    """Certify ``||v||_W < ||z - v||_W`` for nonzero null vectors and s-sparse v.

    The witness of a failure contains ``z`` in ``N(A)`` and ``v`` with
    ``||v||_W >= ||z - v||_W``, so ``-v`` is not the unique recovery of itself.
    """
    A = _operator(A)
    if A.null_dim == 0:
        aset._check_s(s)
        return _trivial("plain", s, "rho", 0.0)
    if aset.kind in ("canonical", "rank_one"):
        cert = stable_rho(aset, A, s, stop_above=1.0, **kwargs)
        z = cert.witness["z"]
        wit = {"z": z}
        if z is not None:
            wit["v"] = aset.assemble(aset.best_s_approx(z, s)).ravel()
            wit["support"] = cert.witness.get("support")
        return NspCertificate("plain", s, cert.holds, cert.constants, cert.method, wit, cert.seed,
                              cert.limits, cert.notes)
    cert = strong_constant(aset, A, s, **kwargs)
    holds = False if cert.constants["c"] <= 1e-12 else None
    return NspCertificate("plain", s, holds, {"min_gap": cert.constants["c"]},
                          EXACT if holds is False else SAMPLED, cert.witness, cert.seed, cert.limits,
                          "falsified by an explicit pair" if holds is False else "no violation found by sampling")


# ---------------------------------------------------------------- robust NSP


def _robust_dual(A, T, sig, rho):
    """``min ||lam||_2  s.t. (A^T lam)_T = sig, |(A^T lam)_Tc| <= rho``.

    Any feasible ``lam`` bounds ``sig . z_T - rho ||z_Tc||_1 <= ||lam|| ||A z||``
    for every ``z``, so the optimum is the exact robust constant for this
    support and sign pattern.  Returns ``(value, lam)`` or ``(inf, None)``.
    """
    M = A.matrix
    d = M.shape[1]
    Tc = [i for i in range(d) if i not in T]
    G_T, G_Tc = M[:, T].T, M[:, Tc].T
    lam0, *_ = np.linalg.lstsq(G_T, sig, rcond=None)
    if np.linalg.norm(G_T @ lam0 - sig) > 1e-9:
        return math.inf, None
    cons = [{"type": "eq", "fun": lambda l: G_T @ l - sig, "jac": lambda l: G_T}]
    if Tc:
        cons.append({"type": "ineq", "fun": lambda l: rho - G_Tc @ l, "jac": lambda l: -G_Tc})
        cons.append({"type": "ineq", "fun": lambda l: rho + G_Tc @ l, "jac": lambda l: G_Tc})
    res = minimize(lambda l: 0.5 * l @ l, lam0, jac=lambda l: l, constraints=cons, method="SLSQP",
                   options={"ftol": 1e-15, "maxiter": 1000})
    lam = res.x
    # restore the equality exactly, then verify the box
    corr, *_ = np.linalg.lstsq(G_T, sig - G_T @ lam, rcond=None)
    lam = lam + corr
    if Tc and np.max(np.abs(G_Tc @ lam)) > rho * (1 + 1e-9) + 1e-12:
        # no feasible multiplier: a direction exists with positive numerator and A z = 0
        return math.inf, None
    return float(np.linalg.norm(lam)), lam


def robust_params(aset, A, s, rho_target, *, method="auto", samples=10_000, starts=32, seed=0,
                  enum_limit=ENUM_LIMIT):
    """Constant ``tau`` of the robust null space property at a fixed ``rho``.

    ``method="auto"`` uses the exact dual program for the canonical basis when
    the support enumeration is small, and sampling otherwise.  The sampled
    estimate is a lower bound on ``tau``.
    """
    if not 0 < rho_target < 1:
        raise ValueError("rho_target must lie in (0, 1)")
    A = _operator(A)
    aset._check_s(s)
    limits = {"samples": samples, "starts": starts, "enum_limit": enum_limit}
    d = A.d
    if method not in ("auto", "exact", "sampled"):
        raise ValueError(f"unknown method {method!r}")
    exact_ok = aset.kind == "canonical" and math.comb(d, s) * 2 ** (s - 1) <= enum_limit
    if method == "exact" and not exact_ok:
        raise ValueError("exact robust constants are available for the canonical basis only")
    if method in ("auto", "exact") and exact_ok:
        best, lam_best, Tb = 0.0, None, None
        for T in itertools.combinations(range(d), s):
            for signs in itertools.product([1.0, -1.0], repeat=s - 1):
                sig = np.array((1.0,) + signs)
                val, lam = _robust_dual(A, list(T), sig, rho_target)
                if val > best:
                    best, lam_best, Tb = val, lam, list(T)
                if math.isinf(best):
                    break
            if math.isinf(best):
                break
        return NspCertificate("robust", s, bool(np.isfinite(best)), {"rho": rho_target, "tau": best},
                              EXACT, {"lambda": lam_best, "support": Tb}, seed, limits,
                              notes="tau from the dual program; lambda certifies the bound")

    rng = np.random.default_rng(seed)
    M = A.matrix

    def score(z):
        t = aset.tail(z, s)
        num = aset.norm(t.approx) - rho_target * t.value
        if num <= 0:
            return 0.0
        den = np.linalg.norm(M @ z.ravel())
        return math.inf if den <= 1e-14 * np.linalg.norm(z) else num / den

    pts = rng.standard_normal((samples, d))
    B = A.null_basis
    if B.shape[1]:
        # directions close to the null space carry the largest ratios
        half = samples // 2
        a = rng.standard_normal((half, B.shape[1])) @ B.T
        pts[:half] = a + 10.0 ** rng.uniform(-3, 0, size=(half, 1)) * pts[:half]
    vals = np.array([score(p.reshape(aset.shape)) for p in pts])
    order = np.argsort(-vals, kind="stable")
    best, bz = float(vals[order[0]]), pts[order[0]]
    if np.isfinite(best) and best > 0:
        for i in order[:starts]:
            res = minimize(lambda x: -score(x.reshape(aset.shape)), pts[i], method="Nelder-Mead",
                           options={"maxiter": 200 * d, "xatol": 1e-10, "fatol": 1e-12})
            if -res.fun > best:
                best, bz = float(-res.fun), res.x
    return NspCertificate("robust", s, None, {"rho": rho_target, "tau": best}, SAMPLED,
                          {"z": bz / np.linalg.norm(bz)}, seed, limits,
                          notes="lower bound on tau from sampling and local ascent")


# ---------------------------------------------------------------- structure


def _split_gap(aset, x, y, s):
    """``rhs - lhs`` of the splittability inequality; positive means a violation."""
    tx, ty = aset.tail(x, s), aset.tail(y, s)
    rhs = aset.norm(tx.approx) - aset.norm(ty.approx) + ty.value - tx.value
    return rhs - aset.norm(x + y)


def check_splittable(aset, s, trials=10_000, seed=0):
    """Check ``||x+y|| >= ||x_s|| - ||y_s|| + ||y-y_s|| - ||x-x_s||`` on random pairs.

    The canonical basis and the rank-one manifold are splittable for every
    ``s``; for them sampling only runs as a regression check.
    """
    aset._check_s(s)
    rng = np.random.default_rng(seed)
    worst, pair = -math.inf, None
    for i in range(trials):
        if i % 2 == 0:
            x = rng.standard_normal(aset.shape)
            y = rng.standard_normal(aset.shape)
        else:
            # near-sparse pairs probe the boundary between support choices
            x = aset.random_sparse(s, rng)[0] + 0.3 * rng.standard_normal(aset.shape)
            y = aset.random_sparse(s, rng)[0] * rng.uniform(0.1, 3) + 0.3 * rng.standard_normal(aset.shape)
        gap = _split_gap(aset, x, y, s)
        if gap > worst:
            worst, pair = gap, (x, y)
    if aset.kind in ("canonical", "rank_one"):
        note = "" if worst <= VIOLATION_TOL else f"sampling found a gap of {worst:.3g}; numerical issue"
        return StructuralReport("Splittable", s, "AnalyticTrue", None, max(worst, 0.0), trials, note)
    if worst > VIOLATION_TOL:
        return StructuralReport("Splittable", s, "Falsified", pair, worst, trials)
    return StructuralReport("Splittable", s, "PassedSampling", None, max(worst, 0.0), trials)


def check_s_even(aset, s, trials=1000, seed=0):
    """Check ``||sum_j c_j w_j||_W = sum_j |c_j|`` for s distinct atoms and signs."""
    aset._check_s(s)
    if aset.kind == "canonical":
        return StructuralReport("SEven", s, "AnalyticTrue", trials=0)
    if aset.kind == "frame":
        F = aset.atoms
        cert = stable_rho(CanonicalBasis(aset.n_atoms), MeasurementOperator(F), s, stop_above=1.0)
        if cert.method == EXACT and cert.holds:
            return StructuralReport("SEven", s, "AnalyticTrue", trials=0,
                                    notes="the frame matrix has the null space property of order s")
    rng = np.random.default_rng(seed)
    worst, ex = 0.0, None
    n_atoms = aset.n_atoms if aset.kind == "frame" else None
    for _ in range(trials):
        size = int(rng.integers(1, s + 1))
        signs = rng.choice([-1.0, 1.0], size=size)
        if aset.kind == "frame":
            idx = rng.choice(n_atoms, size=size, replace=False)
            z = aset.atoms[:, idx] @ signs
        else:
            U = rng.standard_normal((aset.n1, size))
            V = rng.standard_normal((aset.n2, size))
            U /= np.linalg.norm(U, axis=0)
            V /= np.linalg.norm(V, axis=0)
            z = (U * signs) @ V.T
        gap = size - aset.norm(z)
        if gap > worst:
            worst, ex = gap, (z, signs)
    if worst > VIOLATION_TOL:
        return StructuralReport("SEven", s, "Falsified", ex, worst, trials)
    return StructuralReport("SEven", s, "PassedSampling", None, worst, trials)


def unrestricted_ratio_witness(aset, A, s, rho=0.5, seed=0):
    """Show that ``||v|| <= rho ||z - v||`` over all sparse v fails for any rho < 1.

    Takes a null vector ``z`` and scales a single atom ``v`` until the ratio
    ``||v|| / ||z - v||`` exceeds ``rho``.  Returns ``(z, v, ratio)``.
    """
    A = _operator(A)
    if A.null_dim == 0:
        raise ValueError("the null space is trivial")
    z = A.null_basis[:, 0].reshape(aset.shape)
    rng = np.random.default_rng(seed)
    v0 = aset.random_sparse(1, rng)[0]
    v0 = v0 / aset.norm(v0)
    scale = 1.0
    while True:
        v = scale * v0
        r = aset.norm(v) / aset.norm(z - v)
        if r > rho:
            return z, v, r
        scale *= 2.0


# ---------------------------------------------------------------- bounds


def theoretical_bound(kind, aset, A, s, eps, sigma_tail, constants, loose_constant=False):
    """Right-hand side of the recovery error bound for one null space property.

    ``stable`` and ``robust`` bound ``||z_hat - z0||_W``; ``strong`` bounds
    ``||z_hat - z0||_2``.

    Parameters
    ----------
    kind : {"stable", "robust", "strong"}
    constants : dict or NspCertificate
        ``rho`` for stable, ``rho`` and ``tau`` for robust, ``c`` for strong.
        An optional ``nu`` overrides the operator's smallest nonzero singular
        value.
    loose_constant : bool
        Use ``sqrt(N)`` / ``sqrt(n1 n2)`` in place of the tight ``C_W``.

    Examples
    --------
    >>> theoretical_bound("robust", None, None, 1, 0.05, 0.1, {"rho": 0.5, "tau": 2.0})
    1.4
    """
    if isinstance(constants, NspCertificate):
        constants = constants.constants
    eps = float(eps)
    sigma_tail = float(sigma_tail)
    if eps < 0 or sigma_tail < 0:
        raise ValueError("eps and the tail must be nonnegative")

    def need(name):
        if name not in constants or constants[name] is None:
            raise ValueError(f"{kind} bound needs the constant {name!r}")
        return float(constants[name])

    def nu():
        if "nu" in constants:
            return float(constants["nu"])
        v = _operator(A).nu
        if not np.isfinite(v) or v <= 0:
            raise ValueError("the operator has no nonzero singular value")
        return float(v)

    def cw():
        return aset.loose_constant if loose_constant else aset.equivalence_constant()

    if kind == "stable":
        rho = need("rho")
        if not rho < 1:
            raise ValueError("the stable bound needs rho < 1")
        out = (2 + 2 * rho) / (1 - rho) * sigma_tail
        if eps > 0:
            out += 4 * cw() / ((1 - rho) * nu()) * eps
        return out
    if kind == "robust":
        rho, tau = need("rho"), need("tau")
        if not rho < 1:
            raise ValueError("the robust bound needs rho < 1")
        out = 2 * (1 + rho) / (1 - rho) * sigma_tail
        if eps > 0:
            out += 4 * tau / (1 - rho) * eps
        return out
    if kind == "strong":
        c = need("c")
        if not c > 0:
            raise ValueError("the strong bound needs c > 0")
        out = 2 / c * sigma_tail if sigma_tail > 0 else 0.0
        if eps > 0:
            out += 2 / nu() * (cw() / c + 1) * eps
        return out
    raise ValueError(f"unknown bound kind {kind!r}")


def min_measurement_bound(s, N):
    """Lower bound ``s ln(N / 2s) / (8 ln 3)`` on the measurements needed.

    Valid for ``s > 2`` and ``2s <= N``.
    """
    if not (int(s) == s and int(N) == N):
        raise ValueError("s and N must be integers")
    if not (s > 2 and 2 * s <= N):
        raise ValueError(f"bound requires s > 2 and 2s <= N, got s={s}, N={N}")
    return s * math.log(N / (2 * s)) / (8 * math.log(3))

"""Convex recovery solvers.

The workhorse is :func:`solve_min_atomic`, an over-relaxed ADMM for::

    minimize    ||z||_W
    subject to  ||A z - y||_2 <= eps

with the proximal map swapped per atomic set (soft thresholding for the
canonical basis and for frame coefficients, singular value thresholding for
rank-one atoms).  Frames are handled in the synthesis form: the solver runs on
the composed matrix ``A @ F`` and returns ``z = F @ x``.

Matrix signals are flattened in row-major (C) order everywhere.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import ConvergenceError, DimensionError, InfeasibleError

__all__ = [
    "MeasurementOperator",
    "SolverOptions",
    "SolveResult",
    "soft_threshold",
    "sv_threshold",
    "weighted_l1_min",
    "solve_min_atomic",
    "exhaustive_l1_oracle",
    "l1_subgradient_residual",
]

ZERO_SV_RTOL = 1e-10


def _orth_split(matrix):
    """Return (singular values, row-space basis, null-space basis, rank)."""
    m, d = matrix.shape
    if m == 0 or not np.any(matrix):
        return np.zeros(0), np.zeros((d, 0)), np.eye(d), 0
    _, sv, vt = np.linalg.svd(matrix, full_matrices=True)
    cutoff = ZERO_SV_RTOL * sv[0]
    rank = int(np.sum(sv > cutoff))
    return sv, vt[:rank].T.copy(), vt[rank:].T.copy(), rank


class MeasurementOperator:
    """Linear measurement map stored as an ``m x d`` matrix.

    Parameters
    ----------
    matrix : array_like
        Matrix acting on flattened signals.

    Attributes
    ----------
    singular_values : ndarray
        All singular values, descending.
    nu : float
        Smallest *nonzero* singular value (zero threshold ``1e-10 * sigma_max``).
        ``nan`` when the matrix is zero.
    null_basis : ndarray
        Orthonormal basis of the null space, shape ``(d, k)``.
    """

    def __init__(self, matrix):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if matrix.ndim != 2:
            raise DimensionError("measurement matrix must be two-dimensional")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("measurement matrix has non-finite entries")
        self.matrix = matrix
        sv, row, null, rank = _orth_split(matrix)
        self.singular_values = sv
        self.rank = rank
        self.row_basis = row
        self.null_basis = null
        self.nu = float(sv[rank - 1]) if rank > 0 else float("nan")

    @classmethod
    def from_null_space(cls, basis):
        """Build an operator whose null space is spanned by ``basis`` columns.

        The rows form an orthonormal basis of the orthogonal complement, so the
        nonzero singular values are all one.
        """
        basis = np.asarray(basis, dtype=float)
        if basis.ndim == 1:
            basis = basis[:, None]
        q, _ = np.linalg.qr(basis, mode="complete")
        k = np.linalg.matrix_rank(basis)
        return cls(q[:, k:].T)

    @property
    def m(self):
        return self.matrix.shape[0]

    @property
    def d(self):
        return self.matrix.shape[1]

    @property
    def null_dim(self):
        return self.null_basis.shape[1]

    def __call__(self, z):
        z = np.asarray(z, dtype=float).ravel()
        if z.size != self.d:
            raise DimensionError(f"operator expects {self.d} coordinates, got {z.size}")
        return self.matrix @ z

    def __repr__(self):
        return f"MeasurementOperator(m={self.m}, d={self.d}, rank={self.rank})"


@dataclass
class SolverOptions:
    """ADMM settings.  ``eps`` is the noise radius of the constraint ball."""

    eps: float = 0.0
    tol_primal: float = 1e-8
    tol_dual: float = 1e-8
    tol_rel: float = 1e-6
    max_iter: int = 20000
    rho_admm: float = 1.0
    relax: float = 1.6
    polish: bool = True

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.tol_primal <= 0 or self.tol_dual <= 0 or self.tol_rel < 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.rho_admm <= 0:
            raise ValueError("rho_admm must be positive")


@dataclass
class SolveResult:
    z_hat: np.ndarray
    objective: float
    constraint_residual: float
    iterations: int
    converged: bool
    coefficients: np.ndarray | None = None
    dual: np.ndarray | None = None
    polished: bool = False
    residuals: dict = field(default_factory=dict)

    def to_report(self):
        return {
            "objective": float(self.objective),
            "constraint_residual": float(self.constraint_residual),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "polished": bool(self.polished),
        }


def soft_threshold(x, tau):
    """Componentwise ``sign(x) * max(|x| - tau, 0)``."""
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def sv_threshold(Z, tau):
    """Proximal map of ``tau * ||.||_*``: shrink singular values by ``tau``."""
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    Z = np.asarray(Z, dtype=float)
    if not np.all(np.isfinite(Z)):
        raise np.linalg.LinAlgError("singular value thresholding needs finite input")
    u, s, vt = np.linalg.svd(Z, full_matrices=False)
    return (u * np.maximum(s - tau, 0.0)) @ vt


def _l1_polish(M, y, x, weights, tol=1e-9, slack=1e-9):
    """Re-solve an LP vertex exactly on its support.

    Returns the polished vector or ``None`` when the support does not give a
    consistent basic solution.
    """
    scale = max(np.max(np.abs(x), initial=0.0), 1.0)
    supp = np.flatnonzero(np.abs(x) > tol * scale)
    if supp.size == 0:
        return np.zeros_like(x) if np.linalg.norm(y) <= 1e-12 else None
    sub = M[:, supp]
    if np.linalg.matrix_rank(sub) < supp.size:
        return None
    coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
    if np.linalg.norm(sub @ coef - y) > 1e-10 * max(1.0, np.linalg.norm(y)):
        return None
    if np.any(np.sign(coef) != np.sign(x[supp])):
        return None
    out = np.zeros_like(x)
    out[supp] = coef
    old = np.sum(weights * np.abs(x))
    new = np.sum(weights * np.abs(out))
    return out if new <= old + slack * max(1.0, old) else None


def weighted_l1_min(M, y, weights=None):
    """Solve ``min sum_i w_i |x_i|  s.t.  M x = y`` as a linear program.

    The HiGHS solution is polished on its support so the returned value is
    accurate to roughly machine precision when the optimum is a vertex.

    Returns
    -------
    x : ndarray
    value : float
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n = M.shape[1]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    res = linprog(
        np.concatenate([w, w]),
        A_eq=np.hstack([M, -M]),
        b_eq=y,
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status == 2:
        raise InfeasibleError("M x = y has no solution")
    if res.status != 0:
        raise ConvergenceError(f"linear program failed: {res.message}")
    x = res.x[:n] - res.x[n:]
    polished = _l1_polish(M, y, x, w)
    if polished is not None:
        x = polished
    return x, float(np.sum(w * np.abs(x)))


class _BallProjector:
    """Euclidean projection onto ``{u : ||M u - y||_2 <= eps}``.

    Uses one SVD of ``M``; the multiplier of the ball constraint is the root of
    a monotone secular equation.
    """

    def __init__(self, M, y, eps):
        self.M = M
        self.y = y
        self.eps = eps
        m, n = M.shape
        if m == 0:
            self.rank = 0
            self.V = np.zeros((n, 0))
            return
        u, s, vt = np.linalg.svd(M, full_matrices=False)
        cutoff = ZERO_SV_RTOL * s[0] if s.size and s[0] > 0 else 0.0
        r = int(np.sum(s > cutoff))
        self.rank = r
        self.U = u[:, :r]
        self.s = s[:r]
        self.V = vt[:r].T
        self.b = self.U.T @ y
        out_of_range = np.linalg.norm(y - self.U @ self.b)
        slack = eps * eps - out_of_range * out_of_range
        tol = 1e-10 * max(1.0, np.linalg.norm(y))
        if eps == 0.0:
            if out_of_range > tol:
                raise InfeasibleError(
                    f"y is outside the range of the operator (residual {out_of_range:.3e})"
                )
            self.delta = 0.0
        elif slack < 0:
            raise InfeasibleError(
                f"no point within eps={eps} of y (distance to range {out_of_range:.3e})"
            )
        else:
            self.delta = math.sqrt(slack)

    def __call__(self, v):
        if self.rank == 0:
            return v
        a = self.V.T @ v
        resid = self.s * a - self.b
        if self.delta == 0.0:
            a_new = self.b / self.s
        else:
            nrm = np.linalg.norm(resid)
            if nrm <= self.delta:
                return v
            a_new = self._shrink(a, resid)
        return v + self.V @ (a_new - a)

    def _shrink(self, a, resid):
        s2 = self.s ** 2
        d2 = self.delta ** 2
        r2 = resid ** 2
        # phi is convex and decreasing, so Newton from lam = 0 climbs to the root
        # without overshooting.
        lam = 0.0
        for _ in range(500):
            t = 1.0 + lam * s2
            f = np.sum(r2 / t ** 2) - d2
            if f <= 1e-14 * d2:
                break
            df = -2.0 * np.sum(r2 * s2 / t ** 3)
            nxt = lam - f / df
            if not nxt > lam:
                break
            lam = nxt
        return (a + lam * self.s * self.b) / (1.0 + lam * s2)


def _nuclear_prox(shape):
    def prox(v, tau):
        return sv_threshold(v.reshape(shape), tau).ravel()

    def value(v):
        return float(np.sum(np.linalg.svd(v.reshape(shape), compute_uv=False)))

    return prox, value


def _l1_prox(v, tau):
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def _l1_value(v):
    return float(np.sum(np.abs(v)))


def l1_subgradient_residual(x, g, tol=1e-9):
    """Distance of ``g`` to the subdifferential of ``||.||_1`` at ``x`` (sup norm)."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    scale = max(np.max(np.abs(x), initial=0.0), 1.0)
    on = np.abs(x) > tol * scale
    res_on = np.abs(g[on] - np.sign(x[on]))
    res_off = np.maximum(np.abs(g[~on]) - 1.0, 0.0)
    return float(max(np.max(res_on, initial=0.0), np.max(res_off, initial=0.0)))


def _l1_dual_on_support(M, x, tol=1e-9):
    """Find multipliers ``lam`` with ``M^T lam`` a subgradient of ||.||_1 at x.

    Solves a small LP: match the signs on the support and minimise the largest
    off-support magnitude.  Returns ``(lam, residual)``.
    """
    m, n = M.shape
    scale = max(np.max(np.abs(x), initial=0.0), 1.0)
    on = np.abs(x) > tol * scale
    off = ~on
    # variables: lam (m, free), t (scalar) ; minimise t
    c = np.zeros(m + 1)
    c[-1] = 1.0
    Mt_off = M[:, off].T
    A_ub = np.vstack([
        np.hstack([Mt_off, -np.ones((Mt_off.shape[0], 1))]),
        np.hstack([-Mt_off, -np.ones((Mt_off.shape[0], 1))]),
    ]) if Mt_off.size else None
    b_ub = np.zeros(2 * Mt_off.shape[0]) if Mt_off.size else None
    A_eq = np.hstack([M[:, on].T, np.zeros((int(on.sum()), 1))]) if on.any() else None
    b_eq = np.sign(x[on]) if on.any() else None
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=[(None, None)] * m + [(0, None)], method="highs")
    if res.status != 0:
        return None, float("inf")
    lam = res.x[:m]
    return lam, l1_subgradient_residual(x, M.T @ lam, tol)


def _polish_ball(M, y, eps, x, tol=1e-9):
    """KKT polish for ``min ||x||_1 s.t. ||Mx - y|| <= eps`` with eps > 0.

    Fixes the support and signs of ``x`` and minimises the resulting linear
    objective over the ellipsoidal constraint in closed form.
    """
    scale = max(np.max(np.abs(x), initial=0.0), 1.0)
    supp = np.flatnonzero(np.abs(x) > tol * scale)
    if supp.size == 0:
        return np.zeros_like(x) if np.linalg.norm(y) <= eps else None
    sub = M[:, supp]
    if np.linalg.matrix_rank(sub) < supp.size:
        return None
    sig = np.sign(x[supp])
    gram = sub.T @ sub
    c_ls = np.linalg.solve(gram, sub.T @ y)
    r0 = np.linalg.norm(sub @ c_ls - y)
    q = sig @ np.linalg.solve(gram, sig)
    if eps * eps - r0 * r0 <= 0 or q <= 0:
        return None
    t = math.sqrt((eps * eps - r0 * r0) / q)
    coef = c_ls - t * np.linalg.solve(gram, sig)
    if np.any(np.sign(coef) != sig):
        return None
    out = np.zeros_like(x)
    out[supp] = coef
    return out


def _admm(M, y, eps, prox, value, opts):
    n = M.shape[1]
    project = _BallProjector(M, y, eps)
    x = np.zeros(n)
    u = project(np.zeros(n))
    w = np.zeros(n)
    rho = opts.rho_admm
    alpha = opts.relax
    sqrt_n = math.sqrt(n)
    converged = False
    r_norm = s_norm = float("inf")
    it = 0
    for it in range(1, opts.max_iter + 1):
        x = prox(u - w, 1.0 / rho)
        x_hat = alpha * x + (1.0 - alpha) * u
        u_old = u
        u = project(x_hat + w)
        w = w + x_hat - u
        r_norm = np.linalg.norm(x - u)
        s_norm = rho * np.linalg.norm(u - u_old)
        eps_pri = sqrt_n * opts.tol_primal + opts.tol_rel * max(np.linalg.norm(x), np.linalg.norm(u))
        eps_dual = sqrt_n * opts.tol_dual + opts.tol_rel * rho * np.linalg.norm(w)
        if r_norm <= eps_pri and s_norm <= eps_dual:
            converged = True
            break
    return x, u, rho * w, it, converged, {"primal": float(r_norm), "dual": float(s_norm)}, project


def _finish(M, y, eps, x, u, project, value, opts, l1=False):
    """Pick the best feasible candidate among polish, projected x, and u."""
    cands = []
    polished = None
    if l1 and opts.polish:
        if eps == 0.0:
            # ADMM leaves small nonzeros off the support; try coarser cuts too
            for cut in (1e-9, 1e-7, 1e-5, 1e-3):
                polished = _l1_polish(M, y, x, np.ones_like(x), tol=cut, slack=1e-5)
                if polished is not None:
                    break
        else:
            for cut in (1e-9, 1e-7, 1e-5, 1e-3):
                polished = _polish_ball(M, y, eps, x, tol=cut)
                if polished is not None and np.linalg.norm(M @ polished - y) <= eps * (1 + 1e-12):
                    break
                polished = None
        if polished is not None:
            cands.append((value(polished), 0, polished))
    px = project(x)
    cands.append((value(px), 1, px))
    cands.append((value(u), 2, u))
    obj, tag, best = min(cands, key=lambda c: (c[0], c[1]))
    return best, obj, tag == 0


def solve_min_atomic(aset, A, y, opts=None):
    """Solve the noisy atomic-norm recovery program for one of the three sets.

    Parameters
    ----------
    aset : AtomicSet
        ``CanonicalBasis``, ``FiniteFrame`` or ``RankOneManifold``.
    A : MeasurementOperator
    y : array_like
        Measurements, length ``A.m``.
    opts : SolverOptions, optional

    Returns
    -------
    SolveResult
        ``objective`` is the atomic norm certified by the returned point (for
        frames, the l1 norm of the synthesis coefficients).

    Raises
    ------
    InfeasibleError
        ``eps == 0`` and ``y`` is outside the range of ``A``, or the ball misses
        the range entirely.
    """
    opts = opts or SolverOptions()
    if not isinstance(A, MeasurementOperator):
        A = MeasurementOperator(A)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != A.m:
        raise DimensionError(f"expected {A.m} measurements, got {y.size}")
    if A.d != aset.ambient_dim:
        raise DimensionError(f"operator acts on R^{A.d} but the atomic set lives in R^{aset.ambient_dim}")
    eps = float(opts.eps)

    if aset.kind == "frame":
        F = aset.atoms
        M = A.matrix @ F
        prox, value, l1 = _l1_prox, _l1_value, True
    elif aset.kind == "canonical":
        M = A.matrix
        prox, value, l1 = _l1_prox, _l1_value, True
    elif aset.kind == "rank_one":
        M = A.matrix
        prox, value = _nuclear_prox(aset.shape)
        l1 = False
    else:
        raise ValueError(f"unknown atomic set kind {aset.kind!r}")

    n = M.shape[1]
    if A.m == 0 or np.linalg.norm(y) <= eps:
        # zero is feasible and has zero norm
        x = np.zeros(n)
        z = aset.assemble_coefficients(x) if aset.kind == "frame" else x.reshape(aset.shape)
        return SolveResult(z, 0.0, float(np.linalg.norm(y)), 0, True,
                           coefficients=x if aset.kind == "frame" else None,
                           dual=np.zeros(A.m))

    x, u, dual_x, iters, converged, resid_info, project = _admm(M, y, eps, prox, value, opts)
    best, obj, polished = _finish(M, y, eps, x, u, project, value, opts, l1=l1)

    lam = None
    if l1:
        # multipliers for the constraint; dual_x lies (approximately) in range(M^T)
        lam, *_ = np.linalg.lstsq(M.T, -dual_x, rcond=None) if M.shape[0] else (np.zeros(0),)
        if polished and eps == 0.0:
            lam2, res2 = _l1_dual_on_support(M, best)
            if lam2 is not None and res2 <= 1e-6:
                lam = lam2
                converged = True
        resid_info["subgradient"] = l1_subgradient_residual(best, M.T @ lam) if lam is not None else float("inf")

    if aset.kind == "frame":
        z_hat = aset.assemble_coefficients(best)
        coefficients = best
    else:
        z_hat = best.reshape(aset.shape)
        coefficients = None
    resid = float(np.linalg.norm(M @ best - y))
    if converged and resid > eps + max(opts.tol_primal, 1e-10) * max(1.0, np.linalg.norm(y)) * 100:
        converged = False
    return SolveResult(z_hat, float(obj), resid, iters, bool(converged),
                       coefficients=coefficients, dual=lam, polished=polished,
                       residuals=resid_info)


def exhaustive_l1_oracle(A, y, max_dim=14):
    """Global minimiser of ``||x||_1`` on ``{A x = y}`` by vertex enumeration.

    Every basic solution of the LP is supported on ``rank(A)`` linearly
    independent columns, so enumerating those column subsets and solving each
    square system visits every vertex of the solution polytope.  Intended as a
    test oracle only.
    """
    M = A.matrix if isinstance(A, MeasurementOperator) else np.atleast_2d(np.asarray(A, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    m, d = M.shape
    if d > max_dim:
        raise DimensionError(f"oracle limited to d <= {max_dim}, got {d}")
    if np.linalg.norm(y) == 0:
        return np.zeros(d)
    r = np.linalg.matrix_rank(M)
    if r == 0:
        raise InfeasibleError("zero operator cannot produce nonzero measurements")
    # keep an independent set of rows
    q, rr, piv = _qr_pivot(M.T)
    rows = np.sort(piv[:r])
    Mr, yr = M[rows], y[rows]
    best, best_val = None, float("inf")
    for cols in itertools.combinations(range(d), r):
        sub = Mr[:, cols]
        if abs(np.linalg.det(sub)) < 1e-12 * max(1.0, np.abs(sub).max()) ** r:
            continue
        coef = np.linalg.solve(sub, yr)
        x = np.zeros(d)
        x[list(cols)] = coef
        if np.linalg.norm(M @ x - y) > 1e-8 * max(1.0, np.linalg.norm(y)):
            continue
        val = np.sum(np.abs(coef))
        if val < best_val:
            best, best_val = x, val
    if best is None:
        raise InfeasibleError("A x = y has no solution")
    return best


def _qr_pivot(M):
    from scipy.linalg import qr

    return qr(M, pivoting=True)

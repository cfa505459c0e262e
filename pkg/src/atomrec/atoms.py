"""Atomic sets, atomic norms, best s-term approximations and tails.

Three atomic sets are supported:

``CanonicalBasis(d)``
    atoms ``e_1, ..., e_d``; the atomic norm is the l1 norm.
``FiniteFrame(F)``
    atoms are the columns of a ``d x N`` frame matrix; the atomic norm is the
    smallest l1 norm of a synthesis coefficient vector.
``RankOneManifold(n1, n2)``
    atoms ``u v^T`` with unit factors; the atomic norm is the nuclear norm.

Signals are plain numpy arrays: vectors of length ``d`` or ``n1 x n2``
matrices.  Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull, QhullError

from .errors import DimensionError
from .solvers import weighted_l1_min

__all__ = [
    "AtomicSet",
    "CanonicalBasis",
    "FiniteFrame",
    "RankOneManifold",
    "AtomDecomposition",
    "RankOneDecomposition",
    "TailResult",
    "EquivalenceConstant",
    "ring_frame",
    "atomic_norm",
    "dual_atomic_norm",
    "equivalence_constant",
    "equivalence_constant_report",
    "best_s_approx",
    "tail",
    "TOL_RECON",
    "TOL_MEMBER",
]

TOL_RECON = 1e-8
TOL_MEMBER = 1e-6
MAX_SUPPORTS = 200_000


@dataclass
class AtomDecomposition:
    """Finitely many atoms picked by index, with real coefficients."""

    indices: np.ndarray
    coeffs: np.ndarray

    @property
    def n_terms(self):
        return int(np.count_nonzero(self.coeffs))


@dataclass
class RankOneDecomposition:
    """``sum_i sigma_i * left[:, i] @ right[:, i].T`` with unit-norm factors."""

    sigma: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @property
    def n_terms(self):
        return int(np.count_nonzero(self.sigma))


@dataclass
class TailResult:
    value: float
    minimizer: AtomDecomposition | RankOneDecomposition
    approx: np.ndarray
    exact: bool = True


@dataclass
class EquivalenceConstant:
    value: float
    certified: bool
    method: str
    loose_value: float


class AtomicSet:
    """Interface shared by the three concrete atomic sets."""

    kind = ""
    shape: tuple = ()

    @property
    def ambient_dim(self):
        return int(np.prod(self.shape))

    @property
    def max_sparsity(self):
        raise NotImplementedError

    @property
    def loose_constant(self):
        """Looser equivalence constant (sqrt of the atom count or of n1 n2), kept for comparison."""
        raise NotImplementedError

    def coerce(self, z):
        """Return ``z`` as a float array of this set's signal shape."""
        z = np.asarray(z, dtype=float)
        if z.shape != self.shape:
            if z.size == self.ambient_dim:
                z = z.reshape(self.shape)
            else:
                raise DimensionError(f"signal of shape {z.shape} does not live in R^{self.shape}")
        if not np.all(np.isfinite(z)):
            raise ValueError("signal has non-finite coordinates")
        return z

    def _check_s(self, s):
        if not (isinstance(s, (int, np.integer)) and 1 <= s <= self.max_sparsity):
            raise ValueError(f"sparsity must be an integer in [1, {self.max_sparsity}], got {s!r}")

    def tail(self, z, s):
        z = self.coerce(z)
        dec, exact = self._best(z, s)
        v = self.assemble(dec)
        return TailResult(self.norm(z - v), dec, v, exact)

    def best_s_approx(self, z, s):
        return self._best(self.coerce(z), s)[0]

    def equivalence_constant(self):
        return self.equivalence_report().value

    def random_sparse(self, s, rng):
        """Draw a member of the s-sparse set: uniform atoms, N(0,1) coefficients."""
        raise NotImplementedError

    def random_compressible(self, rng, decay=1.5):
        """Signal whose atomic coefficients decay like ``k**-decay``."""
        raise NotImplementedError

    def to_config(self):
        raise NotImplementedError


class CanonicalBasis(AtomicSet):
    kind = "canonical"

    def __init__(self, dim):
        if int(dim) < 1:
            raise ValueError("dimension must be positive")
        self.dim = int(dim)
        self.shape = (self.dim,)

    def __repr__(self):
        return f"CanonicalBasis({self.dim})"

    @property
    def max_sparsity(self):
        return self.dim

    @property
    def loose_constant(self):
        return math.sqrt(self.dim)

    def norm(self, z):
        return float(np.sum(np.abs(self.coerce(z))))

    def dual_norm(self, u):
        return float(np.max(np.abs(self.coerce(u))))

    def equivalence_report(self):
        c = math.sqrt(self.dim)
        return EquivalenceConstant(c, True, "analytic", c)

    def _best(self, z, s):
        self._check_s(s)
        order = np.argsort(-np.abs(z), kind="stable")[:s]
        return AtomDecomposition(order, z[order].copy()), True

    def assemble(self, dec):
        z = np.zeros(self.dim)
        np.add.at(z, np.asarray(dec.indices, dtype=int), dec.coeffs)
        return z

    def random_sparse(self, s, rng):
        self._check_s(s)
        idx = np.sort(rng.choice(self.dim, size=s, replace=False))
        dec = AtomDecomposition(idx, rng.standard_normal(s))
        return self.assemble(dec), dec

    def random_compressible(self, rng, decay=1.5):
        mags = np.arange(1, self.dim + 1, dtype=float) ** -decay
        z = np.zeros(self.dim)
        z[rng.permutation(self.dim)] = mags * rng.choice([-1.0, 1.0], size=self.dim)
        return z

    def to_config(self):
        return {"kind": "canonical", "dim": self.dim}


class FiniteFrame(AtomicSet):
    """Atoms are the columns of a full-row-rank ``d x N`` matrix.

    Parameters
    ----------
    atoms : array_like
        Frame matrix ``F``.
    norm_method : {"auto", "facets", "lp"}
        ``lp`` solves ``min ||c||_1 s.t. F c = z`` for every evaluation.
        ``facets`` precomputes the facets of ``conv(+-F)`` with Qhull once and
        evaluates the norm as a maximum of linear forms.  ``auto`` uses facets
        when ``d <= 6`` and ``N <= 64``.
    max_supports : int
        Above this many supports the tail search switches to a greedy heuristic
        and reports ``exact=False``.
    """

    kind = "frame"

    def __init__(self, atoms, norm_method="auto", max_supports=MAX_SUPPORTS, source=None):
        F = np.atleast_2d(np.asarray(atoms, dtype=float))
        d, N = F.shape
        if N < d:
            raise ValueError(f"a frame of R^{d} needs at least {d} atoms, got {N}")
        if not np.all(np.isfinite(F)):
            raise ValueError("frame has non-finite entries")
        if np.any(np.linalg.norm(F, axis=0) == 0):
            raise ValueError("frame atoms must be nonzero")
        if np.linalg.matrix_rank(F) < d:
            raise ValueError("frame matrix must have full row rank")
        if norm_method not in ("auto", "facets", "lp"):
            raise ValueError(f"unknown norm method {norm_method!r}")
        self.atoms = F
        self.shape = (d,)
        self.max_supports = int(max_supports)
        self.source = source
        self._facets = None
        if norm_method == "auto":
            norm_method = "facets" if d <= 6 and N <= 64 else "lp"
        self.norm_method = norm_method
        if norm_method == "facets":
            self._facets = self._compute_facets()

    def __repr__(self):
        return f"FiniteFrame(d={self.dim}, N={self.n_atoms}, norm_method={self.norm_method!r})"

    @property
    def dim(self):
        return self.atoms.shape[0]

    @property
    def n_atoms(self):
        return self.atoms.shape[1]

    @property
    def max_sparsity(self):
        return self.n_atoms

    @property
    def loose_constant(self):
        return math.sqrt(self.n_atoms)

    def _compute_facets(self):
        """Rows ``h_k`` with ``||z||_F = max_k h_k . z``."""
        F = self.atoms
        if self.dim == 1:
            r = np.max(np.abs(F))
            return np.array([[1.0 / r], [-1.0 / r]])
        pts = np.hstack([F, -F]).T
        try:
            hull = ConvexHull(pts)
        except QhullError:
            return None
        normals = hull.equations[:, :-1]
        offsets = -hull.equations[:, -1]
        H = normals / offsets[:, None]
        return np.unique(np.round(H, 13), axis=0)

    def norm(self, z):
        z = self.coerce(z)
        if self._facets is not None:
            return float(max(np.max(self._facets @ z), 0.0))
        return weighted_l1_min(self.atoms, z)[1]

    def norm_lp(self, z):
        """Atomic norm by the equality-constrained l1 program (no facet cache)."""
        return weighted_l1_min(self.atoms, self.coerce(z))[1]

    def decompose(self, z):
        """Minimal-l1 synthesis coefficients of ``z``."""
        x, _ = weighted_l1_min(self.atoms, self.coerce(z))
        idx = np.flatnonzero(np.abs(x) > 1e-12)
        return AtomDecomposition(idx, x[idx])

    def dual_norm(self, u):
        return float(np.max(np.abs(self.coerce(u) @ self.atoms)))

    def equivalence_report(self):
        if self._facets is not None:
            c = float(np.max(np.linalg.norm(self._facets, axis=1)))
            return EquivalenceConstant(c, True, "facets", self.loose_constant)
        c = 1.0 / self._min_dual_on_sphere()
        return EquivalenceConstant(c, False, "multistart", self.loose_constant)

    def _min_dual_on_sphere(self, starts=64, seed=0):
        F = self.atoms
        if self.dim == 2:
            th = np.linspace(0.0, np.pi, 200_001)
            vals = np.max(np.abs(np.cos(th)[:, None] * F[0] + np.sin(th)[:, None] * F[1]), axis=1)
            best = float(vals.min())
        else:
            best = float("inf")
        rng = np.random.default_rng(seed)

        def f(u):
            n = np.linalg.norm(u)
            return np.max(np.abs(u @ F)) / n if n > 0 else np.inf

        for _ in range(starts):
            u0 = rng.standard_normal(self.dim)
            res = minimize(f, u0, method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
            best = min(best, float(res.fun))
        return best

    def _support_value_lp(self, z, T):
        w = np.ones(self.n_atoms)
        w[list(T)] = 0.0
        x, val = weighted_l1_min(self.atoms, z, w)
        return val, x[list(T)]

    def _single_atom_values(self, z):
        """Exact ``min_c ||z - c f_j||_F`` for every atom j via the facet form.

        Each value is ``min_c max_k (alpha_k - c beta_k)``; by LP duality the
        optimum pairs one piece of positive slope with one of negative slope.
        """
        H = self._facets
        alpha = H @ z
        betas = H @ self.atoms
        vals = np.empty(self.n_atoms)
        coefs = np.empty(self.n_atoms)
        for j in range(self.n_atoms):
            b = betas[:, j]
            pos, neg = b > 1e-14, b < -1e-14
            flat = ~(pos | neg)
            best = alpha[flat].max() if flat.any() else -np.inf
            c_best = 0.0
            if pos.any() and neg.any():
                ai, bi = alpha[pos][:, None], b[pos][:, None]
                aj, bj = alpha[neg][None, :], b[neg][None, :]
                v = (ai * (-bj) + aj * bi) / (bi - bj)
                k = np.unravel_index(np.argmax(v), v.shape)
                if v[k] >= best:
                    best = v[k]
                    c_best = ((ai - aj) / (bi - bj))[k]
                elif flat.any():
                    # a flat piece dominates: any c inside the feasible window works
                    c_best = ((ai - aj) / (bi - bj))[k]
            vals[j] = best
            coefs[j] = c_best
        return vals, coefs

    def _best(self, z, s):
        self._check_s(s)
        N = self.n_atoms
        if self._facets is not None and s == 1:
            vals, coefs = self._single_atom_values(z)
            j = int(np.argmin(vals))
            return AtomDecomposition(np.array([j]), np.array([coefs[j]])), True
        if math.comb(N, s) <= self.max_supports:
            best = (float("inf"), None, None)
            for T in itertools.combinations(range(N), s):
                val, c = self._support_value_lp(z, T)
                if val < best[0] - 1e-13:
                    best = (val, T, c)
            return AtomDecomposition(np.array(best[1]), best[2]), True
        return self._best_heuristic(z, s), False

    def _best_heuristic(self, z, s):
        """Greedy support growth followed by single-swap local search."""
        N = self.n_atoms
        T = []
        for _ in range(s):
            scores = [(self._support_value_lp(z, T + [j])[0], j) for j in range(N) if j not in T]
            T.append(min(scores)[1])
        cur, c = self._support_value_lp(z, T)
        improved = True
        while improved:
            improved = False
            for pos in range(s):
                for j in range(N):
                    if j in T:
                        continue
                    cand = T[:pos] + [j] + T[pos + 1:]
                    val, cc = self._support_value_lp(z, cand)
                    if val < cur - 1e-12:
                        T, cur, c, improved = cand, val, cc, True
        return AtomDecomposition(np.array(T), c)

    def assemble(self, dec):
        return self.atoms[:, np.asarray(dec.indices, dtype=int)] @ np.asarray(dec.coeffs, dtype=float)

    def assemble_coefficients(self, x):
        return self.atoms @ x

    def random_sparse(self, s, rng):
        self._check_s(s)
        idx = np.sort(rng.choice(self.n_atoms, size=s, replace=False))
        dec = AtomDecomposition(idx, rng.standard_normal(s))
        return self.assemble(dec), dec

    def random_compressible(self, rng, decay=1.5):
        N = self.n_atoms
        x = np.zeros(N)
        x[rng.permutation(N)] = np.arange(1, N + 1, dtype=float) ** -decay * rng.choice([-1.0, 1.0], size=N)
        return self.atoms @ x

    def to_config(self):
        cfg = {"kind": "frame", "dim": self.dim, "n_atoms": self.n_atoms}
        if self.source:
            cfg["atoms"] = self.source
        return cfg


class RankOneManifold(AtomicSet):
    kind = "rank_one"

    def __init__(self, n1, n2):
        if int(n1) < 1 or int(n2) < 1:
            raise ValueError("matrix dimensions must be positive")
        self.n1, self.n2 = int(n1), int(n2)
        self.shape = (self.n1, self.n2)

    def __repr__(self):
        return f"RankOneManifold({self.n1}, {self.n2})"

    @property
    def max_sparsity(self):
        return min(self.n1, self.n2)

    @property
    def loose_constant(self):
        return math.sqrt(self.n1 * self.n2)

    def norm(self, z):
        return float(np.sum(np.linalg.svd(self.coerce(z), compute_uv=False)))

    def dual_norm(self, u):
        return float(np.linalg.svd(self.coerce(u), compute_uv=False)[0])

    def equivalence_report(self):
        return EquivalenceConstant(math.sqrt(self.max_sparsity), True, "analytic", self.loose_constant)

    def _best(self, z, s):
        self._check_s(s)
        u, sv, vt = np.linalg.svd(z, full_matrices=False)
        return RankOneDecomposition(sv[:s].copy(), u[:, :s].copy(), vt[:s].T.copy()), True

    def tail(self, z, s):
        z = self.coerce(z)
        self._check_s(s)
        u, sv, vt = np.linalg.svd(z, full_matrices=False)
        dec = RankOneDecomposition(sv[:s].copy(), u[:, :s].copy(), vt[:s].T.copy())
        return TailResult(float(np.sum(sv[s:])), dec, self.assemble(dec), True)

    def assemble(self, dec):
        return (dec.left * dec.sigma) @ dec.right.T

    def random_sparse(self, s, rng):
        self._check_s(s)
        left, _ = np.linalg.qr(rng.standard_normal((self.n1, s)))
        right, _ = np.linalg.qr(rng.standard_normal((self.n2, s)))
        dec = RankOneDecomposition(rng.standard_normal(s), left, right)
        return self.assemble(dec), dec

    def random_compressible(self, rng, decay=1.5):
        K = self.max_sparsity
        left, _ = np.linalg.qr(rng.standard_normal((self.n1, K)))
        right, _ = np.linalg.qr(rng.standard_normal((self.n2, K)))
        sig = np.arange(1, K + 1, dtype=float) ** -decay
        return (left * sig) @ right.T

    def to_config(self):
        return {"kind": "rank_one", "n1": self.n1, "n2": self.n2}


def ring_frame(n=8, **kwargs):
    """``n`` unit vectors of R^2 at angles ``pi * k / n``, k = 0..n-1."""
    ang = np.pi * np.arange(n) / n
    return FiniteFrame(np.vstack([np.cos(ang), np.sin(ang)]), source=f"ring{n}", **kwargs)


def atomic_norm(aset, z):
    return aset.norm(z)


def dual_atomic_norm(aset, u):
    return aset.dual_norm(u)


def equivalence_constant(aset):
    return aset.equivalence_constant()


def equivalence_constant_report(aset):
    return aset.equivalence_report()


def best_s_approx(aset, z, s):
    return aset.best_s_approx(z, s)


def tail(aset, z, s):
    return aset.tail(z, s)

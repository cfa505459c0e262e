"""Random measurement ensembles, widths and small-ball estimates.

Measurement matrices have i.i.d. rows drawn from one of three centred
subgaussian ensembles.  Widths are Monte Carlo means of a supremum over a
target set; the target sets implemented here are the unit sphere, a finite
point cloud and the cone-like set

    S_rho = {z : ||z_s||_W >= rho ||z - z_s||_W} intersected with the sphere.

For the canonical basis and the rank-one manifold the inner supremum over
``S_rho`` is computed exactly; for frames it is a labelled lower bound.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .solvers import MeasurementOperator

__all__ = [
    "EnsembleSpec",
    "SubgaussianParams",
    "WidthEstimate",
    "QEstimate",
    "Sphere",
    "PointCloud",
    "SRho",
    "sample_operator",
    "estimate_params",
    "q_lower_bound",
    "empirical_q",
    "empirical_width",
    "gaussian_width",
    "sphere_width",
    "recommended_m",
    "mendelson_check",
]

KINDS = ("gaussian", "rademacher", "uniform")


@dataclass(frozen=True)
class EnsembleSpec:
    """Distribution of one measurement row.

    ``kind`` is ``gaussian`` (N(0, scale^2)), ``rademacher`` (+-scale) or
    ``uniform`` (uniform on ``[-sqrt(3), sqrt(3)] * scale``, unit variance at
    scale 1).  Entries are independent.
    """

    kind: str = "gaussian"
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown ensemble {self.kind!r}; expected one of {KINDS}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def draw(self, rng, shape):
        if self.kind == "gaussian":
            x = rng.standard_normal(shape)
        elif self.kind == "rademacher":
            x = rng.choice(np.array([-1.0, 1.0]), size=shape)
        else:
            x = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=shape)
        return self.scale * x


@dataclass
class SubgaussianParams:
    alpha: float
    sigma: float
    method: str
    stderr: float = 0.0


@dataclass
class WidthEstimate:
    mean: float
    stderr: float
    samples: int
    status: dict = field(default_factory=dict)


@dataclass
class QEstimate:
    """Small-ball probability estimate at the hardest sampled point."""

    value: float
    stderr: float
    point: np.ndarray | None = None
    stage1_min: float = float("nan")


def sample_operator(ensemble, m, d, seed=None):
    """``m x d`` matrix with i.i.d. rows from ``ensemble``; reproducible from the seed."""
    if m < 0 or d < 1:
        raise ValueError("need m >= 0 and d >= 1")
    rng = np.random.default_rng(ensemble.seed if seed is None else seed)
    return MeasurementOperator(ensemble.draw(rng, (m, d)))


def _direction_net(d, n, rng):
    """Unit directions: coordinate axes, balanced two-sparse and flat vectors, random ones."""
    dirs = [np.eye(d)[0]]
    if d >= 2:
        v = np.zeros(d)
        v[:2] = 1 / math.sqrt(2)
        dirs.append(v)
        dirs.append(np.ones(d) / math.sqrt(d))
    g = rng.standard_normal((max(n - len(dirs), 0), d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.vstack([np.array(dirs), g])


def estimate_params(ensemble, d=1, samples=10_000, n_dirs=32, seed=0):
    """Parameters ``(alpha, sigma)`` of the subgaussian definition for an ensemble.

    ``sigma`` is analytic for all three ensembles (each entry is strictly
    subgaussian with variance proxy ``scale^2``).  ``alpha`` is
    ``sqrt(2/pi) * scale`` for Gaussians and ``scale`` for a one-dimensional
    Rademacher row; otherwise it is the smallest Monte Carlo mean of
    ``|<phi, z>|`` over a direction net, lowered by two standard errors.
    """
    if samples < 1000:
        raise ValueError("estimate_params needs at least 1000 samples")
    sc = ensemble.scale
    if ensemble.kind == "gaussian":
        return SubgaussianParams(math.sqrt(2 / math.pi) * sc, sc, "Analytic")
    if ensemble.kind == "rademacher" and d == 1:
        return SubgaussianParams(sc, sc, "Analytic")
    rng = np.random.default_rng(seed)
    net = _direction_net(d, n_dirs, rng)
    phi = ensemble.draw(rng, (samples, d))
    vals = np.abs(phi @ net.T)
    means = vals.mean(axis=0)
    errs = vals.std(axis=0, ddof=1) / math.sqrt(samples)
    j = int(np.argmin(means - 2 * errs))
    return SubgaussianParams(float(means[j] - 2 * errs[j]), sc, "MonteCarlo", float(errs[j]))


def q_lower_bound(params, t):
    """``(alpha - t)^2 / (4 sigma^2)``, valid for ``0 < t <= alpha``."""
    if not 0 < t <= params.alpha:
        raise ValueError(f"t must lie in (0, alpha={params.alpha}], got {t}")
    return (params.alpha - t) ** 2 / (4 * params.sigma**2)


# ---------------------------------------------------------------- target sets


class Sphere:
    """Unit sphere of R^d; ``sup_x <g, x> = ||g||``."""

    exact = True

    def __init__(self, d):
        self.d = int(d)

    def sup(self, G):
        return np.linalg.norm(G, axis=1)

    def sample(self, n, rng):
        g = rng.standard_normal((n, self.d))
        return g / np.linalg.norm(g, axis=1, keepdims=True)


class PointCloud:
    """A finite set of points (rows)."""

    exact = True

    def __init__(self, points):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.d = self.points.shape[1]

    def sup(self, G):
        return np.max(G @ self.points.T, axis=1)

    def sample(self, n, rng):
        return self.points


def _epi_l1_proj_sq(u0, b, lam):
    """Squared norm of the projection of ``(u0, b)`` onto ``{t >= lam ||w||_1}``.

    Rows are independent problems.  The multiplier ``mu`` solves
    ``u0 + mu = lam * sum_i (|b_i| - lam mu)_+``, which is piecewise linear in
    ``mu`` with breakpoints at the sorted ``|b_i| / lam``.
    """
    n, p = b.shape
    bs = -np.sort(-np.abs(b), axis=1)
    out = np.empty(n)
    inside = u0 >= lam * bs.sum(axis=1)
    out[inside] = u0[inside] ** 2 + np.sum(bs[inside] ** 2, axis=1)
    polar = (-lam * u0 >= bs[:, 0]) & ~inside
    out[polar] = 0.0
    rest = ~(inside | polar)
    if rest.any():
        br, ur = bs[rest], u0[rest]
        S = np.cumsum(br, axis=1)
        j = np.arange(1, p + 1)
        mu = (lam * S - ur[:, None]) / (1 + j * lam**2)
        nxt = np.concatenate([br[:, 1:], np.zeros((br.shape[0], 1))], axis=1)
        ok = (mu >= 0) & (lam * mu <= br + 1e-15) & (lam * mu >= nxt - 1e-15)
        k = np.argmax(ok, axis=1)
        m_sel = mu[np.arange(len(k)), k]
        w = np.maximum(br - lam * m_sel[:, None], 0.0)
        t = ur + m_sel
        out[rest] = t**2 + np.sum(w**2, axis=1)
    return out


def _canonical_srho_sup(G, s, rho, chunk=4096):
    """Exact ``sup_{z in S_rho} <g, z>`` for the canonical basis, row by row.

    ``S_rho`` is the union over supports ``T`` and signs of the convex cones
    ``{sig . z_T >= rho ||z_Tc||_1}`` cut by the sphere; on each cone the
    supremum is the norm of the projection of ``g``.
    """
    n, d = G.shape
    lam = rho / math.sqrt(s)
    best = np.full(n, -np.inf)
    for T in itertools.combinations(range(d), s):
        T = list(T)
        Tc = [i for i in range(d) if i not in T]
        for sig in itertools.product([1.0, -1.0], repeat=s):
            sig = np.array(sig)
            for lo in range(0, n, chunk):
                gT = G[lo:lo + chunk, T] * sig
                u0 = gT.sum(axis=1) / math.sqrt(s)
                perp = np.sum(gT**2, axis=1) - u0**2
                if Tc:
                    val = perp + _epi_l1_proj_sq(u0, G[lo:lo + chunk, Tc], lam)
                else:
                    val = perp + np.maximum(u0, 0.0) ** 2
                np.maximum(best[lo:lo + chunk], np.sqrt(np.maximum(val, 0.0)), out=best[lo:lo + chunk])
    return best


class SRho:
    """``{z : ||z_s||_W >= rho ||z - z_s||_W}`` intersected with the unit sphere.

    ``sup`` is exact for the canonical basis and (through singular values) for
    the rank-one manifold; for frames it is a lower bound from a pool of
    feasible candidates.
    """

    def __init__(self, aset, s, rho, pool=2000, seed=0):
        if not 0 <= rho <= 1:
            raise ValueError("rho must lie in [0, 1]")
        aset._check_s(s)
        self.aset, self.s, self.rho = aset, int(s), float(rho)
        self.d = aset.ambient_dim
        self.exact = aset.kind in ("canonical", "rank_one")
        self._pool = None
        self._pool_size = pool
        self._seed = seed

    def contains(self, z, tol=1e-12):
        t = self.aset.tail(np.reshape(z, self.aset.shape), self.s)
        return self.aset.norm(t.approx) >= self.rho * t.value - tol

    def sup(self, G):
        G = np.atleast_2d(G)
        if self.aset.kind == "canonical":
            return _canonical_srho_sup(G, self.s, self.rho)
        if self.aset.kind == "rank_one":
            sv = np.linalg.svd(G.reshape((-1,) + self.aset.shape), compute_uv=False)
            return _canonical_srho_sup(sv, self.s, self.rho)
        return self._frame_sup(G)

    def _frame_sup(self, G):
        if self._pool is None:
            self._pool = self.sample(self._pool_size, np.random.default_rng(self._seed))
        out = np.max(G @ self._pool.T, axis=1)
        for i, g in enumerate(G):
            ng = np.linalg.norm(g)
            if ng == 0:
                continue
            x = self._pull(g / ng)
            if x is not None:
                out[i] = max(out[i], float(g @ x))
        return out

    def _pull(self, z):
        """Shrink the tail of ``z`` until it enters ``S_rho``; ``None`` if it fails."""
        aset = self.aset
        t = aset.tail(z.reshape(aset.shape), self.s)
        head = aset.norm(t.approx)
        if head >= self.rho * t.value:
            return z
        if head == 0:
            return None
        r = z.reshape(aset.shape) - t.approx
        kappa = head / (self.rho * t.value)
        x = (t.approx + kappa * r).ravel()
        x /= np.linalg.norm(x)
        return x if self.contains(x, tol=1e-9) else None

    def sample(self, n, rng):
        """Points of ``S_rho``: random directions whose tails are shrunk as needed.

        About half the points sit on the boundary ``||z_s|| = rho ||z - z_s||``.
        """
        out = []
        while len(out) < n:
            z = rng.standard_normal(self.d)
            if rng.random() < 0.5:
                z = self.aset.random_sparse(self.s, rng)[0].ravel() + 0.5 * z
            z /= np.linalg.norm(z)
            x = self._pull(z)
            if x is None:
                continue
            if x is z and rng.random() < 0.5 and self.rho > 0:
                # move an interior point onto the boundary
                t = self.aset.tail(z.reshape(self.aset.shape), self.s)
                head = self.aset.norm(t.approx)
                if t.value > 0 and head > 0:
                    kappa = head / (self.rho * t.value)
                    y = (t.approx + kappa * (z.reshape(self.aset.shape) - t.approx)).ravel()
                    y /= np.linalg.norm(y)
                    if self.contains(y, tol=1e-9):
                        x = y
            out.append(x)
        return np.array(out)


def _resolve_set(target, s=None, rho=None):
    if hasattr(target, "sup"):
        return target
    if rho is None or rho == 0:
        return Sphere(target.ambient_dim)
    return SRho(target, s, rho)


def sphere_width(d):
    """Closed form ``E ||g||_2 = sqrt(2) Gamma((d+1)/2) / Gamma(d/2)``."""
    return math.sqrt(2.0) * math.exp(gammaln((d + 1) / 2) - gammaln(d / 2))


def _summarise(vals, status):
    vals = np.asarray(vals, dtype=float)
    n = vals.size
    return WidthEstimate(float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
                         n, status)


def gaussian_width(target, rho=0.0, s=1, samples=10_000, seed=0):
    """Monte Carlo Gaussian width ``E sup_{x in S} <g, x>``.

    Parameters
    ----------
    target : AtomicSet or target set
        With an atomic set, ``S`` is ``S_rho`` of order ``s``; ``rho=0`` selects
        the full unit sphere.  Objects with a ``sup`` method are used directly.
    """
    S = _resolve_set(target, s, rho)
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((samples, S.d))
    vals = S.sup(G)
    label = "exact" if getattr(S, "exact", False) else "multistart-best"
    return _summarise(vals, {label: samples})


def empirical_width(ensemble, target, m, outer_samples=2000, seed=0, s=1, rho=None):
    """Mean empirical width ``E sup_{x in S} <x, m^-1/2 sum_i eps_i phi_i>``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    S = _resolve_set(target, s, rho)
    rng = np.random.default_rng(seed)
    H = np.empty((outer_samples, S.d))
    for i in range(outer_samples):
        phi = ensemble.draw(rng, (m, S.d))
        eps = rng.choice(np.array([-1.0, 1.0]), size=m)
        H[i] = eps @ phi / math.sqrt(m)
    vals = S.sup(H)
    label = "exact" if getattr(S, "exact", False) else "multistart-best"
    return _summarise(vals, {label: outer_samples})


def empirical_q(ensemble, target, xi, trials=20_000, n_points=200, seed=0, s=1, rho=None):
    """Estimate ``inf_{x in S} Pr(|<x, phi>| >= xi)``.

    Stage one screens ``n_points`` sampled points of ``S`` with ``trials``
    draws each; stage two re-estimates the hardest point with fresh draws so
    the reported value is not biased low by taking a minimum of noisy means.
    """
    if xi < 0:
        raise ValueError("xi must be nonnegative")
    S = _resolve_set(target, s, rho)
    rng = np.random.default_rng(seed)
    pts = S.sample(n_points, rng)
    if len(pts) == 0:
        raise ValueError("the target set produced no sample points")
    phi = ensemble.draw(rng, (trials, S.d))
    p = np.mean(np.abs(phi @ pts.T) >= xi, axis=0)
    j = int(np.argmin(p))
    phi2 = ensemble.draw(rng, (trials, S.d))
    hits = np.abs(phi2 @ pts[j]) >= xi
    q = float(hits.mean())
    return QEstimate(q, math.sqrt(max(q * (1 - q), 1e-300) / trials), pts[j], float(p[j]))


def recommended_m(params, width, C=1.0):
    """Measurement count ``ceil(4^8 sigma^4 C^2 w^2 / alpha^6)`` and its success probability.

    Returns ``(m, probability)`` with probability ``1 - exp(-m alpha^4 / (64^2 sigma^4))``.
    """
    w = width.mean if isinstance(width, WidthEstimate) else float(width)
    if not w > 0:
        raise ValueError("width must be positive")
    if not C > 0:
        raise ValueError("C must be positive")
    a, sg = params.alpha, params.sigma
    m = math.ceil(4**8 * sg**4 * C**2 * w**2 / a**6 - 1e-9)
    prob = -math.expm1(-m * a**4 / (64**2 * sg**4))
    return m, prob


def mendelson_check(ensemble, aset, rho, s, m, xi, t, trials=200, seed=0, *, width_samples=2000,
                    q_trials=20_000, q_points=200, inf_points=2000):
    """Empirical check of the small-ball lower bound on ``inf_{S_rho} ||A x||``.

    The right-hand side ``xi sqrt(m) Q_{2 xi} - 2 W_m - xi t`` is built from
    ``empirical_q`` and ``empirical_width``.  For each of ``trials`` operators
    the left-hand side is bounded below by ``sigma_min(A)`` when ``m >= d``
    (certified) and otherwise estimated by a minimum over sampled points of
    ``S_rho`` (which overestimates the infimum).
    """
    if not (xi > 0 and t > 0):
        raise ValueError("xi and t must be positive")
    S = SRho(aset, s, rho)
    d = S.d
    q = empirical_q(ensemble, S, 2 * xi, trials=q_trials, n_points=q_points, seed=seed)
    W = empirical_width(ensemble, S, m, outer_samples=width_samples, seed=seed + 1)
    rhs = xi * math.sqrt(m) * q.value - 2 * W.mean - xi * t
    pts = S.sample(inf_points, np.random.default_rng(seed + 2))
    lhs, sampled = [], []
    for i in range(trials):
        A = sample_operator(ensemble, m, d, seed=seed + 1000 + i)
        samp = float(np.min(np.linalg.norm(pts @ A.matrix.T, axis=1)))
        cert = float(A.singular_values[-1]) if m >= d else None
        lhs.append(cert if cert is not None else samp)
        sampled.append(samp)
    lhs = np.array(lhs)
    frac = float(np.mean(lhs >= rhs))
    target = 1 - math.exp(-t * t / 2)
    se = math.sqrt(target * (1 - target) / trials)
    return {
        "rhs": rhs,
        "q": q.value,
        "q_stderr": q.stderr,
        "width": W.mean,
        "width_stderr": W.stderr,
        "lhs_certified": m >= d,
        "lhs_min": float(lhs.min()),
        "lhs_sampled_min": float(np.min(sampled)),
        "fraction": frac,
        "target": target,
        "threshold": target - 3 * se,
        "passed": frac >= target - 3 * se,
        "trials": trials,
        "seed": seed,
    }

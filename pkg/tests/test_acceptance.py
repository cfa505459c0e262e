"""Acceptance gate.

Each test prints one PASS/FAIL line and the lines are repeated in the pytest
terminal summary.  Tolerances and corpus sizes are the ones the gate fixes.
"""

import math
import time

import numpy as np
import pytest

from atomrec import (CanonicalBasis, EnsembleSpec, MeasurementOperator, RankOneManifold,
                     check_plain_nsp, check_splittable, empirical_width, estimate_params,
                     exhaustive_l1_oracle, gaussian_width, mendelson_check, min_measurement_bound,
                     sample_operator, solve_min_atomic, stable_rho)
from atomrec.experiments import ExperimentConfig, emit, run_experiment
from atomrec.nsp import EXACT
from atomrec.random_measure import SRho, sphere_width

from conftest import record_acceptance

# ---------------------------------------------------------------- 1: eight-vector frame


def test_c1a_frame_atom_multiples(frame8):
    t0 = time.perf_counter()
    worst = 0.0
    for n in range(8):
        for c in np.linspace(-5, 5, 50):
            worst = max(worst, abs(frame8.norm(c * frame8.atoms[:, n]) - abs(c)))
    ok = worst <= 1e-9 and time.perf_counter() - t0 < 10
    record_acceptance("1a", "frame norm of scaled atoms equals |c|", ok, f"max err {worst:.2e}")
    assert ok


def test_c1b_frame_two_atom_closed_form(frame8):
    # a f1 + b f3 with a >= b >= 0 on a 50-point grid
    f1, f3 = frame8.atoms[:, 0], frame8.atoms[:, 2]
    pairs = [(a, b) for a in np.linspace(0, 3, 10) for b in np.linspace(0, 3, 10) if a >= b][:50]
    errs = [abs(frame8.norm(a * f1 + b * f3) - (a + (math.sqrt(2) - 1) * b)) for a, b in pairs]
    worst = max(errs)
    ok = worst <= 1e-9
    record_acceptance("1b", "frame norm of a f1 + b f3 equals a + (sqrt2 - 1) b", ok,
                      f"{len(pairs)} points, max err {worst:.3g}; "
                      f"norm(f1 + f3) = {frame8.norm(f1 + f3):.6f}")
    assert ok


def test_c1c_frame_splittable_sampling(frame8):
    t0 = time.perf_counter()
    rep = check_splittable(frame8, 1, trials=10_000, seed=0)
    elapsed = time.perf_counter() - t0
    ok = rep.verdict != "Falsified" and elapsed < 10
    record_acceptance("1c", "frame 1-splittable on 10^4 sampled pairs", ok,
                      f"verdict {rep.verdict}, worst gap {rep.violation:.3g}, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 2: nuclear specialization


def _svals(Z):
    # singular values through the eigenvalues of Z^T Z, independent of the norm code
    ev = np.clip(np.linalg.eigvalsh(Z.T @ Z), 0, None)
    return np.sort(np.sqrt(ev))[::-1]


def test_c2_nuclear_specialization():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst_norm = worst_tail = worst_a2 = worst_a6 = worst_eq = 0.0
    for i in range(1000):
        n = 2 if i % 2 == 0 else 3
        W = RankOneManifold(n, n)
        Z = rng.standard_normal((n, n))
        X = rng.standard_normal((n, n))
        sv = _svals(Z)
        worst_norm = max(worst_norm, abs(W.norm(Z) - sv.sum()))
        for s in range(1, n + 1):
            worst_tail = max(worst_tail, abs(W.tail(Z, s).value - sv[s:].sum()))
        # singular values are 1-Lipschitz in the nuclear norm
        worst_a2 = max(worst_a2, np.abs(_svals(Z) - _svals(X)).sum() - W.norm(Z - X))
        s = int(rng.integers(1, n + 1))
        lower = -sv[:s].sum() + sv[s:].sum()
        V = sum(rng.standard_normal() * np.outer(rng.standard_normal(n), rng.standard_normal(n))
                for _ in range(s))
        worst_a6 = max(worst_a6, lower - (W.norm(Z - V) - W.norm(V)))
        Zs = W.assemble(W.best_s_approx(Z, s))
        worst_eq = max(worst_eq, abs(W.norm(Z - Zs) - W.norm(Zs) - lower))
    elapsed = time.perf_counter() - t0
    ok = (worst_norm <= 1e-9 and worst_tail <= 1e-9 and worst_a2 <= 1e-8 and worst_a6 <= 1e-8
          and worst_eq <= 1e-8 and elapsed < 30)
    record_acceptance(2, "nuclear norm, tails and singular-value inequalities", ok,
                      f"norm {worst_norm:.1e}, tail {worst_tail:.1e}, lipschitz {worst_a2:.1e}, "
                      f"split {worst_a6:.1e}, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 3: solver exactness


def test_c3_solver_matches_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for i in range(200):
        d = int(rng.integers(4, 11))
        m = int(rng.integers(d - 3, d)) if d > 3 else d - 1
        m = max(m, 1)
        A = rng.standard_normal((m, d))
        if i % 2:
            y = rng.standard_normal(m)
        else:
            z = np.zeros(d)
            z[rng.choice(d, size=min(2, d), replace=False)] = rng.standard_normal(min(2, d))
            y = A @ z
        res = solve_min_atomic(CanonicalBasis(d), A, y)
        x_or = exhaustive_l1_oracle(A, y)
        ref = np.abs(x_or).sum()
        worst = max(worst, abs(res.objective - ref) / max(ref, 1e-12))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 120
    record_acceptance(3, "solver objective matches enumeration oracle", ok,
                      f"200 instances, worst rel gap {worst:.1e}, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 4: NSP <=> exact recovery


def test_c4_nsp_both_directions():
    t0 = time.perf_counter()
    n_true = n_false = 0
    problems = []
    for i in range(50):
        rng = np.random.default_rng(400 + i)
        d = 4 + i % 5
        s = 1 + (i // 5) % 2
        m = int(rng.integers(max(2, d // 2), d))
        A = MeasurementOperator(rng.standard_normal((m, d)))
        W = CanonicalBasis(d)
        cert = check_plain_nsp(W, A, s)
        if cert.method != EXACT:
            problems.append(f"instance {i}: certificate not exact")
            continue
        if cert.holds:
            n_true += 1
            for _ in range(100):
                z0 = W.random_sparse(s, rng)[0]
                zh = solve_min_atomic(W, A, A(z0)).z_hat
                if np.linalg.norm(zh - z0) > 1e-6 * np.linalg.norm(z0):
                    problems.append(f"instance {i}: sparse signal not recovered")
                    break
        else:
            n_false += 1
            z, v = cert.witness["z"], cert.witness["v"]
            alt = v - z
            feasible = np.linalg.norm(A(z)) <= 1e-9 * max(1.0, np.linalg.norm(z))
            sparse = np.count_nonzero(np.abs(v) > 1e-12) <= s
            no_larger = W.norm(alt) <= W.norm(v) + 1e-8
            distinct = np.linalg.norm(z) > 1e-9
            solved = solve_min_atomic(W, A, A(v)).objective <= W.norm(v) + 1e-8
            if not (feasible and sparse and no_larger and distinct and solved):
                problems.append(f"instance {i}: witness does not give a failure")
    elapsed = time.perf_counter() - t0
    ok = not problems and n_true > 0 and n_false > 0 and elapsed < 300
    record_acceptance(4, "null space property holds iff sparse recovery succeeds", ok,
                      f"{n_true} hold, {n_false} fail, {len(problems)} problems, {elapsed:.1f}s")
    assert ok, problems


# ---------------------------------------------------------------- 5: error bounds


BOUND_CORPUS = [
    dict(atoms="canonical:3", null_space="1,1,1", s=[1], eps=0.01, trials=600),
    dict(atoms="rank1:3x3", null_space="1,0,0,0,1,0,0,0,1", s=[1], eps=0.01, trials=200),
    dict(atoms="canonical:8", m=[6], s=[1], eps=0.05, trials=200, seed=5),
]


def test_c5_bound_verification():
    t0 = time.perf_counter()
    total = {"stable": 0, "robust": 0, "strong": 0, "robust_sampled": 0}
    trials, refused, consts = 0, [], []
    for spec in BOUND_CORPUS:
        cfg = ExperimentConfig(kind="verify", signal="compressible", tau_samples=2000, workers=4, **spec)
        res = run_experiment(cfg)
        trials += len(res.records)
        if res.refused:
            refused.append(spec["atoms"])
        for block in res.summary["per_s"].values():
            consts.append(block["constants"])
            for k in total:
                total[k] += block["violations"][k]
    elapsed = time.perf_counter() - t0
    ok = sum(total.values()) == 0 and not refused and trials >= 1000 and elapsed < 300
    record_acceptance(5, "no error-bound violations on certified instances", ok,
                      f"{trials} trials, violations {total}, refused {refused}, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 6: width calibration


def test_c6_width_calibration():
    t0 = time.perf_counter()
    z_sphere = []
    for d in (1, 2, 8):
        w = gaussian_width(CanonicalBasis(d), rho=0.0, samples=10_000, seed=d)
        z_sphere.append(abs(w.mean - sphere_width(d)) / w.stderr)
    S = SRho(CanonicalBasis(16), 2, 0.9)
    g = gaussian_width(S, samples=10_000, seed=60)
    e = empirical_width(EnsembleSpec("gaussian"), S, 64, outer_samples=10_000, seed=61)
    z_emp = abs(g.mean - e.mean) / math.hypot(g.stderr, e.stderr)
    elapsed = time.perf_counter() - t0
    ok = max(z_sphere) <= 3 and z_emp <= 3 and elapsed < 180
    record_acceptance(6, "Monte Carlo widths match closed forms and each other", ok,
                      f"sphere z-scores {', '.join(f'{z:.2f}' for z in z_sphere)}; "
                      f"S_rho {g.mean:.4f} vs {e.mean:.4f} (z {z_emp:.2f}), {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 7: small-ball lower bound


def test_c7_mendelson():
    t0 = time.perf_counter()
    ens = EnsembleSpec("gaussian")
    alpha = estimate_params(ens, 16, seed=0).alpha
    rep = mendelson_check(ens, CanonicalBasis(16), 0.9, 2, 64, alpha / 4, 2.0, trials=200, seed=7)
    elapsed = time.perf_counter() - t0
    need = 1 - math.exp(-2) - 0.05
    ok = rep["fraction"] >= need and elapsed < 300
    record_acceptance(7, "small-ball inequality holds with the advertised probability", ok,
                      f"fraction {rep['fraction']:.3f} >= {need:.3f}, rhs {rep['rhs']:.3g}, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 8: minimum measurements


def test_c8_min_measurements():
    t0 = time.perf_counter()
    bound = min_measurement_bound(3, 16)
    below = [m for m in range(0, 17) if m < bound]
    fails = 0
    for i in range(100):
        m = below[i % len(below)]
        A = sample_operator(EnsembleSpec("gaussian"), m, 16, seed=800 + i)
        cert = check_plain_nsp(CanonicalBasis(16), A, 3)
        fails += cert.method == EXACT and cert.holds is False
    cfg = ExperimentConfig(kind="min_measure", atoms="canonical:16", s=[3], m=[0, 2, 4, 6, 8, 10, 12, 16],
                           trials=4, recoveries=10, seed=8, workers=4)
    summ = run_experiment(cfg).summary
    elapsed = time.perf_counter() - t0
    m_star = summ["m_star"]
    ok = fails == 100 and m_star is not None and m_star >= bound and elapsed < 300
    record_acceptance(8, "no operator below the measurement bound certifies; transition above it", ok,
                      f"bound {bound:.3f}, {fails}/100 fail below, m* {m_star}, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 9: NSP emerges for random operators


def test_c9_nsp_emergence():
    t0 = time.perf_counter()
    d, s = 12, 1
    m = math.ceil(4 * s * math.log(d))
    good = 0
    for i in range(100):
        A = sample_operator(EnsembleSpec("gaussian"), m, d, seed=900 + i)
        cert = stable_rho(CanonicalBasis(d), A, s)
        good += cert.method == EXACT and cert.constants["rho"] < 0.9
    elapsed = time.perf_counter() - t0
    ok = good >= 90 and elapsed < 300
    record_acceptance(9, f"m = {m} Gaussian measurements give rho < 0.9 in most trials", ok,
                      f"{good}/100, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 10: reproducibility


@pytest.mark.parametrize("kind,extra", [
    ("phase", dict(atoms="canonical:10", m=[3, 6, 9], s=[1, 2], trials=6)),
    ("verify", dict(atoms="canonical:3", null_space="1,1,1", s=[1], eps=0.01, trials=40,
                    signal="compressible", tau_samples=500)),
    ("min_measure", dict(atoms="canonical:8", m=[2, 5, 8], s=[3], trials=3, recoveries=3)),
])
def test_c10_reproducible_across_workers(tmp_path, kind, extra):
    outs = []
    for w in (1, 8):
        cfg = ExperimentConfig(kind=kind, seed=10, workers=w, **extra)
        path = tmp_path / f"{kind}_{w}.csv"
        emit(run_experiment(cfg), str(path), config=cfg)
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1] and outs[0].count(b"\n") > 1
    record_acceptance(10, f"{kind} CSV byte-identical with 1 and 8 workers", ok,
                      f"{len(outs[0])} bytes")
    assert ok

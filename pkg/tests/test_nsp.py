import math

import numpy as np
import pytest

from atomrec import (CanonicalBasis, FiniteFrame, MeasurementOperator, RankOneManifold, check_plain_nsp,
                     check_s_even, check_splittable, min_measurement_bound, ring_frame, robust_params,
                     stable_rho, strong_constant, theoretical_bound)
from atomrec.nsp import EXACT, SAMPLED, _split_gap, unrestricted_ratio_witness


def _null_op(*vectors):
    return MeasurementOperator.from_null_space(np.column_stack(vectors))


def _ratio(aset, z, s):
    t = aset.tail(z, s)
    return aset.norm(t.approx) / t.value


# ---------------------------------------------------------------- stable rho


def test_rho_ones_null_space(canon3, ones_op):
    cert = stable_rho(canon3, ones_op, 1)
    assert cert.method == EXACT and cert.holds
    assert cert.constants["rho"] == pytest.approx(0.5, abs=1e-12)


def test_rho_trivial_null_space():
    cert = stable_rho(CanonicalBasis(3), np.eye(3), 2)
    assert cert.holds and cert.constants["rho"] == 0


def test_rho_coordinate_null_space(canon3):
    cert = stable_rho(canon3, _null_op([1.0, 0, 0]), 1)
    assert cert.holds is False and math.isinf(cert.constants["rho"])
    assert np.allclose(np.abs(cert.witness["z"]), [1, 0, 0])


def test_rho_witness_reproduces_constant():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        A = MeasurementOperator(rng.standard_normal((5, 7)))
        W = CanonicalBasis(7)
        for s in (1, 2):
            cert = stable_rho(W, A, s)
            assert _ratio(W, cert.witness["z"], s) == pytest.approx(cert.constants["rho"], abs=1e-8)


def test_rho_dominates_sampled_ratios_and_is_monotone_in_s():
    rng = np.random.default_rng(3)
    W = CanonicalBasis(6)
    A = MeasurementOperator(rng.standard_normal((4, 6)))
    rhos = [stable_rho(W, A, s).constants["rho"] for s in (1, 2, 3)]
    assert rhos[0] <= rhos[1] <= rhos[2]
    a = rng.standard_normal((20_000, 2))
    Z = a @ A.null_basis.T
    for s, rho in zip((1, 2), rhos):
        srt = np.sort(np.abs(Z), axis=1)[:, ::-1]
        emp = np.max(srt[:, :s].sum(axis=1) / srt[:, s:].sum(axis=1))
        assert emp <= rho + 1e-9
        assert emp >= rho * (1 - 1e-2)


def test_rank_one_rho_exact_small_null_space():
    W = RankOneManifold(3, 3)
    cert = stable_rho(W, _null_op(np.eye(3).ravel()), 1)
    assert cert.method == EXACT and cert.holds
    assert cert.constants["rho"] == pytest.approx(0.5, abs=1e-9)
    A = _null_op(np.eye(3).ravel(), np.diag([1.0, -1.0, 0.0]).ravel())
    cert = stable_rho(W, A, 1)
    z = cert.witness["z"].reshape(3, 3)
    assert _ratio(W, z, 1) == pytest.approx(cert.constants["rho"], abs=1e-8)


def test_frame_rho_is_sampled(frame8):
    A = MeasurementOperator(np.array([[1.0, 0.5]]))
    cert = stable_rho(frame8, A, 1, samples=200)
    assert cert.method == SAMPLED and cert.holds is not True


# ---------------------------------------------------------------- plain NSP


def test_plain_nsp_examples(canon3, ones_op, rank22):
    assert check_plain_nsp(canon3, ones_op, 1).holds
    assert check_plain_nsp(canon3, np.eye(3), 1).holds
    cert = check_plain_nsp(rank22, _null_op(np.diag([1.0, -1.0]).ravel()), 1)
    assert cert.method == EXACT and cert.holds is False


def test_plain_failure_witness_gives_competing_solution():
    rng = np.random.default_rng(8)
    W = CanonicalBasis(6)
    A = MeasurementOperator(rng.standard_normal((3, 6)))
    cert = check_plain_nsp(W, A, 2)
    assert cert.holds is False
    z, v = cert.witness["z"], cert.witness["v"]
    assert np.linalg.norm(A(z)) <= 1e-10
    assert W.norm(z - v) <= W.norm(v) + 1e-8


def test_plain_and_strong_agree_on_canonical():
    for seed in range(8):
        rng = np.random.default_rng(100 + seed)
        A = MeasurementOperator(rng.standard_normal((4, 6)))
        W = CanonicalBasis(6)
        p = check_plain_nsp(W, A, 1)
        c = strong_constant(W, A, 1)
        assert p.holds == (c.constants["c"] > 1e-12)


def test_sampled_certificates_never_affirm(frame8):
    A = MeasurementOperator(np.array([[1.0, 2.0]]))
    cert = check_plain_nsp(frame8, A, 1, samples=100)
    assert cert.holds is not True
    assert strong_constant(frame8, A, 1, samples=50).holds is not True


# ---------------------------------------------------------------- strong constant


def test_strong_examples(canon3, ones_op, rank22):
    cert = strong_constant(canon3, ones_op, 1)
    assert cert.method == EXACT
    assert cert.constants["c"] == pytest.approx(1 / math.sqrt(3), abs=1e-12)
    assert math.isinf(strong_constant(canon3, np.eye(3), 1).constants["c"])
    cert = strong_constant(rank22, _null_op(np.diag([1.0, -1.0]).ravel()), 1)
    assert cert.constants["c"] == pytest.approx(0, abs=1e-12) and not cert.holds


def test_strong_witness_and_sampled_lower_check():
    rng = np.random.default_rng(4)
    W = CanonicalBasis(5)
    A = MeasurementOperator(rng.standard_normal((3, 5)))
    cert = strong_constant(W, A, 1)
    z = cert.witness["z"]
    t = W.tail(z, 1)
    assert t.value - W.norm(t.approx) == pytest.approx(cert.constants["c"], abs=1e-8)
    Z = rng.standard_normal((20_000, 2)) @ A.null_basis.T
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    srt = np.sort(np.abs(Z), axis=1)[:, ::-1]
    emp = np.min(srt[:, 1:].sum(axis=1) - srt[:, 0])
    assert cert.constants["c"] <= emp + 1e-9


def test_rank_one_strong_inequality_for_sampled_rank_one_v():
    # tail - head bounds ||Z - V||_* - ||V||_* from below for every rank-s V
    W = RankOneManifold(3, 3)
    A = _null_op(np.diag([2.0, 1.0, 1.0]).ravel())
    c = strong_constant(W, A, 1).constants["c"]
    z = A.null_basis[:, 0].reshape(3, 3)
    rng = np.random.default_rng(0)
    for _ in range(2000):
        V = rng.standard_normal() * np.outer(rng.standard_normal(3), rng.standard_normal(3))
        assert W.norm(z - V) - W.norm(V) >= c * np.linalg.norm(z) - 1e-9


# ---------------------------------------------------------------- robust parameters


def test_robust_ones_instance(canon3, ones_op):
    exact = robust_params(canon3, ones_op, 1, 0.75)
    assert exact.method == EXACT and np.isfinite(exact.constants["tau"])
    t1 = robust_params(canon3, ones_op, 1, 0.75, method="sampled", samples=2000, seed=1).constants["tau"]
    t2 = robust_params(canon3, ones_op, 1, 0.75, method="sampled", samples=2000, seed=2).constants["tau"]
    assert abs(t1 - t2) <= 0.1 * max(t1, t2)
    assert max(t1, t2) <= exact.constants["tau"] + 1e-8
    # below the stable constant no finite tau exists
    assert math.isinf(robust_params(canon3, ones_op, 1, 0.4).constants["tau"])


def test_robust_cap_for_injective_operator():
    rng = np.random.default_rng(9)
    M = rng.standard_normal((6, 4))
    A = MeasurementOperator(M)
    W = CanonicalBasis(4)
    cap = W.equivalence_constant() / A.singular_values[-1]
    ex = robust_params(W, A, 1, 0.5).constants["tau"]
    sm = robust_params(W, A, 1, 0.5, method="sampled", samples=2000).constants["tau"]
    assert 0 <= sm <= ex + 1e-8 <= cap + 1e-8


def test_robust_dual_multiplier_certifies_bound(canon3, ones_op):
    cert = robust_params(canon3, ones_op, 1, 0.75)
    rng = np.random.default_rng(0)
    tau, rho = cert.constants["tau"], 0.75
    for _ in range(5000):
        z = rng.standard_normal(3)
        t = canon3.tail(z, 1)
        assert np.abs(t.approx).sum() <= rho * t.value + tau * np.linalg.norm(ones_op(z)) + 1e-9


def test_robust_rejects_bad_target(canon3, ones_op):
    with pytest.raises(ValueError):
        robust_params(canon3, ones_op, 1, 1.0)
    with pytest.raises(ValueError):
        robust_params(RankOneManifold(2, 2), np.eye(4), 1, 0.5, method="exact")


# ---------------------------------------------------------------- structure


def test_impossibility_of_unrestricted_ratio(canon3, ones_op):
    z, v, r = unrestricted_ratio_witness(canon3, ones_op, 1, rho=0.9)
    assert r > 0.9 and np.allclose(ones_op(z), 0, atol=1e-12)


@pytest.mark.parametrize("aset", [CanonicalBasis(4), RankOneManifold(2, 3)], ids=repr)
def test_splittable_analytic(aset):
    rep = check_splittable(aset, 1, trials=500)
    assert rep.verdict == "AnalyticTrue" and rep.violation <= 1e-8


def test_split_gap_symmetric_pair(frame8, rng):
    for aset in (frame8, CanonicalBasis(3)):
        for _ in range(50):
            x = rng.standard_normal(aset.shape)
            assert _split_gap(aset, x, -x, 1) <= 1e-12


def test_frame_splittability_counterexample_is_real(frame8):
    rep = check_splittable(frame8, 1, trials=2000)
    assert rep.verdict == "Falsified"
    x, y = rep.counterexample
    assert _split_gap(frame8, x, y, 1) == pytest.approx(rep.violation) and rep.violation > 1e-8


def test_s_even():
    assert check_s_even(CanonicalBasis(4), 4).verdict == "AnalyticTrue"
    assert check_s_even(ring_frame(8), 1).verdict in ("AnalyticTrue", "PassedSampling")
    F = FiniteFrame(np.array([[1.0, 0.0, 1 / math.sqrt(2)], [0.0, 1.0, 1 / math.sqrt(2)]]))
    rep = check_s_even(F, 2)
    assert rep.verdict == "Falsified"
    z, signs = rep.counterexample
    assert len(signs) - F.norm(z) > 1e-8


# ---------------------------------------------------------------- bounds


def test_bound_arithmetic():
    assert theoretical_bound("stable", None, None, 1, 0.0, 0.3, {"rho": 1 / 3}) == pytest.approx(1.2)
    assert theoretical_bound("robust", None, None, 1, 0.05, 0.1, {"rho": 0.5, "tau": 2.0}) == pytest.approx(1.4)
    W = CanonicalBasis(3)
    A = MeasurementOperator.from_null_space(np.ones(3))
    assert theoretical_bound("strong", W, A, 1, 0.0, 0.0, {"c": 1 / math.sqrt(3)}) == 0
    # noise term of the stable bound uses C_W / nu
    val = theoretical_bound("stable", W, A, 1, 0.1, 0.0, {"rho": 0.5})
    assert val == pytest.approx(4 * math.sqrt(3) / 0.5 * 0.1)
    val = theoretical_bound("stable", W, A, 1, 0.1, 0.0, {"rho": 0.5}, loose_constant=True)
    assert val == pytest.approx(4 * math.sqrt(3) / 0.5 * 0.1)


def test_bound_errors():
    with pytest.raises(ValueError):
        theoretical_bound("stable", None, None, 1, 0, 0.1, {"rho": 1.0})
    with pytest.raises(ValueError):
        theoretical_bound("robust", None, None, 1, 0, 0.1, {"rho": 0.5})
    with pytest.raises(ValueError):
        theoretical_bound("strong", None, None, 1, 0, 0.1, {"c": 0.0})
    with pytest.raises(ValueError):
        theoretical_bound("bogus", None, None, 1, 0, 0.1, {})


def test_min_measurement_bound():
    assert min_measurement_bound(4, 64) == pytest.approx(0.9464, abs=1e-4)
    assert min_measurement_bound(4, 8) == 0
    assert min_measurement_bound(10, 10_000) == pytest.approx(7.071, abs=1e-3)
    assert min_measurement_bound(3, 16) == pytest.approx(0.3348, abs=1e-4)
    for s, N in ((2, 64), (5, 9)):
        with pytest.raises(ValueError):
            min_measurement_bound(s, N)

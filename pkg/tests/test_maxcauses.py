import numpy as np
import pytest
from scipy import integrate

from truncem import BSC, MCA, MMCA, seeded_rng
from truncem.core import DataSet
from truncem.models.maxcauses import W_MIN, effective_weight, soft_winner, winner_indicator
from truncem.parallel import SuffStats

from oracles import all_states


def test_effective_weight_examples():
    W = np.array([[1.0, 3.0], [2.0, 1.0]])
    np.testing.assert_array_equal(effective_weight(W, [1, 1], "max"), [3.0, 2.0])
    W2 = np.array([[-5.0, 3.0], [2.0, -1.0]])
    np.testing.assert_array_equal(effective_weight(W2, [1, 1], "absmax"), [-5.0, 2.0])
    for mode in ("max", "absmax"):
        np.testing.assert_array_equal(effective_weight(W2, [0, 1], mode), W2[:, 1])
        np.testing.assert_array_equal(effective_weight(W2, [0, 0], mode), [0.0, 0.0])


def test_effective_weight_ties_go_to_smaller_index():
    W = np.array([[2.0, -2.0]])
    assert effective_weight(W, [1, 1], "absmax")[0] == 2.0


def test_winner_indicator():
    W = np.array([[1.0, 3.0], [2.0, 1.0]])
    A = winner_indicator(W, [1, 1], "max")
    np.testing.assert_array_equal(A, [[0, 1], [1, 0]])
    np.testing.assert_array_equal(winner_indicator(W, [0, 1], "max"), [[0, 1], [0, 1]])
    rng = np.random.default_rng(0)
    W3 = rng.normal(size=(6, 4))
    for s in all_states(4)[1:]:
        A = winner_indicator(W3, s, "absmax")
        np.testing.assert_array_equal(A.sum(axis=1), 1.0)
        assert np.all(A[:, s == 0] == 0)
    with pytest.raises(ValueError):
        winner_indicator(W, [0, 0])


def test_soft_winner_limits():
    W = np.array([[1.0, 3.0], [2.0, 1.0]])
    A = soft_winner(W, np.array([1.0, 1.0]), rho=200.0)
    np.testing.assert_allclose(A, [[0, 1], [1, 0]], atol=1e-12)
    np.testing.assert_allclose(soft_winner(W, np.array([1.0, 1.0]), rho=1.0).sum(axis=-1), 1.0)


@pytest.mark.parametrize("cls", [MCA, MMCA])
def test_log_joint_nesting_with_bsc(cls):
    rng = np.random.default_rng(1)
    W = np.abs(rng.normal(size=(4, 3))) + 0.1
    p = {"W": W, "sigma2": 0.6, "pi": 0.3}
    y = rng.normal(size=4)
    m, b = cls(4, 3, 3, 3), BSC(4, 3, 3, 3)
    for s in [np.zeros(3), np.eye(3)[0], np.eye(3)[2]]:
        assert m.log_joint(p, y, s) == pytest.approx(b.log_joint(p, y, s), abs=1e-12)


@pytest.mark.parametrize("cls", [MCA, MMCA])
def test_joint_normalizes(cls):
    m = cls(1, 3, 3, 3)
    p = {"W": np.array([[0.5, 2.0, -1.0 if cls is MMCA else 1.2]]), "sigma2": 0.7, "pi": 0.35}
    total = sum(integrate.quad(lambda y: np.exp(m.log_joint(p, np.array([y]), s)), -30, 30, limit=200)[0]
                for s in all_states(3))
    assert total == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("cls", [MCA, MMCA])
def test_batched_log_joints_match_direct(cls):
    rng = np.random.default_rng(2)
    m = cls(5, 4, 4, 4)
    W = rng.normal(size=(5, 4))
    p = {"W": np.abs(W) if cls is MCA else W, "sigma2": 0.9, "pi": 0.25}
    Y = rng.normal(size=(6, 5))
    S = np.broadcast_to(all_states(4), (6, 16, 4))
    direct = np.array([[m.log_joint(p, y, s) for s in S[0]] for y in Y])
    np.testing.assert_allclose(m.log_joints(p, Y, S), direct, atol=1e-11)


def test_exact_estep_credit_matches_enumeration():
    rng = np.random.default_rng(3)
    m = MMCA(5, 4, 4, 4)
    p = {"W": rng.normal(size=(5, 4)) * 2, "sigma2": 0.8, "pi": 0.3}
    Y = rng.normal(size=(9, 5))
    stats = m.estep(p, DataSet(Y))
    S = all_states(4)
    lj = np.array([[m.log_joint(p, y, s) for s in S] for y in Y])
    q = np.exp(lj - np.log(np.exp(lj).sum(1, keepdims=True)))
    num = np.zeros((5, 4))
    den = np.zeros((5, 4))
    for n in range(len(Y)):
        for k, s in enumerate(S[1:], 1):
            A = winner_indicator(p["W"], s, "absmax")
            num += q[n, k] * A * Y[n][:, None]
            den += q[n, k] * A
    np.testing.assert_allclose(stats["num"], num, atol=1e-12)
    np.testing.assert_allclose(stats["den"], den, atol=1e-12)


def test_mstep_single_point_singleton():
    m = MCA(3, 2, 2, 2)
    y = np.array([1.0, -2.0, 0.5])
    A = np.zeros((3, 2))
    A[:, 0] = 1
    stats = SuffStats({"num": A * y[:, None], "den": A, "n_active": 1.0, "yy": y @ y}, 1)
    old = {"W": np.full((3, 2), 0.3), "sigma2": 1.0, "pi": 0.5}
    new = m.mstep(stats, old)
    np.testing.assert_allclose(new["W"][:, 0], np.maximum(y, W_MIN))
    # no evidence for unit 2: entries retained
    np.testing.assert_array_equal(new["W"][:, 1], old["W"][:, 1])
    mm = MMCA(3, 2, 2, 2).mstep(stats, old)
    np.testing.assert_allclose(mm["W"][:, 0], y)


def test_gamma_one_matches_bsc_update_direction():
    # with only singleton states the winner credit is the posterior of that singleton,
    # so the fixed point equals the BSC update restricted to diagonal second moments
    rng = np.random.default_rng(4)
    W = np.abs(rng.normal(size=(6, 3))) + 0.5
    p = {"W": W, "sigma2": 0.5, "pi": 0.2}
    Y = MCA(6, 3, 2, 1).generate(p, 200, seeded_rng(0))["y"]
    mca, bsc = MCA(6, 3, 3, 1), BSC(6, 3, 3, 1)
    st_m, st_b = mca.estep(p, DataSet(Y)), bsc.estep(p, DataSet(Y))
    np.testing.assert_allclose(st_b["ss"], np.diag(np.diag(st_b["ss"])), atol=1e-15)
    W_bsc = st_b["ys"] / np.diag(st_b["ss"])
    np.testing.assert_allclose(mca.mstep(st_m, p)["W"], W_bsc, rtol=1e-10)
    new_b = bsc.mstep(st_b, p)
    np.testing.assert_allclose(mca.mstep(st_m, p)["W"], new_b["W"], rtol=1e-7)
    assert mca.mstep(st_m, p)["pi"] == pytest.approx(new_b["pi"], rel=1e-12)
    assert mca.mstep(st_m, p)["sigma2"] == pytest.approx(new_b["sigma2"], rel=1e-7)


def test_mca_weights_stay_nonnegative():
    rng = np.random.default_rng(5)
    Y = rng.normal(size=(200, 6)) - 1.0
    m = MCA(6, 4, 3, 2)
    p = m.standard_init(Y, seeded_rng(1))
    assert np.all(p["W"] >= W_MIN)
    for _ in range(5):
        p, _ = m.step(None, p, Y)
        assert np.all(p["W"] >= W_MIN)
    p2 = m.perturb(p, 5.0, seeded_rng(0))
    assert np.all(p2["W"] >= W_MIN)


def test_winners_deterministic():
    rng = np.random.default_rng(6)
    m = MMCA(5, 4, 3, 2)
    p = {"W": rng.normal(size=(5, 4)), "sigma2": 1.0, "pi": 0.3}
    Y = rng.normal(size=(40, 5))
    a, b = m.estep(p, DataSet(Y)), m.estep(p, DataSet(Y))
    np.testing.assert_array_equal(a["num"], b["num"])


def test_soft_winner_option_runs():
    from truncem.annealing import LinearAnnealing

    rng = np.random.default_rng(7)
    Y = np.abs(rng.normal(size=(100, 6)))
    m = MCA(6, 3, 3, 2, rho=5.0)
    p = m.standard_init(Y, seeded_rng(0))
    new, F = m.step(None, p, Y)
    assert np.isfinite(F) and np.all(new["W"] >= W_MIN)
    a = LinearAnnealing(10, extra={"rho": [(0, 2.0), (1, 30.0)]})
    new2, _ = MCA(6, 3, 3, 2).step(a, p, Y)
    assert np.all(np.isfinite(new2["W"]))


def test_generate_max_rule():
    W = np.array([[1.0, 3.0], [2.0, 1.0]])
    out = MCA(2, 2, 2, 2).generate({"W": W, "sigma2": 1e-20, "pi": 1 - 1e-6}, 10, seeded_rng(0))
    np.testing.assert_allclose(out["y"][np.all(out["s"] == 1, axis=1)], [[3.0, 2.0]] * int(np.all(out["s"] == 1, axis=1).sum()), atol=1e-8)

import time

import numpy as np
import pytest

from truncem import BSC, GSC, seeded_rng
from truncem.core import DataSet
from truncem.parallel import SuffStats

from oracles import (
    all_states,
    gsc_expected_complete_ll,
    gsc_log_joint_direct,
    gsc_marginal_quadrature,
    gsc_posteriors,
)


def random_gsc(rng, D, H):
    return {
        "W": rng.normal(size=(D, H)),
        "sigma2": float(rng.uniform(0.5, 2.0)),
        "pi": float(rng.uniform(0.1, 0.6)),
        "mu": rng.normal(size=H),
        "psi": rng.uniform(0.5, 2.0, size=H),
    }


def test_empty_support():
    m = GSC(3, 4, 2, 2)
    p = {"W": np.ones((3, 4)), "sigma2": 2.0, "pi": 0.2, "mu": np.zeros(4), "psi": np.ones(4)}
    y = np.array([1.0, 0.0, -1.0])
    logm, kappa, Lam = m.support_posterior(p, y, [])
    expected = -1.5 * np.log(2 * np.pi * 2.0) - (y @ y) / 4.0 + 4 * np.log(0.8)
    assert logm == pytest.approx(expected, abs=1e-12)
    assert kappa.shape == (0,) and Lam.shape == (0, 0)


def test_single_unit_arithmetic():
    m = GSC(2, 1, 1, 1)
    p = {"W": np.array([[1.0], [0.0]]), "sigma2": 1.0, "pi": 0.5, "mu": np.zeros(1), "psi": np.ones(1)}
    _, kappa, Lam = m.support_posterior(p, np.array([2.0, 0.0]), [0])
    assert Lam[0, 0] == pytest.approx(0.5)
    assert kappa[0] == pytest.approx(1.0)


def test_marginal_matches_dense_covariance():
    rng = np.random.default_rng(0)
    m = GSC(5, 4, 4, 4)
    p = random_gsc(rng, 5, 4)
    y = rng.normal(size=5)
    for b in all_states(4):
        got = m.log_joint(p, y, b)
        assert got == pytest.approx(gsc_log_joint_direct(y, b, p["W"], p["sigma2"], p["pi"], p["mu"], p["psi"]), abs=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_marginal_matches_quadrature(seed):
    rng = np.random.default_rng(seed)
    m = GSC(2, 2, 2, 2)
    p = random_gsc(rng, 2, 2)
    y = rng.normal(size=2) * 1.5
    for A in ([0], [1], [0, 1]):
        logm, _, _ = m.support_posterior(p, y, A)
        k = len(A)
        prior = k * np.log(p["pi"]) + (2 - k) * np.log(1 - p["pi"])
        quad = gsc_marginal_quadrature(y, p["W"][:, A], p["sigma2"], p["mu"][A], p["psi"][A])
        assert np.exp(logm - prior) == pytest.approx(quad, rel=1e-6)


def test_selection_scores_are_singleton_marginals():
    rng = np.random.default_rng(1)
    m = GSC(6, 5, 3, 2)
    p = random_gsc(rng, 6, 5)
    Y = rng.normal(size=(4, 6))
    scores = m.selection_scores(p, Y)
    for n, y in enumerate(Y):
        singles = np.array([m.support_posterior(p, y, [h])[0] for h in range(5)])
        np.testing.assert_allclose(scores[n] - scores[n, 0], singles - singles[0], atol=1e-10)


def test_exact_estep_matches_enumeration():
    rng = np.random.default_rng(2)
    m = GSC(4, 4, 4, 4)
    p = random_gsc(rng, 4, 4)
    Y = rng.normal(size=(10, 4)) * 2
    stats = m.estep(p, DataSet(Y))
    B, q, ll, moments = gsc_posteriors(Y, p)
    Es = np.zeros(4)
    Ess = np.zeros((4, 4))
    Eb = q.sum(0) @ B
    Eys = np.zeros((4, 4))
    for n in range(len(Y)):
        mean_n = sum(q[n, k] * moments[n][k][0] for k in range(len(B)))
        Es += mean_n
        Eys += np.outer(Y[n], mean_n)
        Ess += sum(q[n, k] * (moments[n][k][1] + np.outer(moments[n][k][0], moments[n][k][0])) for k in range(len(B)))
    np.testing.assert_allclose(stats["s"], Es, atol=1e-12)
    np.testing.assert_allclose(stats["ss"], Ess, atol=1e-12)
    np.testing.assert_allclose(stats["ys"], Eys, atol=1e-12)
    np.testing.assert_allclose(stats["b"], Eb, atol=1e-12)
    assert stats["log_partition"] == pytest.approx(ll.sum(), abs=1e-10)


def test_per_point_covariance_psd():
    rng = np.random.default_rng(3)
    m = GSC(5, 6, 4, 3)
    p = random_gsc(rng, 5, 6)
    Y = rng.normal(size=(20, 5))
    for _, _, states, q, _, (kappa, Lam) in m.posterior_blocks(p, Y):
        for b in range(len(q)):
            mean = q[b] @ kappa[b]
            second = np.einsum("k,khg->hg", q[b], Lam[b]) + np.einsum("k,kh,kg->hg", q[b], kappa[b], kappa[b])
            assert np.linalg.eigvalsh(second - np.outer(mean, mean)).min() > -1e-10


def test_single_state_moments():
    m = GSC(3, 2, 1, 1)
    p = random_gsc(np.random.default_rng(4), 3, 2)
    y = np.array([0.3, -1.0, 2.0])
    states = np.array([[[0.0, 1.0]]])
    _, (kappa, Lam) = m.block_terms(p, y[None], states)
    arrays = m.accumulate(p, y[None], states, np.array([[1.0]]), aux=(kappa, Lam))
    _, k1, L1 = m.support_posterior(p, y, [1])
    np.testing.assert_allclose(arrays["s"], [0.0, k1[0]])
    assert arrays["ss"][1, 1] == pytest.approx(L1[0, 0] + k1[0] ** 2)


def test_mstep_no_evidence_keeps_slab():
    m = GSC(2, 2, 2, 2)
    old = {"W": np.eye(2), "sigma2": 1.0, "pi": 0.3, "mu": np.array([0.5, -1.0]), "psi": np.array([2.0, 3.0])}
    stats = SuffStats({"s": np.zeros(2), "ss": np.zeros((2, 2)), "ys": np.zeros((2, 2)), "yy": 4.0,
                       "b": np.zeros(2), "log_partition": 0.0}, 2)
    new = m.mstep(stats, old)
    assert new["pi"] == 1e-6
    np.testing.assert_array_equal(new["mu"], old["mu"])
    np.testing.assert_array_equal(new["psi"], old["psi"])


def test_symmetric_data_gives_zero_slab_mean():
    m = GSC(3, 2, 2, 2)
    p = {"W": np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]), "sigma2": 0.5, "pi": 0.4,
         "mu": np.zeros(2), "psi": np.ones(2)}
    y = np.array([1.0, 2.0, -0.5])
    new, _ = m.step(None, p, np.stack([y, -y]))
    np.testing.assert_allclose(new["mu"], 0.0, atol=1e-12)


def test_mstep_maximizes_expected_complete_ll():
    rng = np.random.default_rng(5)
    D, H = 4, 3
    m = GSC(D, H, H, H)
    p = random_gsc(rng, D, H)
    Y = m.generate(p, 30, seeded_rng(1))["y"]
    new = m.mstep(m.estep(p, DataSet(Y)), p)
    B, q, _, moments = gsc_posteriors(Y, p)

    def Q(t):
        return gsc_expected_complete_ll(Y, B, q, moments, t)

    best = Q(new)
    prng = np.random.default_rng(6)
    for _ in range(100):
        pert = {k: (v * (1 + 1e-3 * prng.normal(size=np.shape(v))) if np.ndim(v) else v * (1 + 1e-3 * prng.normal()))
                for k, v in new.items()}
        assert Q(pert) <= best + 1e-9 * abs(best)


def test_narrow_slab_limit_matches_bsc():
    rng = np.random.default_rng(7)
    D, H = 5, 3
    W = rng.normal(size=(D, H))
    gsc, bsc = GSC(D, H, H, H), BSC(D, H, H, H)
    pg = {"W": W, "sigma2": 0.8, "pi": 0.3, "mu": np.ones(H), "psi": np.full(H, 1e-8)}
    pb = {"W": W, "sigma2": 0.8, "pi": 0.3}
    y = rng.normal(size=D)
    for b in all_states(H):
        # the slab density contributes nothing once integrated; only the limit W mu = W b remains
        assert gsc.log_joint(pg, y, b) == pytest.approx(bsc.log_joint(pb, y, b), abs=1e-4)


def test_cost_independent_of_large_D():
    rng = np.random.default_rng(8)
    m = GSC(10_000, 3, 3, 3)
    p = random_gsc(rng, 10_000, 3)
    y = rng.normal(size=10_000)
    t0 = time.perf_counter()
    for _ in range(20):
        m.support_posterior(p, y, [0, 1, 2])
    elapsed = time.perf_counter() - t0
    # a D x D factorization would take orders of magnitude longer
    assert elapsed < 2.0


def test_generate_shapes_and_sparsity():
    m = GSC(4, 3, 2, 2)
    p = random_gsc(np.random.default_rng(9), 4, 3)
    out = m.generate(p, 5000, seeded_rng(0))
    assert out["y"].shape == (5000, 4)
    assert abs(out["b"].mean() - p["pi"]) < 0.03
    assert np.all(out["s"][out["b"] == 0] == 0)


def test_inference_outputs():
    rng = np.random.default_rng(10)
    m = GSC(4, 3, 3, 2)
    p = random_gsc(rng, 4, 3)
    res = m.inference(p, rng.normal(size=(7, 4)))
    assert res["s"].shape == (7, 3) and set(np.unique(res["s"])) <= {0.0, 1.0}
    assert np.all((res["p"] > 0) & (res["p"] <= 1))
    assert res["z"].shape == (7, 3)

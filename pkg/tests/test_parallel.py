import time

import numpy as np
import pytest

from truncem import BSC, DataSet, LinearAnnealing, ShardPlan, SuffStats, map_reduce, run, seeded_rng
from truncem.bars import generate_bars
from truncem.parallel import ShardError


def test_identity_is_bitwise_neutral():
    a = SuffStats({"x": np.array([0.1, 0.2]), "c": 3.0}, 4)
    for r in (a.combine(SuffStats()), SuffStats().combine(a), a + SuffStats()):
        np.testing.assert_array_equal(r["x"], a["x"])
        assert r.n == 4


def test_combine_is_associative_on_integers():
    a, b, c = (SuffStats({"x": np.array([float(i)])}, 1) for i in (1, 2, 3))
    assert ((a + b) + c)["x"][0] == (a + (b + c))["x"][0] == 6.0


def test_combine_rejects_mismatched_fields():
    with pytest.raises(ValueError):
        SuffStats({"x": 1.0}, 1).combine(SuffStats({"y": 1.0}, 1))


def test_serialization_round_trip():
    a = SuffStats({"x": np.arange(4.0).reshape(2, 2), "c": 1.5}, 3)
    b = SuffStats.from_dict(a.to_dict())
    assert b.n == 3 and np.array_equal(b["x"], a["x"])


def test_plan_even_sizes():
    plan = ShardPlan.even(10, 3)
    assert plan.boundaries == (0, 4, 7, 10)
    sizes = np.diff(plan.boundaries)
    assert sizes.max() - sizes.min() <= 1
    assert ShardPlan.even(2, 4).boundaries == (0, 1, 2, 2, 2)
    with pytest.raises(ValueError):
        ShardPlan((1, 4))


def _setup(seed=0):
    y, _, _ = generate_bars(4, 300, seed=seed)
    m = BSC(16, 8, 5, 3)
    return m, m.standard_init(y, seeded_rng(seed)), DataSet(y)


def test_workers_bitwise_equal_with_same_boundaries():
    m, p, data = _setup()
    fn = lambda params, shard: m.estep(params, shard)
    base = ShardPlan.even(data.N, 4, 1)
    ref = map_reduce(data, p, fn, base)
    for w in (2, 4):
        got = map_reduce(data, p, fn, base.with_workers(w))
        for k in ref.keys():
            np.testing.assert_array_equal(got[k], ref[k])


def test_single_worker_equals_direct_estep():
    m, p, data = _setup(1)
    direct = m.estep(p, data)
    got = map_reduce(data, p, lambda params, shard: m.estep(params, shard), ShardPlan.even(data.N, 1))
    for k in direct.keys():
        np.testing.assert_array_equal(got[k], direct[k])


def test_different_boundaries_agree_closely():
    m, p, data = _setup(2)
    fn = lambda params, shard: m.estep(params, shard)
    a = map_reduce(data, p, fn, ShardPlan.even(data.N, 1))
    b = map_reduce(data, p, fn, ShardPlan.even(data.N, 7, 3))
    for k in a.keys():
        np.testing.assert_allclose(b[k], a[k], rtol=1e-12, atol=1e-12 * np.max(np.abs(a[k])))


def test_empty_shards_contribute_identity():
    m, p, data = _setup(3)
    fn = lambda params, shard: m.estep(params, shard)
    a = map_reduce(data, p, fn, ShardPlan((0, data.N)))
    b = map_reduce(data, p, fn, ShardPlan((0, 0, data.N, data.N), 2))
    for k in a.keys():
        np.testing.assert_array_equal(a[k], b[k])


def test_shard_failure_names_shard():
    m, p, data = _setup(4)

    def fn(params, shard):
        if shard.N < 100:
            raise RuntimeError("boom")
        return m.estep(params, shard)

    with pytest.raises(ShardError) as err:
        map_reduce(data, p, fn, ShardPlan((0, 150, 200, 300), 2))
    assert err.value.shard == 1


def test_plan_must_cover_data():
    m, p, data = _setup(5)
    with pytest.raises(ValueError):
        map_reduce(data, p, lambda a, b: None, ShardPlan((0, 10)))


def test_training_trajectories_match_across_workers():
    m, p, data = _setup(6)
    traces = [run(m, p, data, LinearAnnealing(10), plan=ShardPlan.even(data.N, 4, w)).free_energy for w in (1, 2, 4)]
    assert traces[0] == traces[1] == traces[2]


def test_estep_time_scales_with_n():
    y, _, _ = generate_bars(5, 4000, seed=0)
    m = BSC(25, 10, 7, 4)
    p = m.standard_init(y, seeded_rng(0))

    def timed(n):
        d = DataSet(y[:n])
        best = np.inf
        for _ in range(3):
            t0 = time.perf_counter()
            m.estep(p, d)
            best = min(best, time.perf_counter() - t0)
        return best

    ratio = timed(4000) / timed(2000)
    assert 1.6 <= ratio <= 2.6

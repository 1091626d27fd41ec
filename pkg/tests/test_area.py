import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from acspeech.area import (ABS, HEBBIAN, Area, AreaConfig, ConfigError, ShapeError,
                           SnapshotVersionError, build_area, k_cap, overlap)


def sort_oracle(drive, k):
    """Full stable sort: larger drive first, lower index first among equals."""
    order = np.lexsort((np.arange(drive.size), -drive))
    return np.sort(order[:k])


def dense_drive_oracle(area, x):
    """Rebuild both weight matrices edge by edge and take plain dot products."""
    n = area.n
    ff = np.zeros((n, area.input_width))
    rec = np.zeros((n, n))
    for v in range(n):
        for s, w in zip(area.ff_src[v], area.ff_w[v]):
            ff[v, s] = w
        for s, w in zip(area.rec_src[v], area.rec_w[v]):
            rec[v, s] = w
    prev = np.zeros(n)
    prev[area.prev_assembly] = 1.0
    return ff @ x + rec @ prev - area.refractory_bias


def single_neuron(ff_src, ff_w, input_width, **cfg):
    ff_src = np.atleast_2d(ff_src)
    config = AreaConfig(n=ff_src.shape[0], k=1, k_in=ff_src.shape[1], **cfg)
    empty = np.zeros((ff_src.shape[0], 0))
    return Area(config, input_width, ff_src, np.atleast_2d(ff_w), empty.astype(np.int32), empty)


# -- construction ---------------------------------------------------------

def test_uniform_init_small_area():
    area = build_area(AreaConfig(n=4, k=1, k_in=2), 3)
    for v in range(4):
        assert len(set(area.ff_src[v].tolist())) == 2
    assert np.all(area.ff_w == 0.5)


def test_no_recurrence_means_empty_matrix():
    area = build_area(AreaConfig(n=10, k=2, k_in=3), 5)
    assert area.rec_w.size == 0
    assert not area.dense_weights()[1].any()


def test_same_seed_same_edges():
    cfg = AreaConfig(n=50, k=5, k_in=7, k_in_rec=9, seed=3, init="random")
    a, b = build_area(cfg, 20), build_area(cfg, 20)
    assert np.array_equal(a.ff_src, b.ff_src) and np.array_equal(a.rec_src, b.rec_src)
    assert np.array_equal(a.ff_w, b.ff_w)
    assert not np.array_equal(a.ff_src, build_area(cfg.replace(seed=4), 20).ff_src)


def test_recurrent_sources_are_distinct_and_exclude_self():
    area = build_area(AreaConfig(n=30, k=3, k_in=2, k_in_rec=29), 4)
    for v in range(30):
        srcs = area.rec_src[v].tolist()
        assert v not in srcs and len(set(srcs)) == 29


def test_config_errors():
    with pytest.raises(ConfigError):
        build_area(AreaConfig(n=4, k=1, k_in=5), 3)
    with pytest.raises(ConfigError):
        AreaConfig(n=4, k=5, k_in=1)
    with pytest.raises(ConfigError):
        AreaConfig(n=4, k=1, k_in=1, rule=ABS, beta=1.0)


# -- drive ------------------------------------------------------------------

def test_zero_input_gives_zero_drive():
    area = build_area(AreaConfig(n=20, k=3, k_in=4, k_in_rec=5), 10)
    assert not area.compute_drive(np.zeros(10)).any()


def test_dot_product_drive():
    area = single_neuron([[0, 1]], [[0.5, 0.5]], 5)
    assert area.compute_drive(np.array([1, 1, 0, 0, 0]))[0] == pytest.approx(1.0)


def test_width_mismatch():
    area = build_area(AreaConfig(n=5, k=1, k_in=2), 4)
    with pytest.raises(ShapeError):
        area.compute_drive(np.zeros(3))


@given(st.integers(0, 10_000), st.integers(5, 60), st.integers(3, 30))
def test_drive_matches_dense_oracle(seed, n, width):
    rng = np.random.default_rng(seed)
    cfg = AreaConfig(n=n, k=int(rng.integers(1, n + 1)), k_in=int(rng.integers(1, width + 1)),
                     k_in_rec=int(rng.integers(0, n)), rho=0.5, seed=seed, init="random")
    area = build_area(cfg, width)
    for _ in range(3):
        x = (rng.random(width) < 0.3).astype(float)
        np.testing.assert_allclose(area.compute_drive(x), dense_drive_oracle(area, x),
                                   rtol=0, atol=1e-12)
        area.step(x)


# -- k-cap --------------------------------------------------------------------

def test_k_cap_examples():
    assert k_cap(np.array([0.5, 2.0, 1.0, 0.1]), 2).tolist() == [1, 2]
    assert k_cap(np.ones(5), 2).tolist() == [0, 1]


@given(arrays(np.float64, st.integers(1, 64), elements=st.sampled_from([0.0, 0.5, 1.0, 2.0]))
       | arrays(np.float64, st.integers(1, 64), elements=st.floats(-1e6, 1e6)),
       st.data())
def test_k_cap_matches_sort_oracle(drive, data):
    k = data.draw(st.integers(1, drive.size))
    got = k_cap(drive, k)
    assert got.size == k
    assert np.array_equal(got, sort_oracle(drive, k))


# -- plasticity ----------------------------------------------------------------

def test_hebbian_then_normalise():
    area = single_neuron([[0, 1]], [[0.5, 0.5]], 2, beta=0.1)
    area.apply_plasticity(np.array([1, 0]), np.array([0]))
    np.testing.assert_allclose(area.ff_w[0], [0.55 / 1.05, 0.50 / 1.05])
    np.testing.assert_allclose(area.ff_w[0], [0.5238, 0.4762], atol=1e-4)


def test_abs_potentiates_and_depresses():
    # the two changes cancel in the sum, so the pre-normalisation values survive
    area = single_neuron([[0, 1]], [[0.5, 0.5]], 2, beta=0.1, rule=ABS)
    area.apply_plasticity(np.array([1, 0]), np.array([0]))
    np.testing.assert_allclose(area.ff_w[0], [0.55, 0.45])


def test_inactive_post_neurons_keep_their_weights():
    area = single_neuron([[0, 1], [0, 1]], [[0.5, 0.5], [0.5, 0.5]], 2, beta=0.1)
    area.apply_plasticity(np.array([1, 0]), np.array([0]))
    np.testing.assert_array_equal(area.ff_w[1], [0.5, 0.5])


@pytest.mark.parametrize("rule", [HEBBIAN, ABS])
def test_weight_sums_conserved(rule):
    rng = np.random.default_rng(0)
    area = build_area(AreaConfig(n=80, k=10, k_in=12, k_in_rec=15, beta=0.2, rho=0.3,
                                 rule=rule, init="random"), 40)
    for _ in range(300):
        area.step((rng.random(40) < 0.25).astype(float))
    np.testing.assert_allclose(area.ff_w.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(area.rec_w.sum(axis=1), 1.0, atol=1e-9)
    assert area.ff_w.min() >= 0 and area.rec_w.min() >= 0


def test_frozen_step_leaves_weights_alone():
    area = build_area(AreaConfig(n=40, k=5, k_in=6, k_in_rec=8, beta=0.3), 12)
    before = area.weights_checksum()
    area.step(np.ones(12), plastic=False)
    assert area.weights_checksum() == before
    area.step(np.ones(12))
    assert area.weights_checksum() != before


# -- refractory ----------------------------------------------------------------

def test_no_bias_without_rho():
    area = build_area(AreaConfig(n=10, k=2, k_in=3), 5)
    area.step(np.ones(5))
    assert not area.refractory_bias.any()


def test_refractory_arithmetic():
    area = single_neuron([[0]] * 3, [[1.0]] * 3, 1, rho=0.989)
    x = np.array([1.0])
    assert area.step(x).tolist() == [0]
    assert area.refractory_bias.tolist() == pytest.approx([0.989, 0.0, 0.0])
    drive = area.compute_drive(x)
    assert drive[0] == pytest.approx(0.011)
    # neuron 1 now fires and neuron 0's stale bias is cleared
    assert area.step(x).tolist() == [1]
    assert area.refractory_bias[0] == 0.0
    assert area.refractory_bias[1] == pytest.approx(0.989)


def test_strong_refractory_forces_turnover():
    area = build_area(AreaConfig(n=200, k=20, k_in=10, rho=0.989, init="random"), 50)
    x = (np.random.default_rng(1).random(50) < 0.3).astype(float)
    assemblies = [area.step(x) for _ in range(20)]
    assert all(overlap(a, b) < 20 for a, b in zip(assemblies, assemblies[1:]))


# -- stepping -------------------------------------------------------------------

def test_frozen_area_constant_input_is_a_fixed_point():
    area = build_area(AreaConfig(n=100, k=10, k_in=8, init="random"), 30)
    x = (np.random.default_rng(2).random(30) < 0.3).astype(float)
    first = area.step(x)
    for _ in range(10):
        assert np.array_equal(area.step(x), first)


def test_assemblies_stabilise_under_plasticity():
    area = build_area(AreaConfig(n=400, k=40, k_in=20, k_in_rec=40, beta=0.1,
                                 init="random", seed=5), 100)
    x = (np.random.default_rng(5).random(100) < 0.2).astype(float)
    assemblies = [area.step(x) for _ in range(50)]
    overlaps = [overlap(a, b) / 40 for a, b in zip(assemblies, assemblies[1:])]
    assert overlaps[-1] == 1.0
    first_full = overlaps.index(1.0)
    assert all(o == 1.0 for o in overlaps[first_full:])


def test_same_seed_same_trajectory():
    cfg = AreaConfig(n=60, k=6, k_in=5, k_in_rec=10, beta=0.05, rho=0.2, init="random")
    rng = np.random.default_rng(9)
    xs = (rng.random((30, 20)) < 0.3).astype(float)
    a, b = build_area(cfg, 20), build_area(cfg, 20)
    for x in xs:
        assert np.array_equal(a.step(x), b.step(x))
    assert a.weights_checksum() == b.weights_checksum()


def test_reset_is_idempotent():
    area = build_area(AreaConfig(n=30, k=3, k_in=4, rho=0.5), 10)
    area.step(np.ones(10))
    area.reset()
    state = (area.prev_assembly.copy(), area.refractory_bias.copy())
    area.reset()
    assert np.array_equal(area.prev_assembly, state[0])
    assert np.array_equal(area.refractory_bias, state[1])
    assert area.prev_assembly.size == 0 and not area.refractory_bias.any()


def test_resonance_examples():
    area = single_neuron([[0], [1], [2]], [[1.0]] * 3, 3)
    assert area.resonance(np.array([[3.0, 7.0, 2.0]])) == pytest.approx(7.0)
    area = Area(AreaConfig(n=3, k=2, k_in=1), 3, np.array([[0], [1], [2]]), np.ones((3, 1)),
                np.zeros((3, 0), np.int32), np.zeros((3, 0)))
    frames = np.array([[6.0, 4.0, 1.0], [1.0, 3.0, 3.0]])
    assert area.resonance(frames) == pytest.approx((10 + 6) / 2)


def test_resonance_leaves_state_untouched():
    area = build_area(AreaConfig(n=30, k=3, k_in=4, k_in_rec=5, rho=0.5, beta=0.1), 10)
    area.step(np.ones(10))
    snap = (area.weights_checksum(), area.prev_assembly.copy(), area.refractory_bias.copy())
    area.resonance(np.ones((4, 10)))
    assert area.weights_checksum() == snap[0]
    assert np.array_equal(area.prev_assembly, snap[1])
    assert np.array_equal(area.refractory_bias, snap[2])


# -- snapshots --------------------------------------------------------------------

def test_snapshot_roundtrip(tmp_path):
    area = build_area(AreaConfig(n=30, k=3, k_in=4, k_in_rec=5, beta=0.1, init="random"), 10)
    area.step(np.ones(10))
    area.save(tmp_path / "a.area")
    back = Area.load(tmp_path / "a.area")
    assert back.weights_checksum() == area.weights_checksum()
    assert back.config == area.config
    assert (tmp_path / "a.area").read_bytes() == back.to_bytes()


def test_snapshot_version_rejected(monkeypatch):
    from acspeech import area as area_mod
    data = build_area(AreaConfig(n=5, k=1, k_in=2), 3).to_bytes()
    monkeypatch.setattr(area_mod, "FORMAT_VERSION", 99)
    with pytest.raises(SnapshotVersionError):
        Area.from_bytes(data)

import numpy as np
import pytest

from sparsetopic.net import (
    Adam,
    CheckpointError,
    NumericalError,
    check_gradients,
    check_gradients_report,
    encode,
    encode_backward,
    encoder_backward,
    init_encoder,
    load_arrays,
    save_arrays,
)


def small_encoder(seed=0, V=7, H=5, d=3):
    rng = np.random.default_rng(seed)
    p = init_encoder(rng, V, H, d)
    # non-zero biases so every ReLU branch is exercised
    for k in ("enc.b1", "enc.b2", "enc.bmu", "enc.blogstd"):
        p[k] = rng.normal(0, 0.3, size=p[k].shape)
    return p


def test_zero_bow_with_zero_heads_returns_biases():
    p = small_encoder()
    p["enc.Wmu"][:] = 0
    p["enc.Wlogstd"][:] = 0
    q = encode(p, np.zeros(7))
    np.testing.assert_array_equal(q.mean, p["enc.bmu"])
    np.testing.assert_array_equal(q.stddev, np.exp(p["enc.blogstd"]))


def test_encode_is_pure_and_shaped():
    rng = np.random.default_rng(1)
    p = init_encoder(rng, 2000, 256, 64)
    before = {k: v.copy() for k, v in p.items()}
    bow = rng.poisson(0.01, size=2000).astype(float)
    a, b = encode(p, bow), encode(p, bow)
    assert a.mean.shape == (64,) and a.stddev.shape == (64,)
    np.testing.assert_array_equal(a.mean, b.mean)
    np.testing.assert_array_equal(a.stddev, b.stddev)
    assert np.all(a.stddev > 0)
    for k in p:
        np.testing.assert_array_equal(p[k], before[k])


def test_init_is_seeded_and_logstd_bias():
    a = init_encoder(np.random.default_rng(3), 10, 4, 2)
    b = init_encoder(np.random.default_rng(3), 10, 4, 2)
    for k in a:
        np.testing.assert_array_equal(a[k], b[k])
    np.testing.assert_array_equal(a["enc.blogstd"], [-1.0, -1.0])
    bound = np.sqrt(6.0 / 14)
    assert np.abs(a["enc.W1"]).max() <= bound


def test_nonfinite_activation_names_layer():
    p = small_encoder()
    p["enc.Wmu"][0, 0] = np.inf
    p["enc.b2"][:] = 1.0
    with pytest.raises(NumericalError) as err:
        encode(p, np.ones(7))
    assert "mean" in err.value.where


def test_backward_without_cache_is_usage_error():
    p = small_encoder()
    with pytest.raises(RuntimeError):
        encoder_backward(p, None, np.zeros((1, 3)), np.zeros((1, 3)))


def test_zero_upstream_gives_zero_gradients():
    p = small_encoder()
    grads = encode_backward(p, np.arange(7.0), np.zeros(3), np.zeros(3))
    assert set(grads) == set(p)
    for g in grads.values():
        assert not np.any(g)


def test_head_gradient_is_outer_product():
    p = small_encoder()
    bow = np.arange(7.0) / 21
    up = np.array([0.5, -1.0, 2.0])
    grads = encode_backward(p, bow, up, np.zeros(3))
    h1 = np.maximum(p["enc.W1"] @ bow + p["enc.b1"], 0)
    h2 = np.maximum(p["enc.W2"] @ h1 + p["enc.b2"], 0)
    np.testing.assert_allclose(grads["enc.Wmu"], np.outer(up, h2), rtol=1e-14)
    np.testing.assert_array_equal(grads["enc.bmu"], up)


@pytest.mark.parametrize("seed", range(4))
def test_encoder_backward_matches_finite_differences(seed):
    p = small_encoder(seed)
    rng = np.random.default_rng(100 + seed)
    bow = rng.random(7)
    a, b = rng.normal(size=3), rng.normal(size=3)

    def f(params):
        q = encode(params, bow)
        return float(a @ q.mean + b @ np.log(q.stddev))

    grads = encode_backward(p, bow, a, b)
    rep = check_gradients_report(f, p, grads, h=1e-6)
    assert rep.max_rel_error < 1e-4
    assert rep.n_checked > 0


def test_check_gradients_quadratic():
    rng = np.random.default_rng(0)
    p = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=5)}
    grads = {k: 2 * v for k, v in p.items()}
    err = check_gradients(lambda q: sum(float(np.sum(v**2)) for v in q.values()), p, grads, h=1e-5)
    assert err < 1e-8


def test_check_gradients_reports_wrong_gradient():
    p = {"a": np.array([1.0, -2.0])}
    err = check_gradients(lambda q: float(np.sum(q["a"] ** 2)), p, {"a": np.array([2.0, 0.0])})
    assert err > 0.5


def test_check_gradients_flags_kink():
    p = {"a": np.array([0.0, 1.0])}
    rep = check_gradients_report(lambda q: float(np.abs(q["a"]).sum()), p, {"a": np.array([0.0, 1.0])})
    assert rep.kinks == [("a", 0)]
    assert rep.n_checked == 1 and rep.max_rel_error < 1e-8


def test_check_gradients_does_not_mutate_and_rejects_bad_h():
    p = {"a": np.array([0.3, 0.7])}
    check_gradients(lambda q: float(np.sum(q["a"] ** 3)), p, {"a": 3 * p["a"] ** 2})
    np.testing.assert_array_equal(p["a"], [0.3, 0.7])
    with pytest.raises(ValueError):
        check_gradients(lambda q: 0.0, p, p, h=0.0)


def test_adam_zero_gradient_leaves_params():
    p = {"w": np.array([1.0, -2.0])}
    opt = Adam(p, lr=0.1)
    opt.step(p, {"w": np.zeros(2)})
    np.testing.assert_array_equal(p["w"], [1.0, -2.0])
    assert opt.step_count == 1


def test_adam_first_step_is_lr_times_sign():
    p = {"w": np.zeros(4)}
    g = np.array([3.0, -0.01, 1e3, -7.0])
    Adam(p, lr=1e-3).step(p, {"w": g})
    # bias-corrected m/sqrt(v) = g/|g| at t=1, up to eps_adam
    np.testing.assert_allclose(p["w"], -1e-3 * np.sign(g), rtol=1e-5)


def test_adam_deterministic_and_nan_abort():
    def run():
        p = {"w": np.array([0.5, 0.5])}
        opt = Adam(p, lr=0.01)
        for t in range(5):
            opt.step(p, {"w": np.array([t, -1.0])})
        return p["w"]

    np.testing.assert_array_equal(run(), run())
    p = {"w": np.zeros(2)}
    opt = Adam(p)
    with pytest.raises(NumericalError) as err:
        opt.step(p, {"w": np.array([np.nan, 0.0])})
    assert err.value.where == "w"
    assert opt.step_count == 0
    np.testing.assert_array_equal(p["w"], 0.0)


def test_checkpoint_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(9)
    arrays = {"x": rng.normal(size=(3, 4)), "y": np.array([np.pi, -0.0, 1e-300]), "n": np.arange(5)}
    save_arrays(tmp_path / "c.npz", arrays, {"note": "hi", "k": 3})
    back, meta = load_arrays(tmp_path / "c.npz")
    assert meta["note"] == "hi" and meta["k"] == 3
    for k in arrays:
        assert back[k].dtype == arrays[k].dtype
        assert back[k].tobytes() == arrays[k].tobytes()
    assert [f.name for f in tmp_path.iterdir()] == ["c.npz"]


def test_checkpoint_rejects_foreign_files(tmp_path):
    np.savez(tmp_path / "plain.npz", a=np.zeros(2))
    with pytest.raises(CheckpointError):
        load_arrays(tmp_path / "plain.npz")

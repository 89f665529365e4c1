import numpy as np
import pytest

from gacl import taskgen, taskvae
from gacl.taskvae import decode, decode_to_task, elbo_loss, encode, init_vae

from oracles import grad_check


@pytest.fixture(scope="module")
def trained(small_refs):
    params, curve = taskvae.pretrain(small_refs, epochs=300, batch=16, seed=1)
    return params, curve


def test_zero_heads_give_zero_posterior(small_refs):
    p = init_vae(seed=0)
    for head in (p.mu_head, p.logvar_head):
        head.weights[0][...] = 0.0
    mu, lv = encode(p, small_refs.tasks[0].occupancy)
    assert np.all(mu == 0) and np.all(lv == 0)


def test_encode_deterministic_and_shape_checked(small_refs):
    p = init_vae(seed=0)
    g = small_refs.tasks[1].occupancy
    a, b = encode(p, g), encode(p, g.copy())
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert a[0].shape == (32,)
    with pytest.raises(ValueError):
        encode(p, np.zeros((8, 8)))


def test_logvar_clamped(small_refs):
    p = init_vae(seed=0)
    p.logvar_head.biases[0][...] = 50.0
    _, lv = encode(p, small_refs.tasks[0].occupancy)
    assert np.all(lv == 2.0)


def test_zero_decoder_gives_half():
    p = init_vae(seed=0)
    p.decoder.weights[-1][...] = 0.0
    p.decoder.biases[-1][...] = 0.0
    probs = decode(p, np.random.default_rng(0).normal(size=32))
    assert np.all(probs == 0.5)
    # ties go to free cells: the decoded map is the empty walled arena
    task = decode_to_task(p, np.zeros(32))
    assert task.occupancy.sum() == 60
    assert task.problems() == []


def test_decode_deterministic():
    p = init_vae(seed=0)
    z = np.random.default_rng(1).normal(size=32)
    assert np.array_equal(decode(p, z), decode(p, z.copy()))


def test_elbo_terms():
    g = (np.random.default_rng(0).random((16, 16)) < 0.3).astype(float)
    loss, recon, kl = elbo_loss(g, g, np.zeros(32), np.zeros(32), 0.5)
    assert kl == 0.0
    assert recon < 1e-5
    _, _, kl1 = elbo_loss(g, g, np.array([1.0]), np.array([0.0]), 0.5)
    assert kl1 == pytest.approx(0.5)
    loss2, r2, k2 = elbo_loss(g, np.full((16, 16), 0.5), np.ones(32), np.zeros(32), 0.25)
    assert loss2 == pytest.approx(r2 + 0.25 * k2)


def test_loss_gradients_match_finite_differences(small_refs):
    rng = np.random.default_rng(2)
    p = init_vae(seed=3)
    for b in (p.logvar_head.biases[0], p.mu_head.biases[0]):
        b[...] = rng.normal(scale=0.3, size=b.shape)
    x = np.stack([t.occupancy for t in small_refs.tasks[:4]]).reshape(4, -1).astype(float)
    noise = rng.normal(size=(4, 32))
    _, _, _, grads = taskvae.loss_and_grads(p, x, noise, 0.5)

    def f():
        return taskvae.loss_and_grads(p, x, noise, 0.5)[0]

    assert grad_check(f, p.named_params(), grads, rng, max_per_tensor=25) < 1e-4


def test_pretrain_zero_epochs_is_identity(small_refs):
    init = init_vae(seed=4)
    before = {k: v.copy() for k, v in init.named_params().items()}
    out, curve = taskvae.pretrain(small_refs, epochs=0, batch=16, params=init)
    assert all(np.array_equal(before[k], v) for k, v in out.named_params().items())
    assert len(curve) == 1


def test_pretrain_requires_enough_refs(small_refs):
    with pytest.raises(ValueError):
        taskvae.pretrain(small_refs, epochs=1, batch=64)


def test_pretrain_reduces_heldout_loss(trained):
    _, curve = trained
    assert curve[-1]["val_loss"] < curve[0]["val_loss"]
    assert curve[-1]["kl_weight"] == 0.5
    assert curve[1]["kl_weight"] == 0.0


def test_pretrain_reproducible(small_refs):
    a, ca = taskvae.pretrain(small_refs, epochs=3, batch=16, seed=9)
    b, cb = taskvae.pretrain(small_refs, epochs=3, batch=16, seed=9)
    assert ca == cb
    assert all(np.array_equal(a.named_params()[k], v) for k, v in b.named_params().items())


def test_trained_mu_bounded(trained, small_refs):
    params, _ = trained
    mu, _ = encode(params, np.stack([t.occupancy for t in small_refs.tasks]))
    assert np.all(np.abs(mu) <= 6)


def test_random_latents_decode_to_valid_tasks(trained):
    params, _ = trained
    rng = np.random.default_rng(5)
    for _ in range(100):
        task = decode_to_task(params, rng.normal(scale=2.0, size=32))
        assert task.problems() == []
        assert taskgen.shortest_path(task) is not None


def test_decode_to_task_rejects_bad_latent(trained):
    with pytest.raises(ValueError):
        decode_to_task(trained[0], np.full(32, np.nan))


def test_checkpoint_roundtrip(trained, tmp_path):
    params, _ = trained
    taskvae.save_vae(params, tmp_path / "vae.ckpt")
    back = taskvae.load_vae(tmp_path / "vae.ckpt")
    z = np.random.default_rng(0).normal(size=32)
    assert np.array_equal(decode(back, z), decode(params, z))

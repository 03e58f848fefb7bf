import itertools

import numpy as np
import pytest
from pytest import approx

from adawavenet.attention import AttentionHead, _trunc_identity
from adawavenet.tensor import Tensor, TensorError


def test_truncated_identity_matrices_are_mutually_inverse():
    a = _trunc_identity(12, 128)
    b = _trunc_identity(128, 12)
    assert a @ b == approx(np.eye(12))


def test_identity_init_is_passthrough(rng):
    head = AttentionHead(12, 12, init="identity")
    x = rng.normal(size=(3, 12))
    out = head.project_approximation(Tensor(x))
    assert np.abs(out.data - x).max() < 1e-10


def test_identity_init_passthrough_batched(rng):
    head = AttentionHead(12, 12, init="identity")
    x = rng.normal(size=(4, 3, 12))
    out = head.project_approximation(Tensor(x))
    assert np.abs(out.data - x).max() < 1e-10


def test_identity_init_requires_square_fit():
    with pytest.raises(TensorError):
        AttentionHead(12, 24, init="identity")
    with pytest.raises(TensorError):
        AttentionHead(256, 256, d_model=128, init="identity")


def test_output_shape_law(rng):
    head = AttentionHead(6, 10, rng=rng)
    assert head.project_approximation(Tensor(rng.normal(size=(5, 6)))).shape == (5, 10)
    assert head.project_approximation(
        Tensor(rng.normal(size=(2, 5, 6)))).shape == (2, 5, 10)


def test_wrong_length_rejected(rng):
    head = AttentionHead(6, 6, rng=rng)
    with pytest.raises(TensorError):
        head.project_approximation(Tensor(rng.normal(size=(5, 7))))


def test_heads_must_divide_d_model():
    with pytest.raises(TensorError):
        AttentionHead(6, 6, d_model=10, heads=4)


def test_attention_rows_are_distributions(rng):
    head = AttentionHead(6, 6, rng=rng)
    head.project_approximation(Tensor(rng.normal(size=(5, 6))))
    w = head.last_attention
    assert w.shape == (1, head.heads, 5, 5)
    assert np.all(w >= 0)
    assert w.sum(axis=-1) == approx(np.ones(w.shape[:-1]))


def test_permutation_equivariance(rng):
    """No positional encoding, so permuting channels permutes the output."""
    head = AttentionHead(8, 8, rng=rng)
    x = rng.normal(size=(5, 8))
    base = head.project_approximation(Tensor(x)).data
    for perm in itertools.islice(itertools.permutations(range(5)), 0, 24, 7):
        p = np.asarray(perm)
        out = head.project_approximation(Tensor(x[p])).data
        assert np.abs(out - base[p]).max() < 1e-9


def test_single_token_attends_only_to_itself(rng):
    head = AttentionHead(6, 6, rng=rng)
    head.project_approximation(Tensor(rng.normal(size=(1, 6))))
    assert head.last_attention == approx(np.ones((1, head.heads, 1, 1)))


def test_gradients_reach_every_parameter(rng):
    import adawavenet.tensor as T
    head = AttentionHead(6, 6, rng=rng)
    x = Tensor(rng.normal(size=(4, 6)), requires_grad=True)
    loss = T.mse(head.project_approximation(x), Tensor(rng.normal(size=(4, 6))))
    loss.backward()
    for name, p in head.parameters().items():
        assert p.grad is not None and np.any(p.grad != 0), name
    assert x.grad is not None and np.any(x.grad != 0)


def test_forward_is_deterministic(rng):
    head = AttentionHead(6, 6, rng=np.random.default_rng(7))
    x = rng.normal(size=(3, 6))
    a = head.project_approximation(Tensor(x)).data
    b = head.project_approximation(Tensor(x)).data
    assert np.array_equal(a, b)

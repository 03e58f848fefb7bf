"""Dense float64 tensors with tape-based reverse-mode differentiation.

Only the operations the network actually uses are implemented. Everything is
numpy under the hood; gradients are hand-derived per op and validated by
finite differences in the test suite.
"""
from __future__ import annotations

import numpy as np

# When True, every op asserts its output is finite (slow; used in tests and
# when hunting NaNs during training).
DEBUG_CHECK_FINITE = False


class TensorError(ValueError):
    pass


class Tape:
    """Topologically ordered record of the ops reachable from a loss."""

    def __init__(self, nodes):
        self.nodes = nodes  # list of Tensor, parents always precede children


class Tensor:
    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None
        self._consumed = False

    # -- basic introspection -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- operator sugar ------------------------------------------------------
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    # -- autodiff ------------------------------------------------------------
    def build_tape(self):
        """Topologically sort the graph below this tensor."""
        order, seen = [], set()

        def visit(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            order.append(t)

        visit(self)
        return Tape(order)

    def backward(self):
        if self.size != 1:
            raise TensorError("backward requires a scalar loss")
        tape = self.build_tape()
        for node in tape.nodes:
            if node._consumed:
                raise TensorError("backward called twice on a consumed tape")
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(tape.nodes):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            node._consumed = True
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward):
    data = np.asarray(data, dtype=np.float64)
    if DEBUG_CHECK_FINITE and not np.all(np.isfinite(data)):
        raise TensorError("non-finite values produced")
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    """Sum gradient over axes that were broadcast in the forward pass."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# -- elementwise -------------------------------------------------------------

def add(a, b):
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape),
                            _unbroadcast(g * a.data, b.shape)))


def div(a, b):
    return _make(a.data / b.data, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.shape),
                            _unbroadcast(-g * a.data / b.data ** 2, b.shape)))


def neg(a):
    return _make(-a.data, (a,), lambda g: (-g,))


def pow_const(a, p):
    return _make(a.data ** p, (a,), lambda g: (g * p * a.data ** (p - 1),))


def sqrt(a):
    y = np.sqrt(a.data)
    return _make(y, (a,), lambda g: (g * 0.5 / y,))


def tanh(a):
    y = np.tanh(a.data)
    return _make(y, (a,), lambda g: (g * (1.0 - y * y),))


def relu(a):
    m = a.data > 0
    return _make(a.data * m, (a,), lambda g: (g * m,))


def softmax(a, axis=-1):
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * s).sum(axis=axis, keepdims=True)
        return ((g - inner) * s,)

    return _make(s, (a,), backward)


def mean(a, axis=None, keepdims=False):
    y = a.data.mean(axis=axis, keepdims=keepdims)
    n = a.size if axis is None else a.data.size // y.size

    def backward(g):
        g = np.asarray(g)
        if not keepdims and axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape) / n,)

    return _make(y, (a,), backward)


def tsum(a, axis=None, keepdims=False):
    y = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        g = np.asarray(g)
        if not keepdims and axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(y, (a,), backward)


def mse(pred, target, mask=None):
    """Mean squared error; with a binary mask the average runs over mask==1
    positions only (all positions if the mask is empty)."""
    if pred.shape != target.shape:
        raise TensorError(f"mse shape mismatch {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    if mask is not None:
        m = mask.data if isinstance(mask, Tensor) else np.asarray(mask, dtype=np.float64)
        if not np.all((m == 0) | (m == 1)):
            raise TensorError("mse mask must be binary")
        denom = m.sum()
        if denom == 0:
            m = np.ones_like(diff)
            denom = m.size
    else:
        m = np.ones_like(diff)
        denom = m.size
    val = (m * diff * diff).sum() / denom

    def backward(g):
        gp = g * 2.0 * m * diff / denom
        return (gp, -gp)

    return _make(val, (pred, target), backward)


# -- linear algebra ----------------------------------------------------------

def matmul(a, b):
    def backward(g):
        if b.data.ndim == 1:
            raise TensorError("1-D right operands unsupported")
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return (_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape))

    return _make(a.data @ b.data, (a, b), backward)


def linear(x, weight, bias=None):
    """Affine map over the trailing dimension: x[..., D_in] -> [..., D_out]."""
    if x.shape[-1] != weight.shape[0]:
        raise TensorError(
            f"linear: trailing dim {x.shape[-1]} != weight rows {weight.shape[0]}")
    y = matmul(x, weight)
    if bias is not None:
        y = add(y, bias)
    return y


# -- shape manipulation ------------------------------------------------------

def reshape(a, shape):
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes):
    inv = np.argsort(axes)
    return _make(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),))


def take_even(a):
    """Even-indexed samples along the last axis; length must be even."""
    if a.shape[-1] % 2 != 0:
        raise TensorError("take_even requires an even last dimension")

    def backward(g):
        out = np.zeros(a.shape)
        out[..., 0::2] = g
        return (out,)

    return _make(a.data[..., 0::2], (a,), backward)


def take_odd(a):
    if a.shape[-1] % 2 != 0:
        raise TensorError("take_odd requires an even last dimension")

    def backward(g):
        out = np.zeros(a.shape)
        out[..., 1::2] = g
        return (out,)

    return _make(a.data[..., 1::2], (a,), backward)


def interleave(even, odd):
    """Merge two sequences back into one: out[2n]=even[n], out[2n+1]=odd[n]."""
    if even.shape != odd.shape:
        raise TensorError("interleave operands must have equal shapes")
    out = np.empty(even.shape[:-1] + (2 * even.shape[-1],))
    out[..., 0::2] = even.data
    out[..., 1::2] = odd.data
    return _make(out, (even, odd), lambda g: (g[..., 0::2], g[..., 1::2]))


def pad_edge_last(a, n):
    """Right-pad the last axis by replicating the final sample n times."""
    if n == 0:
        return a
    pad = np.repeat(a.data[..., -1:], n, axis=-1)

    def backward(g):
        out = g[..., :a.shape[-1]].copy()
        out[..., -1] += g[..., a.shape[-1]:].sum(axis=-1)
        return (out,)

    return _make(np.concatenate([a.data, pad], axis=-1), (a,), backward)


def crop_last(a, n):
    """Drop the final n samples of the last axis."""
    if n == 0:
        return a
    L = a.shape[-1] - n

    def backward(g):
        out = np.zeros(a.shape)
        out[..., :L] = g
        return (out,)

    return _make(a.data[..., :L], (a,), backward)


# -- convolutions ------------------------------------------------------------
# All convolutions are stride-1, "same" length, zero padded. For kernel size
# K the left pad is (K-1)//2 and the right pad is K//2 (symmetric for odd K).


def _pads(K):
    return (K - 1) // 2, K - 1 - (K - 1) // 2


def _zero_pad_last(x, pl, pr):
    width = [(0, 0)] * (x.ndim - 1) + [(pl, pr)]
    return np.pad(x, width)


def conv1d(x, kernels, bias=None):
    """Cross-correlation over the last axis.

    x: [..., C_in, L]; kernels: [C_out, C_in, K]; output [..., C_out, L].
    K must be odd so the zero padding is symmetric.
    """
    C_out, C_in, K = kernels.shape
    if K % 2 == 0:
        raise TensorError("conv1d with same padding requires an odd kernel size")
    if x.shape[-2] != C_in:
        raise TensorError(f"conv1d: input channels {x.shape[-2]} != {C_in}")
    if bias is not None and bias.shape != (C_out,):
        raise TensorError("conv1d: bias shape mismatch")
    L = x.shape[-1]
    pl, _pr = _pads(K)
    squeeze = x.ndim == 2
    xb = x.data[None] if squeeze else x.data
    xp = _zero_pad_last(xb, *_pads(K))
    out = np.zeros(xb.shape[:-2] + (C_out, L))
    for k in range(K):
        out += np.einsum("oi,...il->...ol", kernels.data[:, :, k], xp[..., k:k + L])
    if bias is not None:
        out += bias.data[:, None]
    if squeeze:
        out = out[0]

    def backward(g):
        gb = g[None] if squeeze else g
        # input gradient: adjoint correlation
        gxp = np.zeros(xb.shape[:-2] + (C_in, L + K - 1))
        gw = np.zeros(kernels.shape)
        gbf = gb.reshape(-1, C_out, L)
        xpf = xp.reshape(-1, C_in, L + K - 1)
        for k in range(K):
            gxp[..., k:k + L] += np.einsum("oi,...ol->...il", kernels.data[:, :, k], gb)
            gw[:, :, k] = np.einsum("bol,bil->oi", gbf, xpf[..., k:k + L])
        gx = gxp[..., pl:pl + L]
        if squeeze:
            gx = gx[0]
        grads = [gx, gw]
        if bias is not None:
            grads.append(gb.sum(axis=tuple(range(gb.ndim - 2)) + (gb.ndim - 1,)))
        return tuple(grads)

    parents = (x, kernels) if bias is None else (x, kernels, bias)
    return _make(out, parents, backward)


def conv_transpose1d(x, kernels, bias=None):
    """Numerical adjoint of conv1d with respect to its input.

    x: [..., C_in, L]; kernels: [C_in, C_out, K]; output [..., C_out, L].
    Satisfies <conv1d(a, W), y> == <a, conv_transpose1d(y, W)> for zero bias,
    where W is passed with its native [C_out, C_in, K] layout on both sides.
    """
    C_in, C_out, K = kernels.shape
    if K % 2 == 0:
        raise TensorError("conv_transpose1d with same padding requires an odd kernel size")
    if x.shape[-2] != C_in:
        raise TensorError(f"conv_transpose1d: input channels {x.shape[-2]} != {C_in}")
    if bias is not None and bias.shape != (C_out,):
        raise TensorError("conv_transpose1d: bias shape mismatch")
    L = x.shape[-1]
    pl, _pr = _pads(K)
    squeeze = x.ndim == 2
    xb = x.data[None] if squeeze else x.data
    outp = np.zeros(xb.shape[:-2] + (C_out, L + K - 1))
    for k in range(K):
        outp[..., k:k + L] += np.einsum("io,...il->...ol", kernels.data[:, :, k], xb)
    out = outp[..., pl:pl + L]
    if bias is not None:
        out = out + bias.data[:, None]
    if squeeze:
        out = out[0]

    def backward(g):
        gb = g[None] if squeeze else g
        gp = _zero_pad_last(gb, *_pads(K))
        gx = np.zeros(xb.shape)
        gw = np.zeros(kernels.shape)
        xbf = xb.reshape(-1, C_in, L)
        gpf = gp.reshape(-1, C_out, L + K - 1)
        for k in range(K):
            gx += np.einsum("io,...ol->...il", kernels.data[:, :, k], gp[..., k:k + L])
            gw[:, :, k] = np.einsum("bil,bol->io", xbf, gpf[..., k:k + L])
        if squeeze:
            gx = gx[0]
        grads = [gx, gw]
        if bias is not None:
            grads.append(gb.sum(axis=tuple(range(gb.ndim - 2)) + (gb.ndim - 1,)))
        return tuple(grads)

    parents = (x, kernels) if bias is None else (x, kernels, bias)
    return _make(out, parents, backward)


def depthwise_conv1d(x, kernels, bias=None):
    """Per-channel cross-correlation: x[..., C, L], kernels[C, K] -> [..., C, L].

    Even K is allowed; the zero padding is then asymmetric ((K-1)//2 left,
    K//2 right), which keeps the map linear and exactly invertible inside the
    lifting blocks.
    """
    C, K = kernels.shape
    if x.shape[-2] != C:
        raise TensorError(f"depthwise_conv1d: channels {x.shape[-2]} != {C}")
    L = x.shape[-1]
    pl, pr = _pads(K)
    xp = _zero_pad_last(x.data, pl, pr)
    out = np.zeros(x.shape)
    for k in range(K):
        out += kernels.data[:, k, None] * xp[..., k:k + L]
    if bias is not None:
        out += bias.data[:, None]

    def backward(g):
        gxp = np.zeros(x.shape[:-1] + (L + K - 1,))
        gw = np.zeros(kernels.shape)
        for k in range(K):
            gxp[..., k:k + L] += kernels.data[:, k, None] * g
            gw[:, k] = (g * xp[..., k:k + L]).sum(axis=tuple(range(g.ndim - 2)) + (g.ndim - 1,))
        grads = [gxp[..., pl:pl + L], gw]
        if bias is not None:
            grads.append(g.sum(axis=tuple(range(g.ndim - 2)) + (g.ndim - 1,)))
        return tuple(grads)

    parents = (x, kernels) if bias is None else (x, kernels, bias)
    return _make(out, parents, backward)


def depthwise_conv_transpose1d(x, kernels, bias=None):
    """Adjoint of depthwise_conv1d under the same padding convention."""
    C, K = kernels.shape
    if x.shape[-2] != C:
        raise TensorError(f"depthwise_conv_transpose1d: channels {x.shape[-2]} != {C}")
    L = x.shape[-1]
    pl, pr = _pads(K)
    outp = np.zeros(x.shape[:-1] + (L + K - 1,))
    for k in range(K):
        outp[..., k:k + L] += kernels.data[:, k, None] * x.data
    out = outp[..., pl:pl + L]
    if bias is not None:
        out = out + bias.data[:, None]

    def backward(g):
        gp = _zero_pad_last(g, pl, pr)
        gx = np.zeros(x.shape)
        gw = np.zeros(kernels.shape)
        for k in range(K):
            gx += kernels.data[:, k, None] * gp[..., k:k + L]
            gw[:, k] = (x.data * gp[..., k:k + L]).sum(axis=tuple(range(x.ndim - 2)) + (x.ndim - 1,))
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=tuple(range(g.ndim - 2)) + (g.ndim - 1,)))
        return tuple(grads)

    parents = (x, kernels) if bias is None else (x, kernels, bias)
    return _make(out, parents, backward)


def moving_average(x, window):
    """Centered moving average over the last axis with edge replication."""
    if window % 2 == 0 or window < 1:
        raise TensorError("moving_average window must be odd and >= 1")
    L = x.shape[-1]
    half = (window - 1) // 2
    idx = np.clip(np.arange(-half, L + half), 0, L - 1)
    xp = x.data[..., idx]
    csum = np.cumsum(xp, axis=-1)
    out = np.empty(x.shape)
    out[..., 0] = csum[..., window - 1]
    out[..., 1:] = csum[..., window:] - csum[..., :L - 1]
    out /= window

    def backward(g):
        gx = np.zeros(x.shape)
        for j in range(-half, half + 1):
            tgt = np.clip(np.arange(L) + j, 0, L - 1)
            np.add.at(gx, (..., tgt), g / window)
        return (gx,)

    return _make(out, (x,), backward)


def grouped_linear_op(x, weights, biases, assignments):
    """Per-cluster affine heads over the last axis.

    x: [..., C, L]; weights: [k, L, L_p]; biases: [k, L_p];
    assignments: int array of length C mapping channel -> cluster.
    """
    assignments = np.asarray(assignments)
    C = x.shape[-2]
    if assignments.shape != (C,):
        raise TensorError("grouped_linear: one assignment per channel required")
    Wc = weights.data[assignments]            # [C, L, L_p]
    bc = biases.data[assignments]             # [C, L_p]
    out = np.einsum("...cl,clp->...cp", x.data, Wc) + bc

    def backward(g):
        gx = np.einsum("...cp,clp->...cl", g, Wc)
        xf = x.data.reshape(-1, C, x.shape[-1])
        gf = g.reshape(-1, C, g.shape[-1])
        gW_per_c = np.einsum("bcl,bcp->clp", xf, gf)
        gb_per_c = gf.sum(axis=0)
        gW = np.zeros(weights.shape)
        gb = np.zeros(biases.shape)
        np.add.at(gW, assignments, gW_per_c)
        np.add.at(gb, assignments, gb_per_c)
        return (gx, gW, gb)

    return _make(out, (x, weights, biases), backward)


def layer_norm(x, scale, shift, eps=1e-8):
    """Normalize the last axis to zero mean / unit variance, then affine."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xn = xc * inv
    out = xn * scale.data + shift.data

    def backward(g):
        gxn = g * scale.data
        gx = inv * (gxn - gxn.mean(axis=-1, keepdims=True)
                    - xn * (gxn * xn).mean(axis=-1, keepdims=True))
        gscale = _unbroadcast(g * xn, scale.shape)
        gshift = _unbroadcast(g, shift.shape)
        return (gx, gscale, gshift)

    return _make(out, (x, scale, shift), backward)

"""Compact reverse-mode differentiation engine.

Carries exactly the layer set the two generator families need (2-D
convolution, affine layers, pointwise nonlinearities, nearest-neighbour
upsampling, channel concatenation, per-channel normalisation) plus a fused
mixture-fit loss and the Adam update. Graphs are rebuilt every iteration
(define-by-run); a backward pass walks the tape in reverse topological
order and accumulates gradients into leaf nodes.

Everything is float64 numpy and fully deterministic: no threading, no
nondeterministic reductions.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatchError


class Node:
    """One value in the computation graph.

    ``value`` is a float64 ndarray (scalars are 0-d). ``grad`` stays None
    until the backward sweep reaches the node.
    """

    __slots__ = ("value", "grad", "parents", "_backward")

    def __init__(self, value, parents=(), backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = tuple(parents)
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g

    def __repr__(self):
        return f"Node(shape={self.value.shape})"


class Parameter(Node):
    """Trainable leaf node; lives across graph rebuilds."""

    __slots__ = ("name",)

    def __init__(self, name, value):
        super().__init__(value)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name}, shape={self.value.shape})"


def constant(value) -> Node:
    """Leaf node that still receives a gradient (useful for input checks)."""
    return Node(value)


def _as_node(x) -> Node:
    return x if isinstance(x, Node) else Node(np.asarray(x, dtype=np.float64))


def _topo_order(output: Node) -> list[Node]:
    order = []
    seen = set()
    stack = [(output, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(output: Node):
    """Populate ``grad`` on every node reachable from a scalar output."""
    if output.value.size != 1:
        raise ValueError(f"backward needs a scalar output, got shape {output.value.shape}")
    order = _topo_order(output)
    output.accumulate(np.ones_like(output.value))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# elementwise / glue ops


def add(a, b) -> Node:
    a, b = _as_node(a), _as_node(b)
    _check_broadcastable(a, b)
    out = Node(a.value + b.value, (a, b))

    def _bwd(g):
        a.accumulate(_unbroadcast(g, a.value.shape))
        b.accumulate(_unbroadcast(g, b.value.shape))

    out._backward = _bwd
    return out


def sub(a, b) -> Node:
    a, b = _as_node(a), _as_node(b)
    _check_broadcastable(a, b)
    out = Node(a.value - b.value, (a, b))

    def _bwd(g):
        a.accumulate(_unbroadcast(g, a.value.shape))
        b.accumulate(_unbroadcast(-g, b.value.shape))

    out._backward = _bwd
    return out


def mul(a, b) -> Node:
    a, b = _as_node(a), _as_node(b)
    _check_broadcastable(a, b)
    out = Node(a.value * b.value, (a, b))

    def _bwd(g):
        a.accumulate(_unbroadcast(g * b.value, a.value.shape))
        b.accumulate(_unbroadcast(g * a.value, b.value.shape))

    out._backward = _bwd
    return out


def sum_all(x: Node) -> Node:
    x = _as_node(x)
    out = Node(x.value.sum(), (x,))

    def _bwd(g):
        x.accumulate(np.full_like(x.value, float(g)))

    out._backward = _bwd
    return out


def reshape(x: Node, shape) -> Node:
    x = _as_node(x)
    out = Node(x.value.reshape(shape), (x,))

    def _bwd(g):
        x.accumulate(g.reshape(x.value.shape))

    out._backward = _bwd
    return out


def _check_broadcastable(a: Node, b: Node):
    if a.value.shape != b.value.shape and a.value.size != 1 and b.value.size != 1:
        raise ShapeMismatchError(f"shapes {a.value.shape} and {b.value.shape} do not match")


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    return np.asarray(g.sum(), dtype=np.float64).reshape(shape)


# ---------------------------------------------------------------------------
# nonlinearities


def relu(x: Node) -> Node:
    x = _as_node(x)
    # subgradient at 0 fixed to 0
    mask = x.value > 0
    out = Node(np.where(mask, x.value, 0.0), (x,))

    def _bwd(g):
        x.accumulate(g * mask)

    out._backward = _bwd
    return out


def leaky_relu(x: Node, slope: float) -> Node:
    x = _as_node(x)
    mask = x.value > 0
    out = Node(np.where(mask, x.value, slope * x.value), (x,))

    def _bwd(g):
        x.accumulate(g * np.where(mask, 1.0, slope))

    out._backward = _bwd
    return out


def _sigmoid(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def sigmoid(x: Node) -> Node:
    x = _as_node(x)
    y = _sigmoid(x.value)
    out = Node(y, (x,))

    def _bwd(g):
        x.accumulate(g * y * (1.0 - y))

    out._backward = _bwd
    return out


def softplus(x: Node) -> Node:
    x = _as_node(x)
    out = Node(np.logaddexp(0.0, x.value), (x,))

    def _bwd(g):
        x.accumulate(g * _sigmoid(x.value))

    out._backward = _bwd
    return out


# ---------------------------------------------------------------------------
# structured layers


def linear(x: Node, w: Node, b: Node) -> Node:
    """Affine map w @ x + b for a flat input vector."""
    x, w, b = _as_node(x), _as_node(w), _as_node(b)
    if x.value.ndim != 1 or w.value.ndim != 2:
        raise ShapeMismatchError("linear expects 1-D input and 2-D weights")
    if w.value.shape[1] != x.value.shape[0] or b.value.shape != (w.value.shape[0],):
        raise ShapeMismatchError(
            f"linear shapes inconsistent: w{w.value.shape} x{x.value.shape} b{b.value.shape}"
        )
    out = Node(w.value @ x.value + b.value, (x, w, b))

    def _bwd(g):
        w.accumulate(np.outer(g, x.value))
        b.accumulate(g)
        x.accumulate(w.value.T @ g)

    out._backward = _bwd
    return out


def conv2d(x: Node, w: Node, b: Node, stride: int = 1, padding: int = 0) -> Node:
    """Cross-correlation of a (Cin, H, W) input with (Cout, Cin, kh, kw) weights."""
    x, w, b = _as_node(x), _as_node(w), _as_node(b)
    xv, wv = x.value, w.value
    if xv.ndim != 3 or wv.ndim != 4:
        raise ShapeMismatchError("conv2d expects (Cin,H,W) input and (Cout,Cin,kh,kw) weights")
    cin, h, wdt = xv.shape
    cout, cin2, kh, kw = wv.shape
    if cin != cin2:
        raise ShapeMismatchError(f"conv2d channel mismatch: input {cin}, weights expect {cin2}")
    if b.value.shape != (cout,):
        raise ShapeMismatchError(f"conv2d bias must have shape ({cout},)")
    hp, wp = h + 2 * padding, wdt + 2 * padding
    if hp < kh or wp < kw:
        raise ShapeMismatchError(f"kernel {kh}x{kw} does not fit padded input {hp}x{wp}")
    hout = (hp - kh) // stride + 1
    wout = (wp - kw) // stride + 1

    if padding:
        xp = np.pad(xv, ((0, 0), (padding, padding), (padding, padding)))
    else:
        xp = xv
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    win = win[:, ::stride, ::stride]  # (Cin, Hout, Wout, kh, kw)
    cols = win.transpose(0, 3, 4, 1, 2).reshape(cin * kh * kw, hout * wout)
    wf = wv.reshape(cout, cin * kh * kw)
    out_val = (wf @ cols + b.value[:, None]).reshape(cout, hout, wout)
    out = Node(out_val, (x, w, b))

    def _bwd(g):
        gf = g.reshape(cout, hout * wout)
        w.accumulate((gf @ cols.T).reshape(wv.shape))
        b.accumulate(gf.sum(axis=1))
        gcols = (wf.T @ gf).reshape(cin, kh, kw, hout, wout)
        gxp = np.zeros((cin, hp, wp))
        for a in range(kh):
            for c in range(kw):
                gxp[:, a : a + stride * hout : stride, c : c + stride * wout : stride] += gcols[
                    :, a, c
                ]
        if padding:
            x.accumulate(gxp[:, padding : padding + h, padding : padding + wdt])
        else:
            x.accumulate(gxp)

    out._backward = _bwd
    return out


def upsample_nearest(x: Node, factor: int) -> Node:
    x = _as_node(x)
    if x.value.ndim != 3:
        raise ShapeMismatchError("upsample_nearest expects a (C,H,W) input")
    out = Node(np.repeat(np.repeat(x.value, factor, axis=1), factor, axis=2), (x,))
    c, h, w = x.value.shape

    def _bwd(g):
        x.accumulate(g.reshape(c, h, factor, w, factor).sum(axis=(2, 4)))

    out._backward = _bwd
    return out


def concat_channels(a: Node, b: Node) -> Node:
    a, b = _as_node(a), _as_node(b)
    if a.value.ndim != 3 or b.value.ndim != 3 or a.value.shape[1:] != b.value.shape[1:]:
        raise ShapeMismatchError(
            f"concat_channels needs matching spatial dims, got {a.value.shape} and {b.value.shape}"
        )
    ca = a.value.shape[0]
    out = Node(np.concatenate([a.value, b.value], axis=0), (a, b))

    def _bwd(g):
        a.accumulate(g[:ca])
        b.accumulate(g[ca:])

    out._backward = _bwd
    return out


def channel_norm(x: Node, gain: Node, bias: Node, eps: float = 1e-5) -> Node:
    """Standardise each channel map over its spatial extent, then apply affine."""
    x, gain, bias = _as_node(x), _as_node(gain), _as_node(bias)
    xv = x.value
    if xv.ndim != 3:
        raise ShapeMismatchError("channel_norm expects a (C,H,W) input")
    c = xv.shape[0]
    if gain.value.shape != (c,) or bias.value.shape != (c,):
        raise ShapeMismatchError(f"channel_norm affine params must have shape ({c},)")
    mean = xv.mean(axis=(1, 2), keepdims=True)
    var = xv.var(axis=(1, 2), keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (xv - mean) * inv_std
    out = Node(gain.value[:, None, None] * xhat + bias.value[:, None, None], (x, gain, bias))

    def _bwd(g):
        gain.accumulate((g * xhat).sum(axis=(1, 2)))
        bias.accumulate(g.sum(axis=(1, 2)))
        gxhat = g * gain.value[:, None, None]
        m1 = gxhat.mean(axis=(1, 2), keepdims=True)
        m2 = (gxhat * xhat).mean(axis=(1, 2), keepdims=True)
        x.accumulate((gxhat - m1 - xhat * m2) * inv_std)

    out._backward = _bwd
    return out


def lmm_fit_loss(maps: list[Node], sigs: list[Node], target: np.ndarray) -> Node:
    """Squared Frobenius misfit ``||target - sum_r map_r (x) sig_r||^2``.

    ``target`` is a constant (K, I, J) band-major array; maps are (I, J)
    nodes and sigs are (K,) nodes. Fused so one GEMM serves the forward
    pass and two serve the backward pass.
    """
    if len(maps) != len(sigs):
        raise ShapeMismatchError(f"{len(maps)} maps vs {len(sigs)} signatures")
    target = np.asarray(target, dtype=np.float64)
    k, i, j = target.shape
    for m in maps:
        if m.value.shape != (i, j):
            raise ShapeMismatchError(f"map shape {m.value.shape} does not match target {(i, j)}")
    for s in sigs:
        if s.value.shape != (k,):
            raise ShapeMismatchError(f"signature length {s.value.shape} does not match K={k}")
    r = len(maps)
    if r:
        mstack = np.stack([m.value for m in maps]).reshape(r, i * j)
        cstack = np.stack([s.value for s in sigs])  # (R, K)
        recon = (cstack.T @ mstack).reshape(k, i, j)
    else:
        recon = np.zeros((k, i, j))
    diff = target - recon
    out = Node((diff * diff).sum(), tuple(maps) + tuple(sigs))

    def _bwd(g):
        if not r:
            return
        grec = (-2.0 * float(g)) * diff  # dL/drecon
        gflat = grec.reshape(k, i * j)
        gmaps = cstack @ gflat  # (R, I*J)
        gsigs = mstack @ gflat.T  # (R, K)
        for idx in range(r):
            maps[idx].accumulate(gmaps[idx].reshape(i, j))
            sigs[idx].accumulate(gsigs[idx])

    out._backward = _bwd
    return out


# ---------------------------------------------------------------------------
# parameters and Adam


class ParamStore:
    """Named trainable arrays with paired Adam moment state.

    Parameter order is insertion order and is part of the determinism
    contract: updates always run in that order.
    """

    def __init__(self):
        self._params: dict[str, Parameter] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.t = 0

    def add(self, name: str, value: np.ndarray) -> Parameter:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        p = Parameter(name, np.array(value, dtype=np.float64))
        self._params[name] = p
        self._m[name] = np.zeros_like(p.value)
        self._v[name] = np.zeros_like(p.value)
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def parameters(self) -> list[Parameter]:
        return list(self._params.values())

    def param_count(self) -> int:
        return sum(p.value.size for p in self._params.values())

    def zero_grads(self):
        for p in self._params.values():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: np.array(p.value) for k, p in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        for k, v in state.items():
            self._params[k].value = np.array(v, dtype=np.float64)


def param_count(store: ParamStore) -> int:
    """Total number of scalar trainables in a store."""
    return store.param_count()


def adam_step(
    store: ParamStore,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """One bias-corrected Adam update on every parameter; zeroes gradients."""
    store.t += 1
    bc1 = 1.0 - beta1**store.t
    bc2 = 1.0 - beta2**store.t
    for name, p in store._params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.value)
        m = store._m[name]
        v = store._v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.value = p.value - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        p.grad = None

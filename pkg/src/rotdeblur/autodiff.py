"""Minimal reverse-mode autodiff over numpy arrays.

Eager execution with a recorded producer graph; exactly the operator set
the refinement/angle networks need, nothing more. Convolutions pad the
height (radial) axis with zeros and the width (angular) axis circularly,
because polar rasters are genuinely periodic in angle.

Tensors default to float32 (the network precision); float64 graphs are
supported and used by the finite-difference gradient checks.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_inputs", "_backward")

    def __init__(self, data, requires_grad=False, dtype=np.float32):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(dtype)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._inputs = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def detach(self):
        return Tensor(self.data.copy(), requires_grad=False, dtype=self.data.dtype)

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g


def _node(data, inputs, backward_fn):
    out = Tensor(data, dtype=data.dtype)
    needs = any(t.requires_grad or t._backward is not None for t in inputs)
    if needs:
        out.requires_grad = False
        out._inputs = tuple(inputs)
        out._backward = backward_fn
    return out


def _topo(root: Tensor):
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for t in node._inputs:
            if id(t) not in seen:
                stack.append((t, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate dloss/dt into every reachable tensor with requires_grad.

    Repeated calls without zeroing accumulate additively.
    """
    if loss.data.shape != ():
        raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    order = _topo(loss)
    grads = {id(loss): np.ones((), dtype=loss.data.dtype)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            node._accumulate(g)
        if node._backward is None:
            continue
        for t, gi in zip(node._inputs, node._backward(g)):
            if gi is None:
                continue
            if not (t.requires_grad or t._backward is not None):
                continue
            acc = grads.get(id(t))
            if acc is None:
                grads[id(t)] = gi.astype(t.data.dtype, copy=False)
            else:
                acc += gi.astype(t.data.dtype, copy=False)


# ---------------------------------------------------------------------------
# elementwise / reduction ops


def _check_same_shape(x, y, op):
    if x.data.shape != y.data.shape:
        raise ValueError(f"{op}: shape mismatch {x.data.shape} vs {y.data.shape}")


def add(x: Tensor, y: Tensor) -> Tensor:
    _check_same_shape(x, y, "add")
    return _node(x.data + y.data, (x, y), lambda g: (g, g))


def sub(x: Tensor, y: Tensor) -> Tensor:
    _check_same_shape(x, y, "sub")
    return _node(x.data - y.data, (x, y), lambda g: (g, -g))


def mul(x: Tensor, y: Tensor) -> Tensor:
    _check_same_shape(x, y, "mul")
    return _node(x.data * y.data, (x, y), lambda g: (g * y.data, g * x.data))


def div(x: Tensor, y: Tensor) -> Tensor:
    _check_same_shape(x, y, "div")
    return _node(
        x.data / y.data,
        (x, y),
        lambda g: (g / y.data, -g * x.data / (y.data * y.data)),
    )


def add_scalar(x: Tensor, c: float) -> Tensor:
    return _node(x.data + c, (x,), lambda g: (g,))


def mul_scalar(x: Tensor, c: float) -> Tensor:
    return _node(x.data * c, (x,), lambda g: (g * c,))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _node(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def absolute(x: Tensor) -> Tensor:
    # subgradient at exactly 0 is taken as 0
    sign = np.sign(x.data)
    return _node(np.abs(x.data), (x,), lambda g: (g * sign,))


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return _node(t, (x,), lambda g: (g * (1.0 - t * t),))


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    inside = (x.data > lo) & (x.data < hi)
    return _node(np.clip(x.data, lo, hi), (x,), lambda g: (g * inside,))


def mean(x: Tensor) -> Tensor:
    n = x.data.size
    return _node(
        np.asarray(x.data.mean(), dtype=x.data.dtype),
        (x,),
        lambda g: (np.full_like(x.data, g / n),),
    )


def reshape(x: Tensor, shape) -> Tensor:
    old = x.data.shape
    return _node(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def concat(x: Tensor, y: Tensor, axis: int = 1) -> Tensor:
    split = x.data.shape[axis]

    def bwd(g):
        gx, gy = np.split(g, [split], axis=axis)
        return gx, gy

    return _node(np.concatenate([x.data, y.data], axis=axis), (x, y), bwd)


def concat_channels(x: Tensor, y: Tensor) -> Tensor:
    return concat(x, y, axis=1)


# ---------------------------------------------------------------------------
# network ops (NCHW)


def _pad_hw(x, ph, pw):
    """Zero pad rows (radial axis), wrap pad columns (angular axis)."""
    if pw:
        x = np.concatenate([x[..., -pw:], x, x[..., :pw]], axis=-1)
    if ph:
        zeros = np.zeros(x.shape[:2] + (ph,) + x.shape[3:], dtype=x.dtype)
        x = np.concatenate([zeros, x, zeros], axis=2)
    return x


def _windows(xp, kh, kw, stride, oh, ow):
    n, c = xp.shape[:2]
    sn, sc, sh, sw = xp.strides
    shape = (n, c, oh, ow, kh, kw)
    strides = (sn, sc, sh * stride, sw * stride, sh, sw)
    return np.lib.stride_tricks.as_strided(xp, shape=shape, strides=strides)


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1) -> Tensor:
    """Cross-correlation plus bias, NCHW x OIkk -> NOHW.

    Same-style padding: output spatial dims are ceil(in / stride). Height
    is zero padded, width circularly padded. Kernels must be odd-sized.
    """
    if stride not in (1, 2):
        raise ValueError("stride must be 1 or 2")
    n, cin, h, wd = x.data.shape
    cout, cin_w, kh, kw = w.data.shape
    if cin != cin_w:
        raise ValueError(f"conv2d: input channels {cin} != weight channels {cin_w}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError("conv2d kernels must be odd-sized")
    if b.data.shape != (cout,):
        raise ValueError("conv2d: bias shape mismatch")
    ph, pw = kh // 2, kw // 2
    oh = -(-h // stride)
    ow = -(-wd // stride)
    xp = _pad_hw(x.data, ph, pw)
    used_h = (oh - 1) * stride + kh
    used_w = (ow - 1) * stride + kw
    win = _windows(xp[:, :, :used_h, :used_w], kh, kw, stride, oh, ow)
    cols = win.reshape(n, cin, oh * ow, kh * kw)
    wm = w.data.reshape(cout, cin * kh * kw)
    out = (
        cols.transpose(0, 2, 1, 3).reshape(n * oh * ow, cin * kh * kw) @ wm.T
    ).reshape(n, oh, ow, cout).transpose(0, 3, 1, 2)
    out = out + b.data[None, :, None, None]
    out = np.ascontiguousarray(out)

    def bwd(g):
        gm = g.transpose(0, 2, 3, 1).reshape(n * oh * ow, cout)
        gw = (
            (gm.T @ cols.transpose(0, 2, 1, 3).reshape(n * oh * ow, cin * kh * kw))
            .reshape(cout, cin, kh, kw)
        )
        gb = g.sum(axis=(0, 2, 3))
        gcols = (gm @ wm).reshape(n, oh, ow, cin, kh, kw)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i : i + oh * stride : stride, j : j + ow * stride : stride] += (
                    gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                )
        # fold circular width padding back, then drop the zero height pad
        gx = gxp[:, :, :, pw : pw + wd].copy()
        if pw:
            gx[:, :, :, :pw] += gxp[:, :, :, wd + pw :]
            gx[:, :, :, wd - pw :] += gxp[:, :, :, :pw]
        gx = gx[:, :, ph : ph + h, :]
        return gx, gw, gb

    return _node(out.astype(x.data.dtype, copy=False), (x, w, b), bwd)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x (N, F) @ w (G, F).T + b (G) -> (N, G)."""
    if x.data.ndim != 2 or x.data.shape[1] != w.data.shape[1]:
        raise ValueError(
            f"linear: shape mismatch {x.data.shape} vs {w.data.shape}"
        )
    out = x.data @ w.data.T + b.data[None, :]

    def bwd(g):
        return g @ w.data, g.T @ x.data, g.sum(axis=0)

    return _node(out, (x, w, b), bwd)


def global_avg_pool(x: Tensor) -> Tensor:
    """NCHW -> NC, mean over the spatial axes."""
    n, c, h, w = x.data.shape
    scale = 1.0 / (h * w)

    def bwd(g):
        return (np.broadcast_to(g[:, :, None, None] * scale, (n, c, h, w)),)

    return _node(x.data.mean(axis=(2, 3)), (x,), bwd)


def circular_conv_w(x: Tensor, kernel: np.ndarray) -> Tensor:
    """Circular convolution along the angular (last) axis of NCHW with a
    fixed 1D kernel: out[..., j] = sum_t k[t] * x[..., (j - t) mod W]."""
    k = np.asarray(kernel, dtype=np.float64)
    out = np.zeros_like(x.data)
    for t, kv in enumerate(k):
        out += kv * np.roll(x.data, t, axis=-1)

    def bwd(g):
        gx = np.zeros_like(g)
        for t, kv in enumerate(k):
            gx += kv * np.roll(g, -t, axis=-1)
        return (gx,)

    return _node(out.astype(x.data.dtype, copy=False), (x,), bwd)


def window_filter_valid(x: Tensor, kernel: np.ndarray) -> Tensor:
    """Per-channel valid-mode cross-correlation of NCHW with a fixed 2D
    window; used by the structural-similarity loss."""
    k = np.asarray(kernel, dtype=x.data.dtype)
    kh, kw = k.shape
    n, c, h, w = x.data.shape
    if h < kh or w < kw:
        raise ValueError(f"image {h}x{w} smaller than window {kh}x{kw}")
    oh, ow = h - kh + 1, w - kw + 1
    win = _windows(x.data, kh, kw, 1, oh, ow)
    out = np.einsum("nchwij,ij->nchw", win, k, optimize=True)

    def bwd(g):
        gp = np.zeros((n, c, h + kh - 1, w + kw - 1), dtype=g.dtype)
        gp[:, :, kh - 1 : kh - 1 + oh, kw - 1 : kw - 1 + ow] = g
        gwin = _windows(gp, kh, kw, 1, h, w)
        return (np.einsum("nchwij,ij->nchw", gwin, k[::-1, ::-1], optimize=True),)

    return _node(out, (x,), bwd)


# ---------------------------------------------------------------------------
# parameters and verification


class ParamStore:
    """Named map of trainable tensors; names are unique dotted paths."""

    def __init__(self):
        self._params = {}

    def add(self, name: str, array: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter {name!r}")
        t = Tensor(np.asarray(array, dtype=np.float32), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params.keys())

    def items(self):
        return self._params.items()

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def total_size(self) -> int:
        return sum(t.data.size for t in self._params.values())


def grad_check(f, x: Tensor, step: float = 1e-3, max_coords: int = 64, rng=None):
    """Max relative error between reverse-mode and central finite
    differences, over up to max_coords sampled coordinates of x.

    f must be a deterministic scalar-valued function of x. Use float64
    inputs for tight tolerances.
    """
    rng = rng or np.random.default_rng(0)
    if not x.data.flags.c_contiguous or not x.data.flags.writeable:
        x.data = np.ascontiguousarray(x.data)
    x.grad = None
    out = f(x)
    backward(out)
    analytic = x.grad.copy() if x.grad is not None else np.zeros_like(x.data)

    n = x.data.size
    if n <= max_coords:
        coords = np.arange(n)
    else:
        coords = rng.choice(n, size=max_coords, replace=False)

    flat = x.data.reshape(-1)
    worst = 0.0
    for idx in coords:
        orig = flat[idx]
        flat[idx] = orig + step
        fp = float(f(x).data)
        flat[idx] = orig - step
        fm = float(f(x).data)
        flat[idx] = orig
        fd = (fp - fm) / (2.0 * step)
        a = float(analytic.reshape(-1)[idx])
        err = abs(a - fd) / max(abs(a), abs(fd), 1e-8)
        worst = max(worst, err)
    return worst

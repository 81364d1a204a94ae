"""Dense-tensor neural stack with exact reverse-mode gradients.

A small tape-based autograd over float64 numpy arrays: each op builds a
node holding its parents and a closure producing parent gradients. Every
backward pass is verifiable against central finite differences through
`gradient_check`, which the test suite runs on each layer, the GRU cell
and the full composed networks.

Design choices the rest of the package relies on:
  * float64 everywhere (gradient checks need the precision; desk-scale
    training is cheap enough not to want float32),
  * inverted dropout (train-time scaling by 1/(1-rate), eval is identity),
  * weight init uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) from a seeded
    generator, biases likewise,
  * cross entropy and the masked squared error are means over the batch.
"""

import struct
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .errors import (EmptySequence, InvalidRate, NonFiniteGradient,
                     ShapeMismatch)

# Active scalar dtype. Test mode (the default) is float64 so gradient
# checks are meaningful; training may switch to float32 for speed.
FLOAT = np.float64


def set_precision(mode: str):
    """Select "test" (float64, default) or "train" (float32) precision.

    Applies to tensors created afterwards; a whole model should be built
    and run under a single mode.
    """
    global FLOAT
    if mode == "test":
        FLOAT = np.float64
    elif mode == "train":
        FLOAT = np.float32
    else:
        raise ValueError(f"unknown precision mode {mode!r}")


@contextmanager
def precision(mode: str):
    global FLOAT
    previous = FLOAT
    set_precision(mode)
    try:
        yield
    finally:
        FLOAT = previous


class Tensor:
    """A node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=FLOAT)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    # graph-building sugar; constants fold into closures
    def __add__(self, other):
        return add(self, other if isinstance(other, Tensor) else Tensor(other))

    __radd__ = __add__

    def __mul__(self, c):
        if isinstance(c, Tensor):
            return mul(self, c)
        c = float(c)
        return Tensor(self.data * c, parents=(self,), backward=lambda g: (g * c,))

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1.0) * (other if isinstance(other, Tensor) else Tensor(other))

    def backward(self, seed=None):
        """Accumulate d(self)/d(leaf) into every reachable leaf's .grad."""
        if seed is None:
            if self.data.size != 1:
                raise ShapeMismatch("backward() without seed needs a scalar")
            seed = np.ones_like(self.data)
        # iterative topological order (graphs can be deeper than the
        # recursion limit once sequences are unrolled)
        topo, visited, stack = [], set(), [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        grads = {id(self): np.asarray(seed, dtype=FLOAT)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:   # leaf
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += g
                continue
            for p, pg in zip(node._parents, node._backward(g)):
                if pg is None or not p.requires_grad:
                    continue
                key = id(p)
                if key in grads:
                    grads[key] = grads[key] + pg   # out-of-place: closures may alias
                else:
                    grads[key] = pg


class Parameter(Tensor):
    """Trainable leaf: value plus an always-allocated gradient buffer."""

    __slots__ = ("name",)

    def __init__(self, data, name=""):
        super().__init__(data, requires_grad=True)
        self.grad = np.zeros_like(self.data)
        self.name = name

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


# ---------------------------------------------------------------------------
# primitive ops
# ---------------------------------------------------------------------------

def _unbroadcast(g, shape):
    """Reduce gradient g back to `shape` after numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return Tensor(out, parents=(a, b), backward=backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def backward(g):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return Tensor(out, parents=(a, b), backward=backward)


def matmul_t(x: Tensor, w: Tensor) -> Tensor:
    """x @ w.T for (B, I) inputs and (O, I) weights."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[1]:
        raise ShapeMismatch(f"matmul_t: {x.data.shape} @ {w.data.shape}.T")
    out = x.data @ w.data.T

    def backward(g):
        return g @ w.data, g.T @ x.data

    return Tensor(out, parents=(x, w), backward=backward)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y = x @ w.T + b with exact gradients for x, w and b."""
    if b.data.ndim != 1 or b.data.shape[0] != w.data.shape[0]:
        raise ShapeMismatch(f"linear bias {b.data.shape} vs weight {w.data.shape}")
    y = matmul_t(x, w)
    return add(y, b)


def relu(x: Tensor) -> Tensor:
    keep = x.data > 0
    return Tensor(np.where(keep, x.data, 0.0), parents=(x,),
                  backward=lambda g: (g * keep,))


def sigmoid(x: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-x.data))
    return Tensor(s, parents=(x,), backward=lambda g: (g * s * (1.0 - s),))


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return Tensor(t, parents=(x,), backward=lambda g: (g * (1.0 - t * t),))


def concat(tensors, axis=1) -> Tensor:
    datas = [t.data for t in tensors]
    out = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(out, parents=tuple(tensors), backward=backward)


def reshape(x: Tensor, shape) -> Tensor:
    old = x.data.shape
    return Tensor(x.data.reshape(shape), parents=(x,),
                  backward=lambda g: (g.reshape(old),))


def stack_mean(tensors) -> Tensor:
    """Elementwise mean of same-shaped tensors (temporal pooling)."""
    if not tensors:
        raise EmptySequence("stack_mean of no tensors")
    n = float(len(tensors))
    out = tensors[0].data.copy()
    for t in tensors[1:]:
        out += t.data
    out /= n

    def backward(g):
        share = g / n
        return tuple(share for _ in tensors)

    return Tensor(out, parents=tuple(tensors), backward=backward)


def dropout(x: Tensor, rate: float, train: bool,
            rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: eval mode and rate 0 are the identity."""
    if not 0.0 <= rate < 1.0:
        raise InvalidRate(f"dropout rate {rate} outside [0, 1)")
    if not train or rate == 0.0:
        return Tensor(x.data, parents=(x,), backward=lambda g: (g,))
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    scale = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    return Tensor(x.data * scale, parents=(x,), backward=lambda g: (g * scale,))


@dataclass
class BatchNormState:
    """Running statistics for batchnorm1d (eval-mode normalizers)."""
    mean: np.ndarray
    var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    @classmethod
    def for_dim(cls, dim):
        return cls(mean=np.zeros(dim), var=np.ones(dim))


def batchnorm1d(x: Tensor, gamma: Tensor, beta: Tensor, state: BatchNormState,
                train: bool) -> Tensor:
    """Per-feature batch normalization over a (B, D) batch."""
    if x.data.ndim != 2 or x.data.shape[1] != gamma.data.shape[0]:
        raise ShapeMismatch(f"batchnorm1d on {x.data.shape} with gamma {gamma.data.shape}")
    if train:
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        state.mean = (1.0 - state.momentum) * state.mean + state.momentum * mu
        state.var = (1.0 - state.momentum) * state.var + state.momentum * var
    else:
        mu, var = state.mean, state.var
    inv = 1.0 / np.sqrt(var + state.eps)
    xhat = (x.data - mu) * inv
    out = gamma.data * xhat + beta.data

    def backward(g):
        dgamma = (g * xhat).sum(axis=0)
        dbeta = g.sum(axis=0)
        gg = g * gamma.data
        if train:
            b = x.data.shape[0]
            dx = inv / b * (b * gg - gg.sum(axis=0) - xhat * (gg * xhat).sum(axis=0))
        else:
            dx = gg * inv
        return dx, dgamma, dbeta

    return Tensor(out, parents=(x, gamma, beta), backward=backward)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def softmax_cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean over the batch of -log p[target]; exact softmax-CE gradient."""
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if logits.data.ndim != 2 or logits.data.shape[0] != targets.shape[0]:
        raise ShapeMismatch(f"cross entropy on {logits.data.shape} with {targets.shape[0]} targets")
    if targets.size and (targets.min() < 0 or targets.max() >= logits.data.shape[1]):
        raise ShapeMismatch("target id outside class count")
    lp = log_softmax(logits.data)
    b = targets.shape[0]
    loss = -lp[np.arange(b), targets].mean()

    def backward(g):
        grad = np.exp(lp)
        grad[np.arange(b), targets] -= 1.0
        return (g * grad / b,)

    return Tensor(loss, parents=(logits,), backward=backward)


def l2_loss(pred: Tensor, target, mask=None) -> Tensor:
    """Masked squared error: mean over the batch of the per-row sum of
    (pred - target)^2 over unmasked entries. mask=True marks EXCLUDED
    entries (boundary vertices)."""
    tgt = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=FLOAT)
    if pred.data.shape != tgt.shape:
        raise ShapeMismatch(f"l2_loss {pred.data.shape} vs {tgt.shape}")
    diff = pred.data - tgt
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape[-1] != pred.data.shape[-1]:
            raise ShapeMismatch(f"mask length {mask.shape[-1]} vs width {pred.data.shape[-1]}")
        diff = diff * ~mask
    b = pred.data.shape[0] if pred.data.ndim > 1 else 1
    loss = (diff * diff).sum() / b

    def backward(g):
        return (g * 2.0 * diff / b,)

    return Tensor(loss, parents=(pred,), backward=backward)


# ---------------------------------------------------------------------------
# convolution (single small 2D conv type used by the patch encoders)
# ---------------------------------------------------------------------------

def conv2d(x: Tensor, w: Tensor, b: Tensor, pad: int = 0) -> Tensor:
    """Stride-1 2D convolution: x (B,C,H,W), w (O,C,kh,kw), b (O,)."""
    if x.data.ndim != 4 or w.data.ndim != 4 or x.data.shape[1] != w.data.shape[1]:
        raise ShapeMismatch(f"conv2d: {x.data.shape} with kernel {w.data.shape}")
    bsz, cin, h, wd = x.data.shape
    cout, _, kh, kw = w.data.shape
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    oh = xp.shape[2] - kh + 1
    ow = xp.shape[3] - kw + 1
    # im2col: (B, C*kh*kw, oh*ow)
    s0, s1, s2, s3 = xp.strides
    windows = np.lib.stride_tricks.as_strided(
        xp, shape=(bsz, cin, kh, kw, oh, ow), strides=(s0, s1, s2, s3, s2, s3))
    cols = windows.reshape(bsz, cin * kh * kw, oh * ow)
    wm = w.data.reshape(cout, cin * kh * kw)
    out = (wm @ cols).reshape(bsz, cout, oh, ow)
    out += b.data[None, :, None, None]

    def backward(g):
        gm = g.reshape(bsz, cout, oh * ow)
        gflat = gm.transpose(1, 0, 2).reshape(cout, -1)
        cflat = cols.transpose(1, 0, 2).reshape(cin * kh * kw, -1)
        dw = (gflat @ cflat.T).reshape(w.data.shape)
        db = g.sum(axis=(0, 2, 3))
        dcols = (wm.T @ gm).reshape(bsz, cin, kh, kw, oh, ow)
        dxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                dxp[:, :, i:i + oh, j:j + ow] += dcols[:, :, i, j]
        dx = dxp[:, :, pad:pad + h, pad:pad + wd] if pad else dxp
        return dx, dw, db

    return Tensor(out, parents=(x, w, b), backward=backward)


def avgpool2d(x: Tensor, k: int) -> Tensor:
    """Non-overlapping k x k average pooling; spatial dims must divide by k."""
    bsz, c, h, w = x.data.shape
    if h % k or w % k:
        raise ShapeMismatch(f"avgpool2d: {h}x{w} not divisible by {k}")
    out = x.data.reshape(bsz, c, h // k, k, w // k, k).mean(axis=(3, 5))

    def backward(g):
        dx = np.repeat(np.repeat(g, k, axis=2), k, axis=3) / (k * k)
        return (dx,)

    return Tensor(out, parents=(x,), backward=backward)


def flatten(x: Tensor) -> Tensor:
    return reshape(x, (x.data.shape[0], -1))


# ---------------------------------------------------------------------------
# layer containers
# ---------------------------------------------------------------------------

class Linear:
    def __init__(self, in_dim, out_dim, rng, name):
        self.w = Parameter(uniform_init(rng, (out_dim, in_dim), in_dim), name=f"{name}.w")
        self.b = Parameter(uniform_init(rng, (out_dim,), in_dim), name=f"{name}.b")

    def __call__(self, x):
        return linear(x, self.w, self.b)

    def params(self):
        return [self.w, self.b]


class Conv2d:
    def __init__(self, in_ch, out_ch, k, rng, name, pad=0):
        fan_in = in_ch * k * k
        self.w = Parameter(uniform_init(rng, (out_ch, in_ch, k, k), fan_in), name=f"{name}.w")
        self.b = Parameter(uniform_init(rng, (out_ch,), fan_in), name=f"{name}.b")
        self.pad = pad

    def __call__(self, x):
        return conv2d(x, self.w, self.b, pad=self.pad)

    def params(self):
        return [self.w, self.b]


# ---------------------------------------------------------------------------
# GRU
# ---------------------------------------------------------------------------

class GRUCellParams:
    """Gate parameters: update z, reset r and candidate state h~."""

    def __init__(self, input_dim, hidden, rng, name="gru"):
        def mk(shape, fan, suffix):
            return Parameter(uniform_init(rng, shape, fan), name=f"{name}.{suffix}")
        self.hidden = hidden
        self.w_z = mk((hidden, input_dim), input_dim, "w_z")
        self.u_z = mk((hidden, hidden), hidden, "u_z")
        self.b_z = mk((hidden,), hidden, "b_z")
        self.w_r = mk((hidden, input_dim), input_dim, "w_r")
        self.u_r = mk((hidden, hidden), hidden, "u_r")
        self.b_r = mk((hidden,), hidden, "b_r")
        self.w_h = mk((hidden, input_dim), input_dim, "w_h")
        self.u_h = mk((hidden, hidden), hidden, "u_h")
        self.b_h = mk((hidden,), hidden, "b_h")

    def params(self):
        return [self.w_z, self.u_z, self.b_z, self.w_r, self.u_r, self.b_r,
                self.w_h, self.u_h, self.b_h]


def gru_cell(x: Tensor, h: Tensor, p: GRUCellParams) -> Tensor:
    """One GRU step:
    z = sig(Wz x + Uz h + bz); r = sig(Wr x + Ur h + br);
    h~ = tanh(Wh x + Uh (r*h) + bh); h' = (1-z)*h + z*h~.
    """
    if x.data.shape[0] != h.data.shape[0] or h.data.shape[1] != p.hidden:
        raise ShapeMismatch(f"gru_cell: x {x.data.shape}, h {h.data.shape}, hidden {p.hidden}")
    z = sigmoid(add(add(matmul_t(x, p.w_z), matmul_t(h, p.u_z)), p.b_z))
    r = sigmoid(add(add(matmul_t(x, p.w_r), matmul_t(h, p.u_r)), p.b_r))
    cand = tanh(add(add(matmul_t(x, p.w_h), matmul_t(mul(r, h), p.u_h)), p.b_h))
    one_minus_z = 1.0 + (-1.0) * z
    return add(mul(one_minus_z, h), mul(z, cand))


class BiGRU:
    """Stacked bidirectional GRU over a list of (B, I) step tensors.

    Step t of the output concatenates the forward state after frames 0..t
    with the backward state after frames N-1..t (width 2 * hidden). Layer
    l > 0 consumes layer l-1 outputs. Initial states are zero.
    """

    def __init__(self, input_dim, hidden, layers, rng, name="bigru"):
        self.hidden = hidden
        self.layers = []
        dim = input_dim
        for li in range(layers):
            fwd = GRUCellParams(dim, hidden, rng, name=f"{name}.l{li}.fwd")
            bwd = GRUCellParams(dim, hidden, rng, name=f"{name}.l{li}.bwd")
            self.layers.append((fwd, bwd))
            dim = 2 * hidden

    def __call__(self, seq):
        if not seq:
            raise EmptySequence("bidirectional GRU needs a nonempty sequence")
        batch = seq[0].data.shape[0]
        for fwd, bwd in self.layers:
            h = Tensor(np.zeros((batch, self.hidden)))
            fwd_states = []
            for x in seq:
                h = gru_cell(x, h, fwd)
                fwd_states.append(h)
            h = Tensor(np.zeros((batch, self.hidden)))
            bwd_states = []
            for x in reversed(seq):
                h = gru_cell(x, h, bwd)
                bwd_states.append(h)
            bwd_states.reverse()
            seq = [concat([f, b], axis=1) for f, b in zip(fwd_states, bwd_states)]
        return seq

    def params(self):
        out = []
        for fwd, bwd in self.layers:
            out += fwd.params() + bwd.params()
        return out


# ---------------------------------------------------------------------------
# optimizer and schedule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SgdSchedule:
    base_lr: float = 0.001
    halving_period: int = 50     # epochs per halving

    def lr(self, epoch: int) -> float:
        return self.base_lr * 0.5 ** (epoch // self.halving_period)


def sgd_step(params, schedule: SgdSchedule, epoch: int):
    """p <- p - lr(epoch) * grad, then zero the gradients."""
    step = schedule.lr(epoch)
    for p in params:
        if not np.isfinite(p.grad).all():
            raise NonFiniteGradient(f"non-finite gradient in {p.name!r}")
        p.data -= step * p.grad
        p.grad[...] = 0.0


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

@dataclass
class GradCheckEntry:
    name: str
    max_rel_error: float
    max_abs_error: float


@dataclass
class GradCheckReport:
    entries: list
    max_rel_error: float
    worst: str

    def passes(self, tolerance):
        return self.max_rel_error < tolerance


def gradient_check(loss_fn, tensors, h: float = 1e-5, atol: float = 1e-8) -> GradCheckReport:
    """Compare analytic gradients with central finite differences.

    loss_fn rebuilds the forward pass from scratch and returns a scalar
    Tensor; `tensors` maps names to the leaves to check (Parameters or
    requires_grad inputs). Relative error per entry is
    |a - n| / max(|a|, |n|); entries whose absolute difference is below
    `atol` score 0, since central differences cannot resolve gradients
    under the cancellation noise floor (~|f| * eps / h).
    """
    if FLOAT is not np.float64:
        raise ShapeMismatch("gradient_check requires test precision (float64)")
    named = dict(tensors)
    for t in named.values():
        t.grad = np.zeros_like(t.data)
    loss_fn().backward()
    analytic = {name: t.grad.copy() for name, t in named.items()}

    entries = []
    for name, t in named.items():
        flat = t.data.reshape(-1)
        num = np.empty_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn().item()
            flat[i] = orig - h
            down = loss_fn().item()
            flat[i] = orig
            num[i] = (up - down) / (2.0 * h)
        a = analytic[name].reshape(-1)
        diff = np.abs(a - num)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(num)), 1e-300)
        err = np.where(diff < atol, 0.0, diff / denom)
        entries.append(GradCheckEntry(name=name, max_rel_error=float(err.max(initial=0.0)),
                                      max_abs_error=float(diff.max(initial=0.0))))
    worst = max(entries, key=lambda e: e.max_rel_error)
    return GradCheckReport(entries=entries, max_rel_error=worst.max_rel_error,
                           worst=worst.name)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

_CKPT_MAGIC = b"HACTCKPT"
_CKPT_VERSION = 1


def save_checkpoint(path, named_params):
    """Binary dump of named float64 tensors; round-trips bit-exactly.

    named_params maps name -> Parameter or ndarray; entries are written
    sorted by name so identical parameter sets produce identical bytes.
    """
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<II", _CKPT_VERSION, len(named_params)))
        for name in sorted(named_params):
            arr = named_params[name]
            # checkpoints are always float64 regardless of training precision
            arr = np.ascontiguousarray(arr.data if isinstance(arr, Tensor) else arr,
                                       dtype=np.float64)
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path):
    """Read a checkpoint back into {name: float64 ndarray}."""
    with open(path, "rb") as fh:
        if fh.read(8) != _CKPT_MAGIC:
            raise ValueError(f"{path} is not a handact checkpoint")
        version, count = struct.unpack("<II", fh.read(8))
        if version != _CKPT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        out = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", fh.read(2))
            name = fh.read(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim)) if ndim else ()
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * n), dtype=np.float64).reshape(shape).copy()
            out[name] = data
    return out


def load_into(named_params, state):
    """Copy checkpoint arrays into parameters by name (shapes must match)."""
    for name, p in named_params.items():
        if name not in state:
            raise KeyError(f"checkpoint missing parameter {name!r}")
        if state[name].shape != p.data.shape:
            raise ShapeMismatch(f"{name}: checkpoint {state[name].shape} vs model {p.data.shape}")
        p.data[...] = state[name]

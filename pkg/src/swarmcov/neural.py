"""Two-layer dense Q-network (167 linear units -> 4 outputs) trained with RMSprop.

Checkpoint container (little-endian)::

    magic     4 bytes  b"SWQN"
    version   uint16   CHECKPOINT_VERSION
    head      uint8    0 = linear, 1 = softmax
    reserved  uint8
    input_dim uint32
    hidden    uint32
    outputs   uint32
    float64 arrays: hidden weights (hidden x input_dim, row-major), hidden bias,
                    output weights (outputs x hidden, row-major), output bias
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DimensionMismatch, FormatError, NonFiniteGradient

HIDDEN_UNITS = 167
N_OUTPUTS = 4
HEAD_MODES = ("linear", "softmax")

CHECKPOINT_MAGIC = b"SWQN"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sHBBIII")


class QNetwork:
    """Q(s, .) for the four moves: ``h = W1 x + b1`` (linear), ``q = W2 h + b2``, optional softmax.

    ``W1`` is taken and reported as (hidden, input_dim) but kept input-major
    (``W1t``) so a 0/1 observation selects contiguous rows.
    """

    def __init__(self, W1, b1, W2, b2, head="linear", backend=None):
        if head not in HEAD_MODES:
            raise ValueError(f"head must be one of {HEAD_MODES}, got {head!r}")
        W1 = np.asarray(W1, dtype=np.float64)
        if W1.ndim != 2:
            raise DimensionMismatch("W1 must be 2-D")
        self.W1t = np.array(W1.T, order="C")
        self.b1 = np.array(b1, dtype=np.float64)
        self.W2 = np.array(W2, dtype=np.float64, order="C")
        self.b2 = np.array(b2, dtype=np.float64)
        hidden = W1.shape[0]
        if self.b1.shape != (hidden,) or self.W2.ndim != 2 or self.W2.shape[1] != hidden \
                or self.b2.shape != (self.W2.shape[0],):
            raise DimensionMismatch("inconsistent parameter shapes")
        self.head = head
        self.backend = backend or kernels.BACKEND
        self._k = kernels.get(self.backend)
        self._scratch = None

    @property
    def W1(self) -> np.ndarray:
        return self.W1t.T

    @property
    def input_dim(self) -> int:
        return self.W1t.shape[0]

    @property
    def hidden(self) -> int:
        return self.W1t.shape[1]

    @property
    def softmax(self) -> bool:
        return self.head == "softmax"

    def params(self):
        """Parameter arrays in storage layout: W1t, b1, W2, b2."""
        return [self.W1t, self.b1, self.W2, self.b2]

    def copy(self, backend=None) -> "QNetwork":
        return QNetwork(self.W1, self.b1, self.W2, self.b2, head=self.head,
                        backend=backend or self.backend)

    def forward_batch(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise DimensionMismatch(f"expected (batch, {self.input_dim}) input, got {X.shape}")
        return self._k.forward(self.W1t, self.b1, self.W2, self.b2, X, self.softmax)[1]

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.input_dim:
            raise DimensionMismatch(f"expected input of length {self.input_dim}, got shape {x.shape}")
        return self.forward_batch(x[None, :])[0]

    __call__ = forward

    def __repr__(self):
        return f"QNetwork(input_dim={self.input_dim}, hidden={self.hidden}, head={self.head!r}, backend={self.backend!r})"


def init_network(input_dim: int, head: str = "linear", rng=None, hidden: int = HIDDEN_UNITS,
                 backend=None) -> QNetwork:
    """Glorot-uniform weights, zero biases."""
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    rng = np.random.default_rng(rng)
    lim1 = np.sqrt(6.0 / (input_dim + hidden))
    lim2 = np.sqrt(6.0 / (hidden + N_OUTPUTS))
    W1 = rng.uniform(-lim1, lim1, size=(hidden, input_dim))
    W2 = rng.uniform(-lim2, lim2, size=(N_OUTPUTS, hidden))
    return QNetwork(W1, np.zeros(hidden), W2, np.zeros(N_OUTPUTS), head=head, backend=backend)



@dataclass
class RmsPropState:
    learning_rate: float = 0.001
    rho: float = 0.9
    eps: float = 1e-8
    v: list = field(default_factory=list)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must be in [0, 1)")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")

    @classmethod
    def for_network(cls, net: QNetwork, learning_rate=0.001, rho=0.9, eps=1e-8) -> "RmsPropState":
        return cls(learning_rate, rho, eps, [np.zeros_like(p) for p in net.params()])


def rmsprop_update(param, grad, v, lr, rho, eps):
    """Out-of-place RMSprop step; returns (new_param, new_v)."""
    v_new = rho * np.asarray(v, dtype=np.float64) + (1.0 - rho) * np.square(grad)
    return param - lr * np.asarray(grad) / (np.sqrt(v_new) + eps), v_new


def _check_batch(net: QNetwork, X, actions, targets):
    X = np.ascontiguousarray(X, dtype=np.float64)
    actions = np.ascontiguousarray(actions, dtype=np.intp)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise DimensionMismatch(f"expected (batch, {net.input_dim}) input, got {X.shape}")
    if X.shape[0] == 0 or not (len(actions) == len(targets) == X.shape[0]):
        raise ValueError("batch must be non-empty with one action and target per row")
    if actions.min() < 0 or actions.max() >= net.W2.shape[0]:
        raise ValueError("action index out of range")
    if not np.isfinite(targets).all():
        raise ValueError("targets must be finite")
    return X, actions, targets


def gradients(net: QNetwork, X, actions, targets):
    """Loss and gradients in ``net.params()`` layout, without updating anything."""
    X, actions, targets = _check_batch(net, X, actions, targets)
    grads = [np.empty_like(p) for p in net.params()]
    loss = net._k.gradients(*net.params(), X, actions, targets, net.softmax, *grads)
    return loss, grads


def train_arrays(net: QNetwork, opt: RmsPropState, X, actions, targets) -> float:
    """One RMSprop step on a batch given as arrays; returns the pre-update loss."""
    X, actions, targets = _check_batch(net, X, actions, targets)
    if not opt.v:
        opt.v = [np.zeros_like(p) for p in net.params()]
    if net._scratch is None:
        net._scratch = [np.empty_like(p) for p in net.params()]
    loss, ok = net._k.train(*net.params(), *opt.v, X, actions, targets, net.softmax,
                            opt.learning_rate, opt.rho, opt.eps, *net._scratch)
    if not ok:
        raise NonFiniteGradient("non-finite loss or gradient; lower the learning rate")
    return loss


def train_step(net: QNetwork, opt: RmsPropState, batch) -> float:
    """One RMSprop step on a list of (observation, action index, target)."""
    if not batch:
        raise ValueError("batch must be non-empty")
    X = np.stack([np.asarray(x, dtype=np.float64) for x, _, _ in batch])
    actions = np.array([a for _, a, _ in batch], dtype=np.intp)
    targets = np.array([t for _, _, t in batch], dtype=np.float64)
    return train_arrays(net, opt, X, actions, targets)


def save(net: QNetwork, path) -> None:
    header = _HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, HEAD_MODES.index(net.head), 0,
                          net.input_dim, net.hidden, net.W2.shape[0])
    with open(path, "wb") as fh:
        fh.write(header)
        for p in (net.W1, net.b1, net.W2, net.b2):
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load(path, backend=None) -> QNetwork:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, head, _, input_dim, hidden, outputs = _HEADER.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a network checkpoint")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    if head >= len(HEAD_MODES):
        raise FormatError(f"{path}: unknown head mode {head}")
    shapes = [(hidden, input_dim), (hidden,), (outputs, hidden), (outputs,)]
    n_floats = sum(int(np.prod(s)) for s in shapes)
    if len(data) != _HEADER.size + 8 * n_floats:
        raise FormatError(f"{path}: expected {n_floats} parameters, file size does not match")
    flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    arrays, off = [], 0
    for s in shapes:
        n = int(np.prod(s))
        arrays.append(flat[off:off + n].reshape(s).astype(np.float64))
        off += n
    return QNetwork(*arrays, head=HEAD_MODES[head], backend=backend)

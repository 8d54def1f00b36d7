"""Input-derivative jets and parameter gradients for tanh networks.

A batch of jets is stored as one array of shape ``(C, N, m)``: ``N`` points,
``m`` output channels and ``C = 1 + n * order`` components ordered as
``[value, d/dx_0 .. d/dx_{n-1}, d2/dx_0^2 .. d2/dx_{n-1}^2]``. Mixed second
derivatives are never formed.

Forward propagation is analytic (chain rule layer by layer); parameter
gradients come from a hand-written reverse pass over the jet coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigurationError, NumericError


def n_components(n, order):
    return 1 + n * order


@dataclass(frozen=True)
class Jet2:
    """Value, gradient and per-axis second derivatives of a scalar at a point.

    ``order`` records how many derivative levels were actually computed;
    entries above it are zero-filled.
    """

    value: float
    grad: np.ndarray
    diag2: np.ndarray
    order: int = 2

    def __post_init__(self):
        if self.grad.shape != self.diag2.shape:
            raise ConfigurationError("grad and diag2 must have the same length")

    @property
    def n(self):
        return self.grad.shape[0]


def unpack_jets(J, n, order):
    """Split a ``(C, m)`` single-point jet slice into a list of :class:`Jet2`."""
    m = J.shape[-1]
    out = []
    for k in range(m):
        grad = J[1:1 + n, k].copy() if order >= 1 else np.zeros(n)
        diag2 = J[1 + n:1 + 2 * n, k].copy() if order >= 2 else np.zeros(n)
        out.append(Jet2(float(J[0, k]), grad, diag2, order))
    return out


@dataclass
class NetworkParams:
    """Hidden stack of a tanh MLP plus an optional linear readout.

    ``layers[k] = (W, b)`` with ``W`` of shape ``(p_out, p_in)``. Every hidden
    layer applies tanh. ``readout`` is a length-``p`` vector used only by the
    vanilla PINN.

    Flat parameter order: layer by layer, each layer's weight matrix
    row-major followed by its bias; the readout (if included) comes last.
    """

    layers: list
    readout: np.ndarray | None = None

    def __post_init__(self):
        if not self.layers:
            raise ConfigurationError("network needs at least one hidden layer")
        self.layers = [(np.asarray(W, dtype=np.float64), np.asarray(b, dtype=np.float64))
                       for W, b in self.layers]
        for k, (W, b) in enumerate(self.layers):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ConfigurationError(f"layer {k}: weight/bias shapes {W.shape}/{b.shape}")
            if k and W.shape[1] != self.layers[k - 1][0].shape[0]:
                raise ConfigurationError(
                    f"layer {k} expects {W.shape[1]} inputs, previous layer has "
                    f"{self.layers[k - 1][0].shape[0]} outputs")
        if self.readout is not None:
            self.readout = np.asarray(self.readout, dtype=np.float64).reshape(-1)
            if self.readout.shape[0] != self.width:
                raise ConfigurationError("readout length must equal hidden width")

    @classmethod
    def init(cls, sizes, seed, readout=True):
        """Xavier-normal weights, zero biases, from ``numpy.random.PCG64(seed)``.

        ``sizes = [n, p_1, ..., p_L]``; the readout gets the same scheme
        with fan-out 1.
        """
        rng = np.random.Generator(np.random.PCG64(seed))
        layers = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            std = np.sqrt(2.0 / (fan_in + fan_out))
            layers.append((rng.standard_normal((fan_out, fan_in)) * std, np.zeros(fan_out)))
        W = None
        if readout:
            W = rng.standard_normal(sizes[-1]) * np.sqrt(2.0 / (sizes[-1] + 1))
        return cls(layers, W)

    @property
    def n_inputs(self):
        return self.layers[0][0].shape[1]

    @property
    def width(self):
        return self.layers[-1][0].shape[0]

    @property
    def sizes(self):
        return [self.n_inputs] + [W.shape[0] for W, _ in self.layers]

    def num_params(self, include_readout=False):
        k = sum(W.size + b.size for W, b in self.layers)
        if include_readout and self.readout is not None:
            k += self.readout.size
        return k

    def flatten(self, include_readout=False):
        parts = []
        for W, b in self.layers:
            parts += [W.ravel(), b]
        if include_readout and self.readout is not None:
            parts.append(self.readout)
        return np.concatenate(parts)

    def with_flat(self, vec, include_readout=False):
        """New params with values taken from ``vec`` (same layout as :meth:`flatten`)."""
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.num_params(include_readout),):
            raise ConfigurationError(f"flat vector has shape {vec.shape}")
        layers, pos = [], 0
        for W, b in self.layers:
            Wn = vec[pos:pos + W.size].reshape(W.shape)
            pos += W.size
            bn = vec[pos:pos + b.size].copy()
            pos += b.size
            layers.append((Wn.copy(), bn))
        readout = self.readout
        if include_readout and self.readout is not None:
            readout = vec[pos:pos + self.readout.size].copy()
        return NetworkParams(layers, None if readout is None else readout.copy())

    def copy(self):
        return NetworkParams([(W.copy(), b.copy()) for W, b in self.layers],
                             None if self.readout is None else self.readout.copy())


def input_jets(X, order):
    X = np.asarray(X, dtype=np.float64)
    N, n = X.shape
    A = np.zeros((n_components(n, order), N, n))
    A[0] = X
    if order >= 1:
        for i in range(n):
            A[1 + i, :, i] = 1.0
    return A


@dataclass
class JetCache:
    n: int
    order: int
    inputs: list = field(default_factory=list)   # jets entering each layer
    preacts: list = field(default_factory=list)  # Z per layer
    tanhs: list = field(default_factory=list)    # tanh(Z[0]) per layer


def _check_finite(H, what):
    bad = ~np.isfinite(H)
    if bad.any():
        idx = int(np.argwhere(bad.any(axis=(0, 2)))[0, 0])
        raise NumericError(f"non-finite {what} at collocation index {idx}", index=idx)


def forward_jets(params, X, order=2, keep=True):
    """Jets of the last hidden layer at all rows of ``X``.

    Returns ``(H, cache)`` with ``H`` of shape ``(C, N, p)``; ``cache`` is
    needed by :func:`backward_jets` (``None`` when ``keep`` is false).
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if order not in (0, 1, 2):
        raise ConfigurationError(f"order must be 0, 1 or 2, got {order}")
    n = X.shape[1]
    if n != params.n_inputs:
        raise ConfigurationError(
            f"points have dimension {n}, network expects {params.n_inputs}")
    if not np.isfinite(X).all():
        raise NumericError("non-finite input point",
                           index=int(np.argwhere(~np.isfinite(X))[0, 0]))
    cache = JetCache(n, order) if keep else None
    A = input_jets(X, order)
    with np.errstate(over="ignore", invalid="ignore"):  # reported below with the point index
        for W, b in params.layers:
            C, N, _ = A.shape
            Z = (A.reshape(C * N, -1) @ W.T).reshape(C, N, -1)
            Z[0] += b
            H, T = kernels.tanh_forward(Z, n, order)
            if keep:
                cache.inputs.append(A)
                cache.preacts.append(Z)
                cache.tanhs.append(T)
            A = H
    _check_finite(A, "hidden activation")
    return A, cache


def backward_jets(params, cache, Hb):
    """Gradient (flat, hidden stack only) of a scalar given its adjoint ``Hb`` w.r.t. the last hidden jets."""
    n, order = cache.n, cache.order
    grads = []
    for k in range(len(params.layers) - 1, -1, -1):
        W, _ = params.layers[k]
        Zb = kernels.tanh_backward(cache.preacts[k], cache.tanhs[k], Hb, n, order)
        A = cache.inputs[k]
        p_out, p_in = W.shape
        gW = Zb.reshape(-1, p_out).T @ A.reshape(-1, p_in)
        gb = Zb[0].sum(axis=0)
        grads.append((gW, gb))
        if k:
            Hb = (Zb.reshape(-1, p_out) @ W).reshape(Zb.shape[0], Zb.shape[1], p_in)
    parts = []
    for gW, gb in reversed(grads):
        parts += [gW.ravel(), gb]
    g = np.concatenate(parts)
    if not np.isfinite(g).all():
        raise NumericError("non-finite parameter gradient")
    return g


def hidden_jets(params, x, order=2):
    """Jets of every hidden output ``h_k`` at a single point ``x``: list of length ``p``."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    H, _ = forward_jets(params, x, order, keep=False)
    return unpack_jets(H[:, 0, :], x.shape[1], order)


def hidden_jet_batch(params, X, order=2):
    return forward_jets(params, X, order, keep=False)[0]


def param_gradient(loss, params, X, order=2):
    """Value and gradient of ``loss`` with respect to the hidden-stack parameters.

    ``loss`` receives the last-layer jets ``H`` (``(C, N, p)``) and must return
    ``(value, dvalue/dH)``.
    """
    H, cache = forward_jets(params, X, order)
    value, Hb = loss(H)
    if not np.isfinite(value):
        raise NumericError("non-finite loss value")
    return value, backward_jets(params, cache, Hb)

"""Random Fourier Feature extension of the last hidden layer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError
from .jets import backward_jets, forward_jets, unpack_jets


@dataclass(frozen=True)
class RffMatrix:
    """Frozen ``D x p`` frequency matrix with N(0, sigma^2) entries.

    Entries come from ``numpy.random.Generator(PCG64(seed)).standard_normal``
    drawn row-major and multiplied by ``sigma``. Because rows are drawn in
    order, the first ``D'`` rows of a ``D``-row matrix equal the ``D'``-row
    matrix with the same seed, sigma and p (nesting).
    """

    B: np.ndarray
    sigma: float
    seed: int

    @property
    def D(self):
        return self.B.shape[0]

    @property
    def p(self):
        return self.B.shape[1]

    def prefix(self, D):
        if not 1 <= D <= self.D:
            raise ConfigurationError(f"prefix size {D} outside 1..{self.D}")
        return RffMatrix(self.B[:D], self.sigma, self.seed)


def sample_rff(D, p, sigma=1.0, seed=0):
    if int(D) != D or D < 1 or int(p) != p or p < 1:
        raise ConfigurationError(f"D and p must be positive integers, got D={D}, p={p}")
    if not sigma > 0:
        raise ConfigurationError(f"sigma must be positive, got {sigma}")
    rng = np.random.Generator(np.random.PCG64(seed))
    B = rng.standard_normal((int(D), int(p))) * float(sigma)
    B.setflags(write=False)
    return RffMatrix(B, float(sigma), int(seed))


@dataclass
class FeatureBasis:
    """``psi = gamma_D(h(x))`` when ``rff`` is set, plain ``h(x)`` otherwise."""

    params: object
    rff: RffMatrix | None = None

    def __post_init__(self):
        if self.rff is not None and self.rff.p != self.params.width:
            raise ConfigurationError(
                f"RFF matrix has {self.rff.p} columns, hidden width is {self.params.width}")

    @property
    def dim(self):
        return self.params.width if self.rff is None else 2 * self.rff.D

    def with_params(self, params):
        return FeatureBasis(params, self.rff)


@dataclass
class FeatureCache:
    hidden: object
    Y: np.ndarray | None
    CS: np.ndarray | None


def feature_jets(basis, X, order=2, keep=False):
    """Feature jets ``(C, N, dim)``; with ``keep`` also a cache for :func:`feature_backward`."""
    H, hcache = forward_jets(basis.params, X, order, keep=keep)
    if basis.rff is None:
        return (H, FeatureCache(hcache, None, None)) if keep else H
    n = basis.params.n_inputs
    C, N, p = H.shape
    Y = (H.reshape(C * N, p) @ ((2.0 * np.pi) * basis.rff.B.T)).reshape(C, N, -1)
    Psi = kernels.rff_forward(Y, n, order, 1.0 / np.sqrt(basis.rff.D))
    if keep:
        return Psi, FeatureCache(hcache, Y, Psi[0])
    return Psi


def feature_backward(basis, cache, Pb):
    """Flat hidden-parameter gradient from the adjoint ``Pb`` of the feature jets."""
    hcache = cache.hidden
    if basis.rff is None:
        return backward_jets(basis.params, hcache, Pb)
    Yb = kernels.rff_backward(cache.Y, cache.CS, Pb, hcache.n, hcache.order,
                              1.0 / np.sqrt(basis.rff.D))
    C, N, D = Yb.shape
    Hb = (Yb.reshape(C * N, D) @ ((2.0 * np.pi) * basis.rff.B)).reshape(C, N, -1)
    return backward_jets(basis.params, hcache, Hb)


def psi_jets(basis, x, order=2):
    """Jets of every feature ``psi_k`` at a single point, as :class:`~ifefpinn.jets.Jet2`."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    P = feature_jets(basis, x, order)
    return unpack_jets(P[:, 0, :], x.shape[1], order)

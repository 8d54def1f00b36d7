"""Benchmark PDE problems, collocation samplers and design-matrix rows.

Points are rows of an ``(N, n)`` array; each problem names its axes in
``PdeProblem.axes`` (time-dependent problems use ``("t", "x")``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError
from .features import feature_jets


# ---------------------------------------------------------------- operators

@dataclass(frozen=True)
class Term:
    kind: str  # "value" | "d1" | "d2"
    axis: int | None
    coeff: float

    def index(self, n):
        if self.kind == "value":
            return 0
        if self.kind == "d1":
            return 1 + self.axis
        if self.kind == "d2":
            return 1 + n + self.axis
        raise ConfigurationError(f"unknown derivative kind {self.kind!r}")

    @property
    def order(self):
        return {"value": 0, "d1": 1, "d2": 2}[self.kind]


@dataclass(frozen=True)
class LinearOperatorSpec:
    """``sum(coeff * D u)`` with ``D`` in {identity, d/dx_i, d2/dx_i^2}."""

    terms: tuple

    def __post_init__(self):
        if not self.terms:
            raise ConfigurationError("operator needs at least one term")

    @property
    def order(self):
        return max(t.order for t in self.terms)

    def validate(self, n):
        for t in self.terms:
            if t.kind != "value" and not 0 <= t.axis < n:
                raise ConfigurationError(f"axis {t.axis} invalid for dimension {n}")
            t.index(n)

    def apply(self, J, n):
        """Apply to jets ``J`` of shape ``(C, N, ...)``; returns ``(N, ...)``."""
        out = np.zeros(J.shape[1:])
        for t in self.terms:
            out = out + t.coeff * J[t.index(n)]
        return out


@dataclass(frozen=True)
class NonlinearBurgers:
    """Residual ``u_t + a * u * u_x - nu * u_xx`` with ``a = nonlinearity`` (1 normally)."""

    nu: float
    t_axis: int = 0
    x_axis: int = 1
    nonlinearity: float = 1.0

    order = 2

    def linear_part(self):
        return LinearOperatorSpec((Term("d1", self.t_axis, 1.0),
                                   Term("d2", self.x_axis, -self.nu)))

    def validate(self, n):
        self.linear_part().validate(n)

    def apply(self, J, n):
        """Residual of a scalar field given its jets ``J`` of shape ``(C, N)``."""
        u = J[0]
        ux = J[1 + self.x_axis]
        return self.linear_part().apply(J, n) + self.nonlinearity * u * ux


def op(*terms):
    return LinearOperatorSpec(tuple(Term(*t) for t in terms))


# ---------------------------------------------------------- boundary data

@dataclass
class Dirichlet:
    points: np.ndarray
    targets: np.ndarray
    kind = "dirichlet"

    @property
    def n_rows(self):
        return len(self.points)

    @property
    def n_points(self):
        return len(self.points)


@dataclass
class Initial(Dirichlet):
    kind = "initial"


@dataclass
class PeriodicPair:
    """Rows ``D^k u(a) - D^k u(b) = 0`` for each pair and each ``k`` in ``orders``."""

    points_a: np.ndarray
    points_b: np.ndarray
    orders: tuple = (0,)
    axis: int = 1
    kind = "periodic"

    @property
    def n_rows(self):
        return len(self.points_a) * len(self.orders)

    @property
    def n_points(self):
        return 2 * len(self.points_a)


@dataclass(frozen=True)
class TaggedPoint:
    """One boundary constraint, for single-row evaluation."""

    kind: str  # "dirichlet" | "initial" | "periodic"
    point: np.ndarray
    target: float = 0.0
    partner: np.ndarray | None = None
    order: int = 0
    axis: int = 1


# ------------------------------------------------------------- face specs

@dataclass(frozen=True)
class FaceSpec:
    """Condition imposed on the face ``x[axis] == lo/hi``."""

    kind: str  # "dirichlet" | "initial"
    axis: int
    side: str  # "lo" | "hi"
    target: Callable


@dataclass(frozen=True)
class PeriodicSpec:
    axis: int
    orders: tuple = (0,)


# ------------------------------------------------------------------ problem

@dataclass
class PdeProblem:
    name: str
    axes: tuple
    lo: np.ndarray
    hi: np.ndarray
    interior_op: object
    source: Callable
    exact: Callable | None
    boundary_specs: list
    exact_jet: Callable | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if self.lo.shape != (self.dim,) or self.hi.shape != (self.dim,):
            raise ConfigurationError("box bounds must match the number of axes")
        if np.any(self.hi <= self.lo):
            raise ConfigurationError("empty domain")
        self.interior_op.validate(self.dim)

    @property
    def dim(self):
        return len(self.axes)

    @property
    def linear(self):
        return isinstance(self.interior_op, LinearOperatorSpec)

    @property
    def order(self):
        o = self.interior_op.order
        for s in self.boundary_specs:
            if isinstance(s, PeriodicSpec):
                o = max(o, max(s.orders))
        return o

    def face_measure(self, axis, normalized=False):
        """Measure of a face orthogonal to ``axis``; ``normalized`` rescales every axis to unit length."""
        if normalized:
            return 1.0
        other = [i for i in range(self.dim) if i != axis]
        return float(np.prod(self.hi[other] - self.lo[other]))

    def contains(self, X, tol=1e-12):
        X = np.atleast_2d(X)
        return np.all((X >= self.lo - tol) & (X <= self.hi + tol), axis=1)

    def describe(self):
        return {"name": self.name, "axes": list(self.axes), "lo": self.lo.tolist(),
                "hi": self.hi.tolist(), **self.params}


# ------------------------------------------------------------- the suite

def make_helmholtz(a1=1.0, a2=4.0, lo=(-1.0, -1.0), hi=(1.0, 1.0)):
    """``u_xx + u_yy + u = f`` with ``u = sin(a1 pi x) sin(a2 pi y)`` and ``u = 0`` on the boundary."""
    if len(lo) != 2 or len(hi) != 2:
        raise ConfigurationError("Helmholtz problem is two-dimensional")
    k1, k2 = a1 * np.pi, a2 * np.pi

    def exact(X):
        X = np.atleast_2d(X)
        return np.sin(k1 * X[:, 0]) * np.sin(k2 * X[:, 1])

    def source(X):
        return (1.0 - k1 ** 2 - k2 ** 2) * exact(X)

    def exact_jet(X):
        X = np.atleast_2d(X)
        s1, c1 = np.sin(k1 * X[:, 0]), np.cos(k1 * X[:, 0])
        s2, c2 = np.sin(k2 * X[:, 1]), np.cos(k2 * X[:, 1])
        u = s1 * s2
        return np.stack([u, k1 * c1 * s2, k2 * s1 * c2, -k1 ** 2 * u, -k2 ** 2 * u])

    zero = lambda X: np.zeros(len(X))  # noqa: E731
    faces = [FaceSpec("dirichlet", ax, side, zero) for ax in (0, 1) for side in ("lo", "hi")]
    return PdeProblem(
        name="helmholtz", axes=("x", "y"), lo=lo, hi=hi,
        interior_op=op(("d2", 0, 1.0), ("d2", 1, 1.0), ("value", None, 1.0)),
        source=source, exact=exact, exact_jet=exact_jet, boundary_specs=faces,
        params={"a1": a1, "a2": a2})


def make_convection(beta=50.0, x_max=2.0 * np.pi, t_max=1.0):
    """``u_t + beta u_x = 0`` on ``[0, t_max] x [0, x_max]``, ``u(0, x) = sin x``, periodic in x."""
    if beta == 0:
        raise ConfigurationError("beta must be non-zero")

    def exact(X):
        X = np.atleast_2d(X)
        return np.sin(X[:, 1] - beta * X[:, 0])

    def exact_jet(X):
        X = np.atleast_2d(X)
        z = X[:, 1] - beta * X[:, 0]
        s, c = np.sin(z), np.cos(z)
        return np.stack([s, -beta * c, c, -beta ** 2 * s, -s])

    return PdeProblem(
        name="convection", axes=("t", "x"), lo=(0.0, 0.0), hi=(t_max, x_max),
        interior_op=op(("d1", 0, 1.0), ("d1", 1, beta)),
        source=lambda X: np.zeros(len(X)), exact=exact, exact_jet=exact_jet,
        boundary_specs=[FaceSpec("initial", 0, "lo", lambda X: np.sin(X[:, 1])),
                        PeriodicSpec(axis=1, orders=(0,))],
        params={"beta": beta})


def make_convection_diffusion(c=1.0, d=5e-5, A_low=1.0, A_high=0.1,
                              k_low=4 * np.pi, k_high=60 * np.pi):
    """``u_t + c u_x - d u_xx = 0`` on ``[0,1]^2``, periodic in x (value and slope)."""
    if not d > 0:
        raise ConfigurationError("diffusivity d must be positive")
    modes = ((A_low, k_low), (A_high, k_high))

    def exact_jet(X):
        X = np.atleast_2d(X)
        t, x = X[:, 0], X[:, 1]
        J = np.zeros((5, len(X)))
        for A, k in modes:
            damp = A * np.exp(-d * k * k * t)
            z = k * (x - c * t)
            s, co = np.sin(z), np.cos(z)
            J[0] += damp * s
            J[1] += damp * (-d * k * k * s - c * k * co)
            J[2] += damp * k * co
            J[3] += damp * ((d * k * k) ** 2 * s + 2 * d * k ** 3 * c * co - (c * k) ** 2 * s)
            J[4] += -damp * k * k * s
        return J

    def initial(X):
        x = X[:, 1]
        return A_low * np.sin(k_low * x) + A_high * np.sin(k_high * x)

    return PdeProblem(
        name="convection_diffusion", axes=("t", "x"), lo=(0.0, 0.0), hi=(1.0, 1.0),
        interior_op=op(("d1", 0, 1.0), ("d1", 1, c), ("d2", 1, -d)),
        source=lambda X: np.zeros(len(X)), exact=lambda X: exact_jet(X)[0],
        exact_jet=exact_jet,
        boundary_specs=[FaceSpec("initial", 0, "lo", initial),
                        PeriodicSpec(axis=1, orders=(0, 1))],
        params={"c": c, "d": d, "A_low": A_low, "A_high": A_high,
                "k_low": k_low, "k_high": k_high})


def make_burgers(nu=0.01 / np.pi, nonlinearity=1.0):
    """Viscous Burgers on ``[0,1] x [-1,1]``; no closed form (see :mod:`ifefpinn.reference`)."""
    if not nu > 0:
        raise ConfigurationError("viscosity must be positive")
    zero = lambda X: np.zeros(len(X))  # noqa: E731
    return PdeProblem(
        name="burgers", axes=("t", "x"), lo=(0.0, -1.0), hi=(1.0, 1.0),
        interior_op=NonlinearBurgers(nu, 0, 1, nonlinearity),
        source=zero, exact=None,
        boundary_specs=[FaceSpec("initial", 0, "lo", lambda X: -np.sin(np.pi * X[:, 1])),
                        FaceSpec("dirichlet", 1, "lo", zero),
                        FaceSpec("dirichlet", 1, "hi", zero)],
        params={"nu": nu})


SPECTRUM_FREQUENCIES = (1, 2, 5, 10, 30, 40, 50, 60, 70, 80)


def make_multiscale_convection(frequencies=SPECTRUM_FREQUENCIES, amplitudes=None, beta=1.0):
    """Convection on ``[0,1]^2`` with a sum-of-sines solution, data on x=0, x=1 and t=1."""
    f = np.asarray(frequencies, dtype=np.float64)
    A = np.ones_like(f) if amplitudes is None else np.asarray(amplitudes, dtype=np.float64)
    if A.shape != f.shape:
        raise ConfigurationError("frequencies and amplitudes differ in length")
    w = 2.0 * np.pi * f

    def exact_jet(X):
        X = np.atleast_2d(X)
        z = np.outer(X[:, 1] - beta * X[:, 0], w)
        s, c = np.sin(z) * A, np.cos(z) * A
        return np.stack([s.sum(1), -beta * (c * w).sum(1), (c * w).sum(1),
                         -beta ** 2 * (s * w * w).sum(1), -(s * w * w).sum(1)])

    exact = lambda X: exact_jet(X)[0]  # noqa: E731
    return PdeProblem(
        name="multiscale_convection", axes=("t", "x"), lo=(0.0, 0.0), hi=(1.0, 1.0),
        interior_op=op(("d1", 0, 1.0), ("d1", 1, beta)),
        source=lambda X: np.zeros(len(X)), exact=exact, exact_jet=exact_jet,
        boundary_specs=[FaceSpec("dirichlet", 1, "lo", exact),
                        FaceSpec("dirichlet", 1, "hi", exact),
                        FaceSpec("dirichlet", 0, "hi", exact)],
        params={"beta": beta, "frequencies": f.tolist(), "amplitudes": A.tolist()})


# ----------------------------------------------------------------- samplers

@dataclass
class CollocationSet:
    interior: np.ndarray
    conditions: list
    seed: int | None = None
    method: str = "uniform"

    @property
    def N_f(self):
        return len(self.interior)

    @property
    def N_u(self):
        return sum(c.n_rows for c in self.conditions)

    @property
    def n_boundary_points(self):
        return sum(c.n_points for c in self.conditions)

    def describe(self):
        return {"method": self.method, "seed": self.seed, "N_f": self.N_f, "N_u": self.N_u,
                "boundary_points": self.n_boundary_points,
                "per_condition": [[c.kind, c.n_points] for c in self.conditions]}


def allocate(total, weights):
    """Split ``total`` into integers proportional to ``weights`` (largest remainder)."""
    w = np.asarray(weights, dtype=np.float64)
    raw = total * w / w.sum()
    out = np.floor(raw).astype(int)
    for i in np.argsort(-(raw - out), kind="stable")[: total - out.sum()]:
        out[i] += 1
    return [int(v) for v in out]


def _stratified(n, lo, hi, rng):
    """One point per equal-width bin, bins visited in a random order."""
    u = (rng.permutation(n) + rng.uniform(size=n)) / n
    return lo + (hi - lo) * u


def _face_points(problem, axis, value, count, method, rng):
    free = [i for i in range(problem.dim) if i != axis]
    if len(free) != 1:
        raise ConfigurationError("boundary samplers support two-dimensional problems only")
    j = free[0]
    P = np.empty((count, problem.dim))
    P[:, axis] = value
    if method == "uniform":
        P[:, j] = np.linspace(problem.lo[j], problem.hi[j], count)
    else:
        P[:, j] = np.sort(_stratified(count, problem.lo[j], problem.hi[j], rng))
    return P


def sample_boundary(problem, n_boundary, method, rng):
    """Boundary conditions with ``n_boundary`` points split by face measure.

    Measures are taken in the unit-normalized box so that a long spatial axis
    does not starve the faces spanning a short time axis of points.
    """
    if n_boundary < 1:
        raise ConfigurationError("need at least one boundary point")
    weights = []
    for s in problem.boundary_specs:
        if isinstance(s, PeriodicSpec):
            weights.append(2.0 * problem.face_measure(s.axis, normalized=True))
        else:
            weights.append(problem.face_measure(s.axis, normalized=True))
    counts = allocate(n_boundary, weights)
    # pairs consume two points each; an odd leftover goes to the first face condition
    spare = 0
    for k, s in enumerate(problem.boundary_specs):
        if isinstance(s, PeriodicSpec) and counts[k] % 2:
            counts[k] -= 1
            spare += 1
    if spare:
        first = next(k for k, s in enumerate(problem.boundary_specs) if isinstance(s, FaceSpec))
        counts[first] += spare
    conds = []
    for s, cnt in zip(problem.boundary_specs, counts):
        if cnt == 0:
            continue
        if isinstance(s, PeriodicSpec):
            a = _face_points(problem, s.axis, problem.lo[s.axis], cnt // 2, method, rng)
            b = a.copy()
            b[:, s.axis] = problem.hi[s.axis]
            conds.append(PeriodicPair(a, b, tuple(s.orders), s.axis))
        else:
            value = problem.lo[s.axis] if s.side == "lo" else problem.hi[s.axis]
            P = _face_points(problem, s.axis, value, cnt, method, rng)
            cls = Initial if s.kind == "initial" else Dirichlet
            conds.append(cls(P, np.asarray(s.target(P), dtype=np.float64)))
    return conds


def uniform_grid(problem, shape):
    """Tensor-product grid (endpoints included) flattened to ``(prod(shape), n)``; last axis fastest."""
    if len(shape) != problem.dim or min(shape) < 1:
        raise ConfigurationError(f"grid shape {shape} does not fit a {problem.dim}-d problem")
    axes = [np.linspace(problem.lo[i], problem.hi[i], s) for i, s in enumerate(shape)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def sample_uniform(problem, n_boundary, interior_shape, seed=0):
    rng = np.random.Generator(np.random.PCG64(seed))
    return CollocationSet(uniform_grid(problem, interior_shape),
                          sample_boundary(problem, n_boundary, "uniform", rng), seed, "uniform")


def latin_hypercube(problem, count, rng):
    X = np.empty((count, problem.dim))
    for i in range(problem.dim):
        X[:, i] = _stratified(count, problem.lo[i], problem.hi[i], rng)
    return X


def sample_lhs(problem, n_boundary, n_interior, seed=0):
    if n_interior < 1:
        raise ConfigurationError("need at least one interior point")
    rng = np.random.Generator(np.random.PCG64(seed))
    X = latin_hypercube(problem, n_interior, rng)
    return CollocationSet(X, sample_boundary(problem, n_boundary, "lhs", rng), seed, "lhs")


# --------------------------------------------------------- design matrices

def _comp(problem, kind, axis=None):
    return Term(kind, axis, 1.0).index(problem.dim)


@dataclass
class RowMap:
    """Sparse maps from stacked feature jets to boundary and residual rows.

    Feature jets at the stacked points have shape ``(C, P, m)``; flattened to
    ``(C * P, m)`` they give ``B_u = SB @ J`` and (linear problems)
    ``R_f = SR @ J``. Interior points occupy the first ``N_f`` stacked slots.
    """

    points: np.ndarray
    order: int
    SB: sp.csr_matrix
    G: np.ndarray
    SR: sp.csr_matrix
    F: np.ndarray
    N_f: int

    @property
    def N_u(self):
        return self.SB.shape[0]


def build_rowmap(problem, colloc, order=None):
    """Stack interior and boundary points and encode every row as sparse weights."""
    order = problem.order if order is None else order
    n = problem.dim
    C = 1 + n * order
    blocks = [colloc.interior]
    for cond in colloc.conditions:
        blocks += [cond.points_a, cond.points_b] if isinstance(cond, PeriodicPair) else [cond.points]
    points = np.concatenate(blocks, axis=0)
    P = len(points)
    N_f = len(colloc.interior)

    rows, cols, vals, G = [], [], [], []
    pos = N_f
    for cond in colloc.conditions:
        if isinstance(cond, PeriodicPair):
            m = len(cond.points_a)
            idx = np.arange(m)
            for k in cond.orders:
                comp = 0 if k == 0 else 1 + cond.axis
                if k not in (0, 1) or comp >= C:
                    raise ConfigurationError(f"periodic derivative order {k} needs a higher jet order")
                r0 = len(G)
                rows += list(r0 + idx) * 2
                cols += list(comp * P + pos + idx) + list(comp * P + pos + m + idx)
                vals += [1.0] * m + [-1.0] * m
                G += [0.0] * m
            pos += 2 * m
        else:
            m = len(cond.points)
            r0 = len(G)
            rows += list(r0 + np.arange(m))
            cols += list(pos + np.arange(m))
            vals += [1.0] * m
            G += [float(v) for v in cond.targets]
            pos += m
    SB = sp.csr_matrix((vals, (rows, cols)), shape=(len(G), C * P))

    lin = problem.interior_op if problem.linear else problem.interior_op.linear_part()
    if lin.order > order:
        raise ConfigurationError("jet order too low for the interior operator")
    r_rows, r_cols, r_vals = [], [], []
    idx = np.arange(N_f)
    for t in lin.terms:
        r_rows += list(idx)
        r_cols += list(t.index(n) * P + idx)
        r_vals += [t.coeff] * N_f
    SR = sp.csr_matrix((r_vals, (r_rows, r_cols)), shape=(N_f, C * P))
    F = np.asarray(problem.source(colloc.interior), dtype=np.float64)
    return RowMap(points, order, SB, np.asarray(G), SR, F, N_f)


def design_matrices(problem, basis, rowmap):
    """``(B_u, G_u, R_f, F_f)``; ``R_f`` is the linear part only for Burgers."""
    J = feature_jets(basis, rowmap.points, rowmap.order)
    Jf = J.reshape(-1, J.shape[2])
    return rowmap.SB @ Jf, rowmap.G, rowmap.SR @ Jf, rowmap.F


def residual_row(problem, basis, x):
    """Row ``F[psi_k](x)`` for a linear problem (linear part for Burgers)."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    J = feature_jets(basis, x, problem.order)[:, 0, :]
    lin = problem.interior_op if problem.linear else problem.interior_op.linear_part()
    return lin.apply(J, problem.dim)


def boundary_row(problem, basis, tagged):
    """``(row, target)`` of one boundary constraint."""
    if not isinstance(tagged, TaggedPoint):
        raise ConfigurationError("boundary point carries no condition tag")
    order = max(1, tagged.order) if tagged.kind == "periodic" else 0
    if tagged.kind in ("dirichlet", "initial"):
        J = feature_jets(basis, np.reshape(tagged.point, (1, -1)), 0)
        return J[0, 0].copy(), float(tagged.target)
    if tagged.kind == "periodic":
        if tagged.partner is None:
            raise ConfigurationError("periodic point needs a partner")
        X = np.stack([np.asarray(tagged.point, float), np.asarray(tagged.partner, float)])
        J = feature_jets(basis, X, order)
        comp = 0 if tagged.order == 0 else 1 + tagged.axis
        return J[comp, 0] - J[comp, 1], 0.0
    raise ConfigurationError(f"unknown boundary kind {tagged.kind!r}")


def tagged_points(colloc):
    """Every boundary constraint of a collocation set as a :class:`TaggedPoint`."""
    out = []
    for cond in colloc.conditions:
        if isinstance(cond, PeriodicPair):
            for k in cond.orders:
                out += [TaggedPoint("periodic", a, 0.0, b, k, cond.axis)
                        for a, b in zip(cond.points_a, cond.points_b)]
        else:
            out += [TaggedPoint(cond.kind, x, float(g)) for x, g in zip(cond.points, cond.targets)]
    return out

"""Lower-level regression: quadratic assembly, Tikhonov solve, nonlinear fallback."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConfigurationError, DivergenceError, NumericError, SingularSystemError
from .features import feature_jets
from .optim import Adam
from .pde import CollocationSet, build_rowmap


class RankWarning(UserWarning):
    """Fewer sampled constraints than coefficients; only regularization makes the solve unique."""


@dataclass
class QpSystem:
    """``L(theta) = 0.5 theta^T Q theta + c^T theta + b``."""

    Q: np.ndarray
    c: np.ndarray
    b: float
    N_u: int
    N_f: int
    lambda_ll: float

    @property
    def dim(self):
        return self.c.shape[0]

    def loss(self, theta):
        return 0.5 * theta @ self.Q @ theta + self.c @ theta + self.b

    def gradient(self, theta):
        return self.Q @ theta + self.c

    def dump(self, path):
        """Write ``Q``, ``c``, ``b`` and the counts to an ``.npz`` archive."""
        np.savez(path, Q=self.Q, c=self.c, b=np.array(self.b),
                 N_u=np.array(self.N_u), N_f=np.array(self.N_f),
                 lambda_ll=np.array(self.lambda_ll))


def sampled_loss(B_u, G_u, R_f, F_f, lambda_ll, theta):
    """Boundary mean-square misfit plus ``lambda_ll`` times interior mean-square residual."""
    rb = B_u @ theta - G_u
    rf = R_f @ theta - F_f
    return rb @ rb / len(rb) + lambda_ll * (rf @ rf) / len(rf)


def assemble(B_u, G_u, R_f, F_f, lambda_ll):
    B_u, R_f = np.atleast_2d(B_u), np.atleast_2d(R_f)
    G_u, F_f = np.asarray(G_u, float).ravel(), np.asarray(F_f, float).ravel()
    if B_u.shape[1] != R_f.shape[1]:
        raise ConfigurationError(f"B_u has {B_u.shape[1]} columns, R_f has {R_f.shape[1]}")
    if B_u.shape[0] != G_u.shape[0] or R_f.shape[0] != F_f.shape[0]:
        raise ConfigurationError("row counts of design matrices and targets differ")
    if not lambda_ll > 0:
        raise ConfigurationError("lambda_ll must be positive")
    acc = QpAccumulator(B_u.shape[1])
    acc.add_boundary(B_u, G_u)
    acc.add_interior(R_f, F_f)
    return acc.finish(lambda_ll)


class QpAccumulator:
    """Gram products accumulated block by block, in call order."""

    def __init__(self, dim):
        self.BtB = np.zeros((dim, dim))
        self.BtG = np.zeros(dim)
        self.GtG = 0.0
        self.RtR = np.zeros((dim, dim))
        self.RtF = np.zeros(dim)
        self.FtF = 0.0
        self.N_u = 0
        self.N_f = 0

    def add_boundary(self, B, G):
        self.BtB += B.T @ B
        self.BtG += B.T @ G
        self.GtG += float(G @ G)
        self.N_u += B.shape[0]

    def add_interior(self, R, F):
        self.RtR += R.T @ R
        self.RtF += R.T @ F
        self.FtF += float(F @ F)
        self.N_f += R.shape[0]

    def finish(self, lambda_ll):
        if self.N_u == 0 or self.N_f == 0:
            raise ConfigurationError("need boundary and interior rows")
        wu, wf = 1.0 / self.N_u, lambda_ll / self.N_f
        Q = 2 * wu * self.BtB + 2 * wf * self.RtR
        Q = 0.5 * (Q + Q.T)
        c = -2 * wu * self.BtG - 2 * wf * self.RtF
        b = wu * self.GtG + wf * self.FtF
        return QpSystem(Q, c, b, self.N_u, self.N_f, lambda_ll)


def assemble_problem(problem, basis, colloc, lambda_ll, chunk=2048):
    """Assemble the QP for a linear problem without materializing the full ``R_f``."""
    if not problem.linear:
        raise ConfigurationError("closed-form assembly needs a linear interior operator")
    bnd = CollocationSet(np.zeros((0, problem.dim)), colloc.conditions, colloc.seed)
    rm = build_rowmap(problem, bnd)
    J = feature_jets(basis, rm.points, rm.order)
    acc = QpAccumulator(basis.dim)
    acc.add_boundary(rm.SB @ J.reshape(-1, J.shape[2]), rm.G)
    X = colloc.interior
    for s in range(0, len(X), chunk):
        Xc = X[s:s + chunk]
        Jc = feature_jets(basis, Xc, problem.interior_op.order)
        acc.add_interior(problem.interior_op.apply(Jc, problem.dim), problem.source(Xc))
    return acc.finish(lambda_ll)


class RankStatus(enum.Enum):
    OK = "ok"
    WARNING = "underdetermined"
    ERROR = "singular"


def rank_guard(system, gamma, D=None):
    """Check the sample-count condition ``N_u + N_f >= 2D``.

    ``D`` is the number of Fourier pairs; by default it is read off ``system``.
    """
    n_coef = system.dim if D is None else 2 * D
    if system.N_u + system.N_f >= n_coef:
        return RankStatus.OK
    return RankStatus.WARNING if gamma > 0 else RankStatus.ERROR


def _min_pivot(A):
    _, d, _ = sla.ldl(A)
    return float(np.linalg.eigvalsh(d).min())


def solve_regularized(system, gamma=0.0, refine=2):
    """``theta = -(Q + gamma I)^{-1} c`` by Cholesky.

    If the factorization fails and ``gamma > 0`` it is retried once with
    ``10 * gamma``; a second failure raises :class:`SingularSystemError`.
    """
    if gamma < 0:
        raise ConfigurationError("gamma must be non-negative")
    Q, c = system.Q, system.c
    eye = np.eye(system.dim)
    attempts = [gamma, 10.0 * gamma] if gamma > 0 else [gamma]
    for g in attempts:
        A = Q + g * eye
        try:
            fac = sla.cho_factor(A, lower=True, check_finite=True)
        except np.linalg.LinAlgError:
            continue
        if g != gamma:
            warnings.warn(f"Cholesky failed at gamma={gamma:g}; used {g:g}", RankWarning,
                          stacklevel=2)
        break
    else:
        raise SingularSystemError(
            f"Q + gamma I is not positive definite (gamma={gamma:g})",
            min_pivot=_min_pivot(Q + attempts[-1] * eye))
    theta = sla.cho_solve(fac, -c)
    tol = 1e-8 * (1.0 + np.abs(c).max())
    for _ in range(refine + 1):
        r = A @ theta + c
        if np.abs(r).max() <= tol:
            return theta
        theta = theta - sla.cho_solve(fac, r)
    r = A @ theta + c
    if np.abs(r).max() > tol:
        raise NumericError(f"lower solve residual {np.abs(r).max():.3e} exceeds {tol:.3e}")
    return theta


# ----------------------------------------------------------- nonlinear path

@dataclass
class BurgersSystem:
    """Frozen-feature matrices for the Burgers lower problem at fixed hidden weights."""

    B: np.ndarray
    G: np.ndarray
    P: np.ndarray    # u
    Pt: np.ndarray   # u_t
    Px: np.ndarray   # u_x
    Pxx: np.ndarray  # u_xx
    F: np.ndarray
    nu: float
    nonlinearity: float
    lambda_ll: float

    def residual(self, theta):
        u, ux = self.P @ theta, self.Px @ theta
        return self.Pt @ theta + self.nonlinearity * u * ux - self.nu * (self.Pxx @ theta) - self.F

    def loss_grad(self, theta):
        rb = self.B @ theta - self.G
        u, ux = self.P @ theta, self.Px @ theta
        r = self.Pt @ theta + self.nonlinearity * u * ux - self.nu * (self.Pxx @ theta) - self.F
        wu, wf = 1.0 / len(rb), self.lambda_ll / len(r)
        loss = wu * rb @ rb + wf * r @ r
        a = self.nonlinearity
        g = 2 * wu * (self.B.T @ rb) + 2 * wf * (
            self.Pt.T @ r - self.nu * (self.Pxx.T @ r) + a * (self.P.T @ (r * ux) + self.Px.T @ (r * u)))
        return loss, g


def burgers_system(problem, basis, colloc, lambda_ll):
    opr = problem.interior_op
    rm = build_rowmap(problem, colloc)
    J = feature_jets(basis, rm.points, rm.order)
    B = rm.SB @ J.reshape(-1, J.shape[2])
    n, Nf = problem.dim, rm.N_f
    return BurgersSystem(
        B=B, G=rm.G, P=J[0, :Nf], Pt=J[1 + opr.t_axis, :Nf], Px=J[1 + opr.x_axis, :Nf],
        Pxx=J[1 + n + opr.x_axis, :Nf], F=rm.F, nu=opr.nu, nonlinearity=opr.nonlinearity,
        lambda_ll=lambda_ll)


def nonlinear_lower_solve(system, theta0, steps=2000, lr=1e-3):
    """Adam on ``theta`` for a :class:`BurgersSystem`; returns the best iterate and the loss trace.

    The best iterate (lowest loss, ``theta0`` included) is returned, so the
    result never has a higher loss than the start.
    """
    theta = np.array(theta0, dtype=np.float64)
    loss0, g = system.loss_grad(theta)
    best, best_loss = theta.copy(), loss0
    trace = [loss0]
    opt = Adam(lr)
    for _ in range(steps):
        theta = opt.step(theta, g)
        loss, g = system.loss_grad(theta)
        trace.append(loss)
        if not np.isfinite(loss) or loss > 10.0 * loss0 > 0:
            raise DivergenceError(f"nonlinear lower solve diverged (loss {loss:.3e} from {loss0:.3e})",
                                  trace=trace)
        if loss < best_loss:
            best, best_loss = theta.copy(), loss
    return best, trace

"""Warm start, bi-level training loop, IFT hypergradient and primal-dual weights."""

from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericError, SingularSystemError
from .features import FeatureBasis, feature_backward, feature_jets, sample_rff
from .jets import backward_jets, forward_jets
from .losses import PinnLoss
from .lower import (BurgersSystem, QpSystem, assemble, RankStatus, RankWarning, nonlinear_lower_solve,
                    rank_guard, solve_regularized)
from .optim import make_optimizer

METRIC_COLUMNS = ("epoch", "lower_loss", "upper_loss", "rel_l2", "lambda", "wall_ms")


@dataclass
class TrainConfig:
    lambda_ll: float = 1e-2
    gamma: float = 1e-7
    D: int = 800
    sigma: float = 1.0
    lambda_pretrain: float = 0.01
    lambda_upper: float | None = None   # None: same as lambda_ll
    pretrain_epochs: int = 5000
    ifef_epochs: int = 2000
    pretrain_lr: float = 1e-3
    upper_lr: float = 1e-3
    upper_optimizer: str = "adam"
    dual_lr: float = 1e-4
    lambda_min: float = 1e-8
    lambda_max: float = 1e4
    extension_mode: str = "rff"
    variant: str = "ifef"
    seed: int = 0
    nonlinear_steps: int = 2000
    nonlinear_lr: float = 1e-3
    eval_every: int = 0                 # 0: evaluate only at the end
    record_wall_time: bool = False

    def __post_init__(self):
        if self.variant not in ("ifef", "ifef_pd", "vanilla"):
            raise ConfigurationError(f"unknown variant {self.variant!r}")
        if self.extension_mode not in ("rff", "none"):
            raise ConfigurationError(f"unknown extension mode {self.extension_mode!r}")
        if self.upper_optimizer not in ("adam", "gd"):
            raise ConfigurationError(f"unknown upper optimizer {self.upper_optimizer!r}")
        if not self.lambda_ll > 0:
            raise ConfigurationError("lambda_ll must be positive")
        if self.lambda_upper is not None and not self.lambda_upper > 0:
            raise ConfigurationError("lambda_upper must be positive")
        if not self.lambda_pretrain > 0:
            raise ConfigurationError("lambda_pretrain must be positive")
        if self.gamma < 0:
            raise ConfigurationError("gamma must be non-negative")
        for name in ("pretrain_lr", "upper_lr", "dual_lr", "nonlinear_lr", "sigma"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        for name in ("pretrain_epochs", "ifef_epochs", "nonlinear_steps", "eval_every"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")
        if self.extension_mode == "rff" and self.D < 1:
            raise ConfigurationError("D must be at least 1")
        if not 0 < self.lambda_min <= self.lambda_max:
            raise ConfigurationError("need 0 < lambda_min <= lambda_max")

    @property
    def upper_lambda(self):
        return self.lambda_ll if self.lambda_upper is None else self.lambda_upper

    def seeds(self):
        """Integer seeds for (network init, RFF matrix, collocation sampling)."""
        kids = np.random.SeedSequence(self.seed).spawn(3)
        return tuple(int(k.generate_state(1)[0]) for k in kids)

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainResult:
    basis: FeatureBasis
    theta: np.ndarray
    history: list = field(default_factory=list)
    pretrain_history: list = field(default_factory=list)
    lambda_final: float | None = None


def _row(epoch, lower, upper, rel, lam, t0, timed):
    return {"epoch": epoch, "lower_loss": lower, "upper_loss": upper, "rel_l2": rel,
            "lambda": lam, "wall_ms": round((time.perf_counter() - t0) * 1e3, 3) if timed else 0.0}


# ------------------------------------------------------------ warm start

def pretrain_vanilla(problem, params0, colloc, config, epochs=None, evaluator=None):
    """Adam on ``(hidden weights, readout)`` for the plain PINN loss with ``lambda_pretrain``.

    Returns ``(params, history)``; ``params`` keeps the trained readout.
    """
    epochs = config.pretrain_epochs if epochs is None else epochs
    params = params0.copy()
    if params.readout is None:
        raise ConfigurationError("vanilla training needs a readout vector")
    if epochs == 0:
        return params, []
    loss = PinnLoss(problem, colloc, config.lambda_pretrain)
    opt = make_optimizer("adam", config.pretrain_lr)
    x = params.flatten(include_readout=True)
    history = []
    t0 = time.perf_counter()
    for epoch in range(epochs):
        try:
            H, cache = forward_jets(params, loss.points, loss.order)
            parts = loss(H, params.readout)
            g = np.concatenate([backward_jets(params, cache, parts.jets_bar), parts.coef_grad])
        except NumericError as exc:
            raise NumericError(f"pre-training failed at epoch {epoch}: {exc}", index=epoch) from exc
        rel = np.nan
        if evaluator is not None and config.eval_every and (epoch + 1) % config.eval_every == 0:
            rel = evaluator(FeatureBasis(params), params.readout)
        history.append(_row(epoch, np.nan, parts.total, rel, config.lambda_pretrain, t0,
                            config.record_wall_time))
        x = opt.step(x, g)
        params = params.with_flat(x, include_readout=True)
    return params, history


# ------------------------------------------------------------ bi-level loop

def upper_step(basis, theta, loss, optimizer, lam=None, J=None, cache=None):
    """One optimizer step on the hidden weights at fixed ``theta``.

    Returns ``(new_basis, loss_parts)``; ``loss_parts`` is evaluated at the
    incoming weights.
    """
    if not np.isfinite(theta).all():
        raise NumericError("non-finite readout coefficients")
    if J is None:
        J, cache = feature_jets(basis, loss.points, loss.order, keep=True)
    parts = loss(J, theta, lam)
    g = feature_backward(basis, cache, parts.jets_bar)
    x = optimizer.step(basis.params.flatten(), g)
    return basis.with_params(basis.params.with_flat(x)), parts


def primal_dual_update(lam, physics_residual_mean, dual_lr, lam_min=1e-8, lam_max=1e4):
    """Multiplier ascent on the physics weight, clamped to ``[lam_min, lam_max]``."""
    if not lam > 0:
        raise ConfigurationError("physics weight must be positive")
    return float(np.clip(lam + dual_lr * physics_residual_mean, lam_min, lam_max))


def _qp_from_jets(loss, J, lambda_ll):
    rm = loss.rowmap
    Jf = J.reshape(-1, J.shape[2])
    B = rm.SB @ Jf
    R = rm.SR @ Jf
    return assemble(B, rm.G, R, rm.F, lambda_ll), B, R


def _check_rank(system, gamma):
    status = rank_guard(system, gamma)
    if status is RankStatus.ERROR:
        raise SingularSystemError(
            f"N_u + N_f = {system.N_u + system.N_f} < {system.dim} coefficients and gamma = 0")
    if status is RankStatus.WARNING:
        warnings.warn(f"N_u + N_f = {system.N_u + system.N_f} < {system.dim}; relying on "
                      f"Tikhonov term gamma={gamma:g}", RankWarning, stacklevel=3)
    return status


def lower_solve(problem, loss, J, config, theta_prev=None):
    """Lower-level update at fixed features. Returns ``(theta, loss_before, loss_after)``.

    ``loss_before`` is the lower loss of ``theta_prev`` (NaN when absent).
    """
    if problem.linear:
        system, _, _ = _qp_from_jets(loss, J, config.lambda_ll)
        _check_rank(system, config.gamma)
        theta = solve_regularized(system, config.gamma)
        before = system.loss(theta_prev) if theta_prev is not None else np.nan
        return theta, before, system.loss(theta)
    sysn = _burgers_from_jets(problem, loss, J, config.lambda_ll)
    if theta_prev is None:
        theta_prev = _burgers_linear_start(sysn, config.gamma)
    before = sysn.loss_grad(theta_prev)[0]
    theta, trace = nonlinear_lower_solve(sysn, theta_prev, config.nonlinear_steps, config.nonlinear_lr)
    return theta, before, min(trace)


def _burgers_from_jets(problem, loss, J, lambda_ll):
    opr = problem.interior_op
    rm = loss.rowmap
    n, Nf = problem.dim, rm.N_f
    return BurgersSystem(
        B=rm.SB @ J.reshape(-1, J.shape[2]), G=rm.G, P=J[0, :Nf], Pt=J[1 + opr.t_axis, :Nf],
        Px=J[1 + opr.x_axis, :Nf], Pxx=J[1 + n + opr.x_axis, :Nf], F=rm.F, nu=opr.nu,
        nonlinearity=opr.nonlinearity, lambda_ll=lambda_ll)


def _burgers_linear_start(sysn, gamma):
    """Closed-form solve of the Burgers lower problem with the u*u_x term dropped."""
    wu, wf = 1.0 / len(sysn.G), sysn.lambda_ll / len(sysn.F)
    R = sysn.Pt - sysn.nu * sysn.Pxx
    Q = 2 * wu * sysn.B.T @ sysn.B + 2 * wf * R.T @ R
    c = -2 * wu * sysn.B.T @ sysn.G - 2 * wf * R.T @ sysn.F
    system = QpSystem(0.5 * (Q + Q.T), c, 0.0, len(sysn.G), len(sysn.F), sysn.lambda_ll)
    return solve_regularized(system, max(gamma, 1e-10))


def ifef_train(problem, basis0, colloc, config, evaluator=None, on_epoch=None):
    """Alternate exact lower solves with single upper steps; return :class:`TrainResult`.

    Each epoch ``k``: features at ``omega_k`` -> ``theta_{k+1}`` (lower update)
    -> one step on ``omega`` at fixed ``theta_{k+1}``. After the last epoch the
    lower problem is solved once more at the final weights.
    """
    lam_up = config.upper_lambda
    loss = PinnLoss(problem, colloc, lam_up)
    opt = make_optimizer(config.upper_optimizer, config.upper_lr)
    basis = basis0
    theta = None
    history = []
    t0 = time.perf_counter()
    for epoch in range(config.ifef_epochs):
        J, cache = feature_jets(basis, loss.points, loss.order, keep=True)
        theta_new, before, after = lower_solve(problem, loss, J, config, theta)
        new_basis, parts = upper_step(basis, theta_new, loss, opt, lam_up, J, cache)
        rel = np.nan
        if evaluator is not None and config.eval_every and (epoch + 1) % config.eval_every == 0:
            rel = evaluator(basis, theta_new)
        row = _row(epoch, after, parts.total, rel, lam_up, t0, config.record_wall_time)
        row["lower_loss_prev"] = before
        row["physics"] = parts.physics
        history.append(row)
        if on_epoch is not None:
            on_epoch(row)
        if config.variant == "ifef_pd":
            lam_up = primal_dual_update(lam_up, parts.physics, config.dual_lr,
                                        config.lambda_min, config.lambda_max)
        basis, theta = new_basis, theta_new
    J = feature_jets(basis, loss.points, loss.order)
    theta, _, _ = lower_solve(problem, loss, J, config, theta)
    return TrainResult(basis, theta, history, lambda_final=lam_up)


# --------------------------------------------------------- hypergradient

def lower_objective_theta(problem, basis, colloc, config):
    """``theta*(omega)`` for a linear problem (closed form, regularized)."""
    loss = PinnLoss(problem, colloc, config.upper_lambda)
    J = feature_jets(basis, loss.points, loss.order)
    system, _, _ = _qp_from_jets(loss, J, config.lambda_ll)
    return solve_regularized(system, config.gamma)


def upper_at_optimum(problem, basis, colloc, config):
    """``L_upper(omega, theta*(omega))``: the map whose gradient is the hypergradient."""
    loss = PinnLoss(problem, colloc, config.upper_lambda)
    J = feature_jets(basis, loss.points, loss.order)
    system, _, _ = _qp_from_jets(loss, J, config.lambda_ll)
    theta = solve_regularized(system, config.gamma)
    return loss(J, theta, need_jets_bar=False).total


def hypergradient_ift(problem, basis, colloc, config, return_parts=False):
    """Total gradient of ``omega -> L_upper(omega, theta*(omega))`` via the implicit function theorem.

    ``theta*`` solves ``(Q + gamma I) theta + c = 0``, so
    ``d theta* = -(Q + gamma I)^{-1} (dQ theta* + dc)`` and the correction
    term is ``-grad_omega[v^T (Q(omega) theta* + c(omega))]`` with
    ``v = (Q + gamma I)^{-1} dL/dtheta`` held fixed.
    """
    if not problem.linear:
        raise ConfigurationError("hypergradient oracle needs a linear problem")
    loss = PinnLoss(problem, colloc, config.upper_lambda)
    J, cache = feature_jets(basis, loss.points, loss.order, keep=True)
    system, B, R = _qp_from_jets(loss, J, config.lambda_ll)
    theta = solve_regularized(system, config.gamma)
    parts = loss(J, theta)
    partial = feature_backward(basis, cache, parts.jets_bar)
    A = system.Q + config.gamma * np.eye(system.dim)
    v = np.linalg.solve(A, parts.coef_grad)
    rm = loss.rowmap
    wu, wf = 1.0 / system.N_u, config.lambda_ll / system.N_f
    rb, rf = B @ theta - rm.G, R @ theta - rm.F
    Bbar = 2 * wu * (np.outer(rb, v) + np.outer(B @ v, theta))
    Rbar = 2 * wf * (np.outer(rf, v) + np.outer(R @ v, theta))
    Jbar = (rm.SB.T @ Bbar + rm.SR.T @ Rbar).reshape(J.shape)
    correction = feature_backward(basis, cache, Jbar)
    total = partial - correction
    if return_parts:
        return total, partial, correction
    return total


# -------------------------------------------------------------- drivers

def build_basis(params, config, rff_seed, D=None):
    if config.extension_mode == "none":
        return FeatureBasis(params.copy())
    D = config.D if D is None else D
    return FeatureBasis(params.copy(), sample_rff(D, params.width, config.sigma, rff_seed))


def run_training(problem, params0, colloc, config, evaluator=None, on_epoch=None):
    """Run the configured variant from initial parameters ``params0``.

    ``vanilla`` trains the plain PINN for ``pretrain_epochs + ifef_epochs``
    epochs (equal budget); the IFeF variants pre-train for
    ``pretrain_epochs`` and then run the bi-level loop.
    """
    _, rff_seed, _ = config.seeds()
    if config.variant == "vanilla":
        params, hist = pretrain_vanilla(problem, params0, colloc, config,
                                        config.pretrain_epochs + config.ifef_epochs, evaluator)
        return TrainResult(FeatureBasis(params), params.readout.copy(), hist, [])
    params, pre_hist = pretrain_vanilla(problem, params0, colloc, config, None, evaluator)
    basis = build_basis(params, config, rff_seed)
    result = ifef_train(problem, basis, colloc, config, evaluator, on_epoch)
    result.pretrain_history = pre_hist
    return result

"""Fast oracle suite behind ``ifef selfcheck``.

Each check returns ``(ok, detail)``; :func:`run_checks` collects
``(name, ok, detail)`` triples and never raises.
"""

from __future__ import annotations

import numpy as np

from .evaluate import SpectrumConfig, relative_l2, spectrum_magnitudes
from .features import FeatureBasis, feature_jets, sample_rff
from .jets import NetworkParams, forward_jets, param_gradient
from .losses import PinnLoss
from .lower import assemble, sampled_loss, solve_regularized
from .pde import (make_burgers, make_convection, make_convection_diffusion, make_helmholtz,
                  make_multiscale_convection, sample_lhs)


def _rng(seed=0):
    return np.random.default_rng(seed)


def check_jets(n_points=200, seed=0):
    """Jet derivatives of a random tanh net against central differences."""
    rng = _rng(seed)
    params = NetworkParams.init([2, 16, 16, 8], seed)
    X = rng.uniform(-1, 1, (n_points, 2))
    H, _ = forward_jets(params, X, 2, keep=False)
    f = lambda Y: forward_jets(params, Y, 0, keep=False)[0][0]  # noqa: E731
    e1 = e2 = 0.0
    for i in range(2):
        h = np.zeros(2)
        h[i] = 1e-5
        d1 = (f(X + h) - f(X - h)) / 2e-5
        e1 = max(e1, np.abs(d1 - H[1 + i]).max() / max(1.0, np.abs(H[1 + i]).max()))
        h[i] = 1e-4
        d2 = (f(X + h) - 2 * f(X) + f(X - h)) / 1e-8
        e2 = max(e2, np.abs(d2 - H[3 + i]).max() / max(1.0, np.abs(H[3 + i]).max()))
    return e1 <= 1e-6 and e2 <= 1e-4, f"first={e1:.1e} second={e2:.1e}"


def check_param_gradient(seed=0):
    """Gradient of the sampled Helmholtz loss (Laplacian terms) against parameter FD."""
    rng = _rng(seed)
    prob = make_helmholtz()
    colloc = sample_lhs(prob, 12, 20, seed)
    params = NetworkParams.init([2, 5, 4], seed)
    loss = PinnLoss(prob, colloc, 0.3)
    coef = rng.standard_normal(params.width)

    def L(p):
        return loss(forward_jets(p, loss.points, loss.order, keep=False)[0], coef,
                    need_jets_bar=False).total

    def closure(H):
        parts = loss(H, coef)
        return parts.total, parts.jets_bar

    _, g = param_gradient(closure, params, loss.points, loss.order)
    x = params.flatten()
    fd = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = 1e-6
        fd[k] = (L(params.with_flat(x + e)) - L(params.with_flat(x - e))) / 2e-6
    err = np.abs(fd - g).max() / np.abs(g).max()
    return err <= 1e-5, f"params={x.size} rel={err:.1e}"


def check_qp(seed=0, systems=10):
    """Quadratic form equals the sampled loss; Cholesky solve matches a normal-equation solve."""
    rng = _rng(seed)
    worst_loss = worst_sol = 0.0
    for _ in range(systems):
        m = int(rng.choice([6, 20]))
        B, G = rng.standard_normal((15, m)), rng.standard_normal(15)
        R, F = rng.standard_normal((40, m)), rng.standard_normal(40)
        lam = float(rng.uniform(0.01, 1))
        S = assemble(B, G, R, F, lam)
        th = rng.standard_normal(m)
        ref = sampled_loss(B, G, R, F, lam, th)
        worst_loss = max(worst_loss, abs(S.loss(th) - ref) / abs(ref))
        A = np.vstack([B / np.sqrt(15), R * np.sqrt(lam / 40)])
        y = np.concatenate([G / np.sqrt(15), F * np.sqrt(lam / 40)])
        ls = np.linalg.lstsq(A, y, rcond=None)[0]
        worst_sol = max(worst_sol, np.abs(solve_regularized(S, 0.0) - ls).max())
    ok = worst_loss <= 1e-12 and worst_sol <= 1e-6
    return ok, f"loss_rel={worst_loss:.1e} solve_inf={worst_sol:.1e}"


def check_suite(seed=0, n=100):
    """Every closed-form solution satisfies its PDE and boundary conditions."""
    worst = 0.0
    for prob in (make_helmholtz(), make_helmholtz(100, 100, (0, 0), (0.2, 0.2)),
                 make_convection(50.0), make_convection(200.0), make_convection_diffusion(),
                 make_multiscale_convection()):
        colloc = sample_lhs(prob, 40, n, seed)
        loss = PinnLoss(prob, colloc, 1.0)
        J = prob.exact_jet(loss.points)[: 1 + prob.dim * loss.order, :, None]
        parts = loss(J, np.ones(1), need_jets_bar=False)
        scale = max(1.0, float(np.abs(J).max()))
        worst = max(worst, np.sqrt(parts.boundary) / scale, np.sqrt(parts.physics) / scale)
    make_burgers()  # constructible; checked against the stored reference elsewhere
    return worst <= 1e-8, f"max_scaled_residual={worst:.1e}"


def check_norm():
    rng = _rng(1)
    e = rng.standard_normal(300)
    ok = relative_l2(e, e) == 0.0 and abs(relative_l2(2 * e, e) - 1.0) < 1e-15
    ok = ok and abs(relative_l2(-3 * e, -3 * (e + 0.0)) - 0.0) < 1e-15
    return ok, "identity and scaling"


def check_spectrum():
    cfg = SpectrumConfig()
    f = np.asarray(cfg.frequencies)
    u = lambda X: np.sin(2 * np.pi * np.outer(X[:, 1], f)).sum(axis=1)  # noqa: E731
    err = np.abs(spectrum_magnitudes(u, cfg) - 1.0).max()
    return err <= 1e-8, f"calibration={err:.1e}"


def check_rff_nesting():
    big, small = sample_rff(64, 8, 1.0, 3), sample_rff(16, 8, 1.0, 3)
    ok = np.array_equal(big.B[:16], small.B)
    params = NetworkParams.init([2, 8], 0)
    P = feature_jets(FeatureBasis(params, small), np.zeros((1, 2)), 0)[0, 0]
    ok = ok and abs(P @ P - 1.0) < 1e-12
    return ok, "prefix and unit feature norm"


CHECKS = [
    ("jets_fd", check_jets),
    ("param_gradient_fd", check_param_gradient),
    ("qp_equivalence", check_qp),
    ("suite_consistency", check_suite),
    ("relative_l2", check_norm),
    ("spectrum_calibration", check_spectrum),
    ("rff_nesting", check_rff_nesting),
]


def run_checks():
    out = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # report, never crash the suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out

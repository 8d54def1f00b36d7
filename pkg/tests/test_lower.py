import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ifefpinn.errors import ConfigurationError, DivergenceError, SingularSystemError
from ifefpinn.evaluate import nested_subsystem
from ifefpinn.features import FeatureBasis, sample_rff
from ifefpinn.jets import NetworkParams
from ifefpinn.lower import (QpSystem, RankStatus, RankWarning, assemble, assemble_problem,
                            burgers_system, nonlinear_lower_solve, rank_guard, sampled_loss,
                            solve_regularized)
from ifefpinn.pde import (build_rowmap, design_matrices, make_burgers, make_helmholtz,
                          sample_lhs)


def random_system(rng, m, nb=15, nf=40, lam=None):
    B, G = rng.standard_normal((nb, m)), rng.standard_normal(nb)
    R, F = rng.standard_normal((nf, m)), rng.standard_normal(nf)
    lam = float(rng.uniform(0.01, 1)) if lam is None else lam
    return (B, G, R, F, lam), assemble(B, G, R, F, lam)


@given(st.integers(0, 2 ** 31), st.sampled_from([6, 20]))
def test_quadratic_form_equals_sampled_loss(seed, m):
    rng = np.random.default_rng(seed)
    args, S = random_system(rng, m)
    th = rng.standard_normal(m) * rng.choice([1e-3, 1.0, 1e3])
    ref = sampled_loss(*args, th)
    assert S.loss(th) == pytest.approx(ref, rel=1e-12, abs=1e-300)


def gd_minimize(S, gamma=0.0, tol=1e-13):
    """Plain gradient descent with step 1/L; the independent oracle for the Cholesky solve."""
    A = S.Q + gamma * np.eye(S.dim)
    L = np.linalg.eigvalsh(A).max()
    th = np.zeros(S.dim)
    for _ in range(200000):
        g = A @ th + S.c
        if np.abs(g).max() < tol:
            break
        th -= g / L
    return th


@pytest.mark.parametrize("seed", range(5))
def test_solve_matches_gradient_descent(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((10, 10))
    S = QpSystem(M @ M.T + np.eye(10), rng.standard_normal(10), 0.0, 1, 1, 1.0)
    np.testing.assert_allclose(solve_regularized(S), gd_minimize(S), atol=1e-6)


def test_solution_is_minimizer():
    rng = np.random.default_rng(3)
    _, S = random_system(rng, 20)
    th = solve_regularized(S, 0.0)
    f0 = S.loss(th)
    for _ in range(50):
        d = rng.standard_normal(20)
        assert S.loss(th + 1e-3 * d / np.linalg.norm(d)) >= f0
    assert np.abs(S.gradient(th)).max() < 1e-10


def test_gamma_shifts_solution():
    rng = np.random.default_rng(4)
    _, S = random_system(rng, 6)
    th = solve_regularized(S, 0.5)
    np.testing.assert_allclose((S.Q + 0.5 * np.eye(6)) @ th, -S.c, atol=1e-12)
    with pytest.raises(ConfigurationError):
        solve_regularized(S, -1.0)


def test_assemble_validation():
    rng = np.random.default_rng(0)
    (B, G, R, F, _), _ = random_system(rng, 6)
    with pytest.raises(ConfigurationError):
        assemble(B, G, R[:, :5], F, 1.0)
    with pytest.raises(ConfigurationError):
        assemble(B, G[:-1], R, F, 1.0)
    with pytest.raises(ConfigurationError):
        assemble(B, G, R, F, 0.0)


def test_q_symmetric_psd():
    rng = np.random.default_rng(1)
    _, S = random_system(rng, 20)
    assert np.array_equal(S.Q, S.Q.T)
    assert np.linalg.eigvalsh(S.Q).min() > -1e-12


# ------------------------------------------------------------- rank guard

def underdetermined(rng, m=20):
    return random_system(rng, m, nb=3, nf=5)


def test_rank_guard_states():
    rng = np.random.default_rng(0)
    _, S = underdetermined(rng)
    assert rank_guard(S, 0.0) is RankStatus.ERROR
    assert rank_guard(S, 1e-7) is RankStatus.WARNING
    _, S2 = random_system(rng, 6)
    assert rank_guard(S2, 0.0) is RankStatus.OK
    assert rank_guard(S2, 0.0, D=100) is RankStatus.ERROR


def test_singular_system_raises_with_pivot():
    rng = np.random.default_rng(0)
    _, S = underdetermined(rng)
    S.Q[:] = 0.0
    S.Q[0, 0] = -1.0
    with pytest.raises(SingularSystemError) as ei:
        solve_regularized(S, 0.0)
    assert ei.value.min_pivot is not None and ei.value.min_pivot < 0


def test_cholesky_retry_warns():
    S = QpSystem(np.diag([1.0, -1.5e-7]), np.ones(2), 0.0, 1, 1, 1.0)
    with pytest.warns(RankWarning, match="used 1e-06"):
        th = solve_regularized(S, 1e-7)
    np.testing.assert_allclose((S.Q + 1e-6 * np.eye(2)) @ th, -S.c, rtol=1e-9)


# ------------------------------------------------------- problem assembly

@pytest.fixture(scope="module")
def helm():
    prob = make_helmholtz()
    colloc = sample_lhs(prob, 30, 500, 0)
    basis = FeatureBasis(NetworkParams.init([2, 10, 8], 0), sample_rff(12, 8, 1.0, 0))
    return prob, colloc, basis


def test_chunked_assembly_matches_dense(helm):
    prob, colloc, basis = helm
    B, G, R, F = design_matrices(prob, basis, build_rowmap(prob, colloc))
    dense = assemble(B, G, R, F, 0.1)
    for chunk in (7, 128, 4096):
        S = assemble_problem(prob, basis, colloc, 0.1, chunk=chunk)
        np.testing.assert_allclose(S.Q, dense.Q, rtol=1e-11, atol=1e-13)
        np.testing.assert_allclose(S.c, dense.c, rtol=1e-11, atol=1e-13)
        assert S.b == pytest.approx(dense.b, rel=1e-12)
        assert (S.N_u, S.N_f) == (dense.N_u, dense.N_f) == (len(G), 500)


def test_assemble_problem_rejects_burgers():
    prob = make_burgers()
    basis = FeatureBasis(NetworkParams.init([2, 4], 0))
    with pytest.raises(ConfigurationError):
        assemble_problem(prob, basis, sample_lhs(prob, 10, 10, 0), 1.0)


def test_nested_subsystem_equals_direct_assembly(helm):
    prob, colloc, _ = helm
    params = NetworkParams.init([2, 10, 8], 1)
    big = sample_rff(16, 8, 1.0, 5)
    full = assemble_problem(prob, FeatureBasis(params, big), colloc, 0.1)
    for D in (1, 5, 16):
        direct = assemble_problem(prob, FeatureBasis(params, big.prefix(D)), colloc, 0.1)
        sub = nested_subsystem(full, 16, D)
        np.testing.assert_allclose(sub.Q, direct.Q, rtol=1e-10, atol=1e-13)
        np.testing.assert_allclose(sub.c, direct.c, rtol=1e-10, atol=1e-13)
    with pytest.raises(ConfigurationError):
        nested_subsystem(full, 16, 17)


def test_dump_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    _, S = random_system(rng, 6)
    S.dump(tmp_path / "qp.npz")
    z = np.load(tmp_path / "qp.npz")
    assert np.array_equal(z["Q"], S.Q) and float(z["b"]) == S.b and int(z["N_f"]) == 40


# ---------------------------------------------------------- nonlinear path

def burgers_setup(nonlinearity=1.0, lam=0.1):
    prob = make_burgers(nonlinearity=nonlinearity)
    colloc = sample_lhs(prob, 50, 300, 0)
    basis = FeatureBasis(NetworkParams.init([2, 20, 20], 0), sample_rff(20, 20, 1.0, 0))
    return prob, colloc, basis, burgers_system(prob, basis, colloc, lam)


def test_burgers_gradient_fd():
    _, _, _, S = burgers_setup()
    th = np.random.default_rng(0).standard_normal(S.B.shape[1]) * 0.1
    _, g = S.loss_grad(th)
    fd = np.empty_like(th)
    for k in range(th.size):
        e = np.zeros_like(th)
        e[k] = 1e-6
        fd[k] = (S.loss_grad(th + e)[0] - S.loss_grad(th - e)[0]) / 2e-6
    np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-9)


def test_burgers_zero_steps_and_progress():
    _, _, _, S = burgers_setup()
    th0 = np.zeros(S.B.shape[1])
    th, trace = nonlinear_lower_solve(S, th0, steps=0)
    assert np.array_equal(th, th0) and len(trace) == 1
    th, trace = nonlinear_lower_solve(S, th0, steps=500, lr=1e-2)
    assert S.loss_grad(th)[0] <= trace[0]
    assert min(trace) == S.loss_grad(th)[0]


def test_burgers_linearization_oracle():
    """With the u u_x term switched off, Adam converges to the closed-form solve."""
    prob, colloc, basis, S = burgers_setup(nonlinearity=0.0)
    B, G, R, F = design_matrices(prob, basis, build_rowmap(prob, colloc))
    Q = assemble(B, G, R, F, 0.1)
    exact = solve_regularized(Q, 0.0)
    th, _ = nonlinear_lower_solve(S, np.zeros_like(exact), steps=20000, lr=1e-2)
    assert S.loss_grad(th)[0] - Q.loss(exact) <= 1e-4 * max(1.0, Q.loss(exact))
    np.testing.assert_allclose(S.loss_grad(exact)[0], Q.loss(exact), rtol=1e-10)


def test_burgers_divergence_reported():
    _, _, _, S = burgers_setup()
    with pytest.raises(DivergenceError) as ei:
        nonlinear_lower_solve(S, np.zeros(S.B.shape[1]), steps=50, lr=1e3)
    assert len(ei.value.trace) >= 2


def test_underdetermined_warning_in_trainer():
    from ifefpinn.trainer import TrainConfig, lower_solve
    from ifefpinn.losses import PinnLoss
    from ifefpinn.features import feature_jets
    prob = make_helmholtz()
    colloc = sample_lhs(prob, 4, 6, 0)
    basis = FeatureBasis(NetworkParams.init([2, 6], 0), sample_rff(20, 6, 1.0, 0))
    loss = PinnLoss(prob, colloc, 1e-2)
    J = feature_jets(basis, loss.points, loss.order)
    with pytest.raises(SingularSystemError):
        lower_solve(prob, loss, J, TrainConfig(gamma=0.0, D=20))
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        theta, _, _ = lower_solve(prob, loss, J, TrainConfig(gamma=1e-7, D=20))
    assert any(issubclass(x.category, RankWarning) for x in w)
    assert np.isfinite(theta).all()

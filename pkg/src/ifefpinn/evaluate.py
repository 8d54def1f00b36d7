"""Relative-L2 errors, error maps and the t = 0 spectrum experiment."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericError, UndefinedMetricError
from .features import FeatureBasis, feature_jets, sample_rff
from .lower import QpSystem, RankWarning, assemble_problem, solve_regularized
from .pde import SPECTRUM_FREQUENCIES, make_multiscale_convection, uniform_grid


def relative_l2(pred, exact):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    exact = np.asarray(exact, dtype=np.float64).ravel()
    if pred.shape != exact.shape:
        raise ConfigurationError(f"prediction has {pred.size} values, reference has {exact.size}")
    denom = np.linalg.norm(exact)
    if denom == 0.0 or not np.isfinite(denom):
        raise UndefinedMetricError("reference solution has zero (or non-finite) norm")
    return float(np.linalg.norm(pred - exact) / denom)


def predict(basis, theta, X, chunk=4096):
    """``u(X) = psi(X) @ theta`` evaluated in chunks."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    out = np.empty(len(X))
    for s in range(0, len(X), chunk):
        out[s:s + chunk] = feature_jets(basis, X[s:s + chunk], 0)[0] @ theta
    return out


@dataclass
class ErrorReport:
    relative_l2: float
    abs_error: np.ndarray
    points: np.ndarray
    grid: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.relative_l2 >= 0:
            raise NumericError(f"relative error {self.relative_l2} is not a non-negative number")

    def rows(self):
        """``(coords..., abs_error)`` rows for the error-map CSV."""
        return np.column_stack([self.points, self.abs_error])


def error_report(pred, exact, points, grid=None):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    exact = np.asarray(exact, dtype=np.float64).ravel()
    return ErrorReport(relative_l2(pred, exact), np.abs(pred - exact),
                       np.asarray(points, dtype=np.float64), dict(grid or {}))


class GridEvaluator:
    """Relative-L2 evaluator on a fixed grid, usable as the trainer's ``evaluator`` hook."""

    def __init__(self, points, reference, grid=None):
        self.points = np.asarray(points, dtype=np.float64)
        self.reference = np.asarray(reference, dtype=np.float64).ravel()
        if len(self.points) != len(self.reference):
            raise ConfigurationError("reference values do not match the grid")
        self.grid = dict(grid or {})

    @classmethod
    def for_problem(cls, problem, shape):
        if problem.exact is None:
            raise ConfigurationError(f"{problem.name} has no closed-form solution; "
                                     "pass reference values explicitly")
        X = uniform_grid(problem, shape)
        return cls(X, problem.exact(X), {"kind": "uniform", "shape": list(shape)})

    def __call__(self, basis, theta):
        return relative_l2(predict(basis, theta, self.points), self.reference)

    def report(self, basis, theta):
        return error_report(predict(basis, theta, self.points), self.reference, self.points,
                            self.grid)


# ----------------------------------------------------------------- spectrum

@dataclass
class SpectrumConfig:
    frequencies: list = field(default_factory=lambda: list(SPECTRUM_FREQUENCIES))
    amplitudes: list | None = None
    eval_grid: int = 512
    time_slice: float = 0.0
    D_sweep: list = field(default_factory=lambda: [400, 800, 1600, 2400, 3200, 4000])
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])

    def __post_init__(self):
        self.frequencies = [float(f) for f in self.frequencies]
        if self.amplitudes is None:
            self.amplitudes = [1.0] * len(self.frequencies)
        self.amplitudes = [float(a) for a in self.amplitudes]
        if len(self.amplitudes) != len(self.frequencies):
            raise ConfigurationError("frequencies and amplitudes differ in length")
        if any(a == 0 for a in self.amplitudes):
            raise ConfigurationError("amplitudes must be non-zero")
        if self.eval_grid < 2:
            raise ConfigurationError("eval_grid needs at least two points")
        if self.frequencies and max(self.frequencies) >= self.eval_grid / 2:
            raise ConfigurationError(
                f"frequency {max(self.frequencies):g} aliases on a {self.eval_grid}-point grid")
        if any(f <= 0 for f in self.frequencies):
            raise ConfigurationError("frequencies must be positive")
        if any(int(d) != d or d < 1 for d in self.D_sweep):
            raise ConfigurationError("D_sweep entries must be positive integers")
        self.D_sweep = sorted({int(d) for d in self.D_sweep})
        if not self.seeds:
            raise ConfigurationError("need at least one seed")

    def grid(self):
        """``M`` equispaced points on ``[0, 1)`` (the periodic grid)."""
        return np.arange(self.eval_grid) / self.eval_grid


def spectrum_magnitudes(u_pred, config):
    """``|f~_i| / A_i`` at each target frequency, by direct projection of ``u_pred(t0, x)``.

    ``u_pred`` maps an ``(M, 2)`` array of ``(t, x)`` rows to values. The
    projection ``(2/M) |sum_j u(x_j) exp(-2 pi i f x_j)|`` gives exactly 1 for
    ``sin(2 pi f x)`` with integer ``f`` below Nyquist.
    """
    x = config.grid()
    X = np.column_stack([np.full_like(x, config.time_slice), x])
    u = np.asarray(u_pred(X), dtype=np.float64).ravel()
    if u.shape != x.shape:
        raise ConfigurationError("u_pred returned the wrong number of values")
    f = np.asarray(config.frequencies)
    E = np.exp(-2j * np.pi * np.outer(f, x))
    mags = 2.0 / len(x) * np.abs(E @ u)
    return mags / np.abs(np.asarray(config.amplitudes))


def nested_subsystem(system, D_full, D):
    """QP for the first ``D`` Fourier pairs, cut from the system of ``D_full`` pairs.

    Columns ``[0, D)`` and ``[D_full, D_full + D)`` hold the cos and sin
    features; the ``1/sqrt(D)`` feature scale is restored exactly.
    """
    if not 1 <= D <= D_full:
        raise ConfigurationError(f"D={D} outside 1..{D_full}")
    idx = np.r_[0:D, D_full:D_full + D]
    r = np.sqrt(D_full / D)
    return QpSystem(system.Q[np.ix_(idx, idx)] * r * r, system.c[idx] * r, system.b,
                    system.N_u, system.N_f, system.lambda_ll)


@dataclass
class SpectrumTable:
    frequencies: list
    rows: dict                  # label -> mean magnitudes per frequency
    per_seed: dict              # label -> list of arrays (one per finished seed)
    failures: list = field(default_factory=list)

    def labels(self):
        return list(self.rows)

    def csv_rows(self):
        return [[label, *map(float, vals)] for label, vals in self.rows.items()]


def spectrum_experiment(config, train_config, network_sizes, colloc_builder, *,
                        problem=None, pretrain=None, chunk=1024, log=None):
    """Vanilla row plus one row per ``D`` in ``config.D_sweep``, averaged over ``config.seeds``.

    Per seed: pre-train a vanilla PINN, then build the RFF basis at the
    largest ``D`` once, assemble its QP once, and solve every smaller ``D`` on
    the nested sub-block. A failing seed is recorded and skipped.
    ``colloc_builder(problem, seed)`` returns the collocation set.
    """
    from .jets import NetworkParams
    from .trainer import pretrain_vanilla

    problem = problem or make_multiscale_convection(config.frequencies, config.amplitudes)
    pretrain = pretrain or pretrain_vanilla
    labels = ["vanilla"] + [f"D={d}" for d in config.D_sweep]
    per_seed = {k: [] for k in labels}
    failures = []
    D_max = max(config.D_sweep) if config.D_sweep else 0
    for seed in config.seeds:
        cfg = type(train_config)(**{**train_config.to_dict(), "seed": int(seed)})
        init_seed, rff_seed, colloc_seed = cfg.seeds()
        try:
            colloc = colloc_builder(problem, colloc_seed)
            params, _ = pretrain(problem, NetworkParams.init(network_sizes, init_seed), colloc, cfg)
            van = FeatureBasis(params)
            mags = {"vanilla": spectrum_magnitudes(
                lambda X: predict(van, params.readout, X), config)}
            if D_max:
                rff = sample_rff(D_max, params.width, cfg.sigma, rff_seed)
                full = assemble_problem(problem, FeatureBasis(params, rff), colloc, cfg.lambda_ll,
                                        chunk=chunk)
                for D in config.D_sweep:
                    sub = nested_subsystem(full, D_max, D)
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", RankWarning)
                        theta = solve_regularized(sub, cfg.gamma)
                    basis = FeatureBasis(params, rff.prefix(D))
                    mags[f"D={D}"] = spectrum_magnitudes(
                        lambda X, b=basis, th=theta: predict(b, th, X), config)
        except (NumericError, np.linalg.LinAlgError) as exc:
            failures.append((int(seed), str(exc)))
            if log:
                log(f"seed {seed} failed: {exc}")
            continue
        for k, v in mags.items():
            per_seed[k].append(v)
        if log:
            log(f"seed {seed} done")
    rows = {k: np.mean(v, axis=0) if v else np.full(len(config.frequencies), np.nan)
            for k, v in per_seed.items()}
    return SpectrumTable(list(config.frequencies), rows, per_seed, failures)

"""TOML experiment configuration with strict key checking.

Schema (every table optional except ``problem``; unknown keys are errors)::

    [experiment]  name, output_dir
    [problem]     kind = helmholtz | convection | convection_diffusion | burgers
                         | multiscale_convection, plus that builder's keyword arguments
    [sampler]     method = uniform | lhs, n_boundary, interior_shape (uniform)
                  or n_interior (lhs)
    [network]     widths = [..]  or  depth + width
    [train]       any TrainConfig field
    [eval]        grid = [..]  (ignored for burgers, which uses the stored reference)
    [compare]     variants = [..], seeds = [..]
    [spectrum]    frequencies, amplitudes, eval_grid, time_slice, D_sweep, seeds
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigurationError
from .evaluate import GridEvaluator, SpectrumConfig
from .pde import (make_burgers, make_convection, make_convection_diffusion, make_helmholtz,
                  make_multiscale_convection, sample_lhs, sample_uniform)
from .trainer import TrainConfig

PROBLEMS = {
    "helmholtz": (make_helmholtz, {"a1", "a2", "lo", "hi"}),
    "convection": (make_convection, {"beta", "x_max", "t_max"}),
    "convection_diffusion": (make_convection_diffusion,
                             {"c", "d", "A_low", "A_high", "k_low", "k_high"}),
    "burgers": (make_burgers, {"nu", "nonlinearity"}),
    "multiscale_convection": (make_multiscale_convection, {"frequencies", "amplitudes", "beta"}),
}

SECTIONS = {
    "experiment": {"name", "output_dir"},
    "problem": None,  # checked against PROBLEMS
    "sampler": {"method", "n_boundary", "interior_shape", "n_interior"},
    "network": {"widths", "depth", "width"},
    "train": {f.name for f in dataclasses.fields(TrainConfig)},
    "eval": {"grid"},
    "compare": {"variants", "seeds"},
    "spectrum": {f.name for f in dataclasses.fields(SpectrumConfig)},
}


def _reject_unknown(table, allowed, where):
    extra = sorted(set(table) - set(allowed))
    if extra:
        raise ConfigurationError(f"unknown key(s) in [{where}]: {', '.join(extra)}")


@dataclass
class SamplerSpec:
    method: str = "uniform"
    n_boundary: int = 204
    interior_shape: tuple | None = (51, 51)
    n_interior: int | None = None

    def __post_init__(self):
        if self.method not in ("uniform", "lhs"):
            raise ConfigurationError(f"unknown sampler {self.method!r}")
        if int(self.n_boundary) != self.n_boundary or self.n_boundary < 1:
            raise ConfigurationError("n_boundary must be a positive integer")
        if self.method == "uniform":
            if not self.interior_shape or any(int(s) != s or s < 1 for s in self.interior_shape):
                raise ConfigurationError("uniform sampling needs a positive interior_shape")
            self.interior_shape = tuple(int(s) for s in self.interior_shape)
        elif self.n_interior is None or int(self.n_interior) != self.n_interior \
                or self.n_interior < 1:
            raise ConfigurationError("lhs sampling needs a positive n_interior")

    def build(self, problem, seed):
        if self.method == "uniform":
            return sample_uniform(problem, self.n_boundary, self.interior_shape, seed)
        return sample_lhs(problem, self.n_boundary, int(self.n_interior), seed)


@dataclass
class ExperimentConfig:
    name: str
    problem_kind: str
    problem_params: dict
    sampler: SamplerSpec
    widths: list
    train: TrainConfig
    eval_grid: tuple | None = (101, 101)
    variants: list = field(default_factory=lambda: ["ifef", "vanilla"])
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    spectrum: SpectrumConfig | None = None
    output_dir: str | None = None
    source: str | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def problem(self):
        builder, _ = PROBLEMS[self.problem_kind]
        kw = {k: tuple(v) if isinstance(v, list) and k in ("lo", "hi") else v
              for k, v in self.problem_params.items()}
        return builder(**kw)

    def network_sizes(self, problem):
        return [problem.dim] + list(self.widths)

    def evaluator(self, problem):
        if self.problem_kind == "burgers":
            from .reference import load_burgers_reference
            X, u = load_burgers_reference()
            return GridEvaluator(X, u, {"kind": "reference", "file": "burgers_reference.csv"})
        if self.eval_grid is None:
            return None
        return GridEvaluator.for_problem(problem, self.eval_grid)

    def with_overrides(self, **train_fields):
        new = copy.deepcopy(self)
        kw = {**new.train.to_dict(), **{k: v for k, v in train_fields.items() if v is not None}}
        new.train = TrainConfig(**kw)
        return new

    def to_dict(self):
        return {
            "experiment": {"name": self.name},
            "problem": {"kind": self.problem_kind, **self.problem_params},
            "sampler": {k: (list(v) if isinstance(v, tuple) else v)
                        for k, v in dataclasses.asdict(self.sampler).items() if v is not None},
            "network": {"widths": list(self.widths)},
            "train": self.train.to_dict(),
            "eval": {"grid": list(self.eval_grid) if self.eval_grid else None},
            "compare": {"variants": list(self.variants), "seeds": list(self.seeds)},
            "spectrum": dataclasses.asdict(self.spectrum) if self.spectrum else None,
        }

    def digest(self):
        """SHA-256 of the canonical JSON form of the resolved configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True, default=float).encode()
        return hashlib.sha256(blob).hexdigest()


def _network(table):
    _reject_unknown(table, SECTIONS["network"], "network")
    if "widths" in table:
        if "depth" in table or "width" in table:
            raise ConfigurationError("give either widths or depth+width, not both")
        widths = list(table["widths"])
    else:
        depth, width = table.get("depth", 6), table.get("width", 64)
        widths = [width] * depth
    if not widths or any(not isinstance(w, int) or w < 1 for w in widths):
        raise ConfigurationError(f"invalid hidden widths {widths}")
    return widths


def parse_config(data, source=None):
    """Validate a parsed TOML document into an :class:`ExperimentConfig`."""
    if not isinstance(data, dict):
        raise ConfigurationError("configuration must be a table")
    _reject_unknown(data, SECTIONS, "top level")
    if "problem" not in data:
        raise ConfigurationError("missing [problem] table")
    prob = dict(data["problem"])
    kind = prob.pop("kind", None)
    if kind not in PROBLEMS:
        raise ConfigurationError(f"unknown problem kind {kind!r}; expected one of {sorted(PROBLEMS)}")
    _reject_unknown(prob, PROBLEMS[kind][1], f"problem ({kind})")
    exp = data.get("experiment", {})
    _reject_unknown(exp, SECTIONS["experiment"], "experiment")
    samp = data.get("sampler", {})
    _reject_unknown(samp, SECTIONS["sampler"], "sampler")
    trn = data.get("train", {})
    _reject_unknown(trn, SECTIONS["train"], "train")
    ev = data.get("eval", {})
    _reject_unknown(ev, SECTIONS["eval"], "eval")
    cmp_ = data.get("compare", {})
    _reject_unknown(cmp_, SECTIONS["compare"], "compare")
    spec = data.get("spectrum")
    if spec is not None:
        _reject_unknown(spec, SECTIONS["spectrum"], "spectrum")
    try:
        sampler = SamplerSpec(**samp)
        train = TrainConfig(**trn)
        spectrum = SpectrumConfig(**spec) if spec is not None else None
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
    variants = list(cmp_.get("variants", ["ifef", "vanilla"]))
    for v in variants:
        if v not in ("ifef", "ifef_pd", "vanilla"):
            raise ConfigurationError(f"unknown variant {v!r} in [compare]")
    seeds = list(cmp_.get("seeds", [0, 1, 2, 3, 4]))
    if not seeds or any(not isinstance(s, int) for s in seeds):
        raise ConfigurationError("[compare] seeds must be a non-empty list of integers")
    grid = ev.get("grid", [101, 101])
    cfg = ExperimentConfig(
        name=str(exp.get("name", kind)), problem_kind=kind, problem_params=prob,
        sampler=sampler, widths=_network(data.get("network", {})), train=train,
        eval_grid=tuple(grid) if grid else None, variants=variants, seeds=seeds,
        spectrum=spectrum, output_dir=exp.get("output_dir"), source=source, raw=data)
    try:
        problem = cfg.problem()
    except TypeError as exc:
        raise ConfigurationError(f"bad [problem] parameters: {exc}") from exc
    if cfg.eval_grid is not None and len(cfg.eval_grid) != problem.dim:
        raise ConfigurationError(f"eval grid {cfg.eval_grid} does not match a {problem.dim}-d problem")
    if sampler.method == "uniform" and len(sampler.interior_shape) != problem.dim:
        raise ConfigurationError("interior_shape does not match the problem dimension")
    return cfg


def load_config(path):
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file {path} not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    return parse_config(data, str(path))


def preset_names():
    root = resources.files("ifefpinn") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def preset_path(name):
    p = Path(str(resources.files("ifefpinn") / "presets" / f"{name}.toml"))
    if not p.exists():
        raise ConfigurationError(f"no preset named {name!r}; available: {', '.join(preset_names())}")
    return p


def resolve_config(ref):
    """Load a config from a file path or a bundled preset name."""
    p = Path(ref)
    if p.suffix == ".toml" or p.exists():
        return load_config(p)
    return load_config(preset_path(ref))

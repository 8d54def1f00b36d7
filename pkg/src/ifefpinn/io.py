"""Artifact persistence: atomic files, metrics CSV, checkpoints and run manifests.

Every writer goes through :func:`atomic_write`, which writes a temporary file
in the target directory and renames it into place, so a reader sees either the
complete file or nothing.

Checkpoint container (``.npz``, no pickles)::

    n_layers        int
    W{k}, b{k}      hidden layer k, k = 0 .. n_layers-1
    readout         present only when the network has one
    theta           lower-level coefficients
    rff_seed, rff_D, rff_sigma   RFF matrix recipe (rff_D = 0 when there is no extension)

The RFF matrix itself is not stored; it is regenerated from its seed.
"""

from __future__ import annotations

import csv
import io
import json
import os
import platform
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .features import FeatureBasis, sample_rff
from .jets import NetworkParams
from .trainer import METRIC_COLUMNS

OUTPUT_ENV = "IFEF_OUTPUT_ROOT"


def atomic_write(path, data):
    """Write ``data`` (bytes or str) to ``path`` via write-then-rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def write_metrics(path, history):
    """Metrics CSV with the fixed column order ``METRIC_COLUMNS``."""
    rows = [[r[c] for c in METRIC_COLUMNS] for r in history]
    return atomic_write(path, csv_text(METRIC_COLUMNS, rows))


def read_metrics(path):
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != METRIC_COLUMNS:
            raise ConfigurationError(f"{path}: unexpected metrics header {header}")
        return [dict(zip(header, map(float, row))) for row in rd]


def save_checkpoint(path, basis, theta, rff_seed=None):
    arrays = {"n_layers": np.array(len(basis.params.layers))}
    for k, (W, b) in enumerate(basis.params.layers):
        arrays[f"W{k}"], arrays[f"b{k}"] = W, b
    if basis.params.readout is not None:
        arrays["readout"] = basis.params.readout
    arrays["theta"] = np.asarray(theta, dtype=np.float64)
    rff = basis.rff
    arrays["rff_D"] = np.array(0 if rff is None else rff.D)
    arrays["rff_seed"] = np.array(-1 if rff is None else rff.seed if rff_seed is None else rff_seed)
    arrays["rff_sigma"] = np.array(0.0 if rff is None else rff.sigma)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    return atomic_write(path, buf.getvalue())


def load_checkpoint(path):
    """``(basis, theta)`` with the RFF matrix regenerated from its seed."""
    with np.load(path, allow_pickle=False) as z:
        n = int(z["n_layers"])
        layers = [(z[f"W{k}"], z[f"b{k}"]) for k in range(n)]
        readout = z["readout"] if "readout" in z else None
        params = NetworkParams(layers, readout)
        D = int(z["rff_D"])
        rff = sample_rff(D, params.width, float(z["rff_sigma"]), int(z["rff_seed"])) if D else None
        return FeatureBasis(params, rff), z["theta"].copy()


@dataclass
class RunManifest:
    """Configuration, seeds, environment and outcome of one run, stored as JSON."""

    command: str
    config: dict
    config_hash: str
    seeds: dict
    status: str = "running"
    metrics: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    environment: dict = field(default_factory=dict)
    started: str = ""

    def __post_init__(self):
        if not self.environment:
            from . import __version__, kernels
            self.environment = {"python": platform.python_version(), "numpy": np.__version__,
                                "package": __version__, "kernel_backend": kernels.BACKEND}
        if not self.started:
            self.started = time.strftime("%Y-%m-%dT%H:%M:%S")

    def to_json(self, deterministic=False):
        d = asdict(self)
        if deterministic:
            d.pop("started")
        return json.dumps(d, indent=2, sort_keys=True, default=_json_default) + "\n"

    def write(self, path):
        return atomic_write(path, self.to_json())


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, Path):
        return str(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def output_root(default="runs"):
    return Path(os.environ.get(OUTPUT_ENV, default))

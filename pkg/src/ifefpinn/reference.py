"""Stored reference solution for the viscous Burgers problem.

``data/burgers_reference.csv`` holds ``t,x,u`` rows on a 100 x 256 grid
(``t`` in ``linspace(0, 1, 100)``, ``x`` in ``linspace(-1, 1, 256)``, ``x``
varying fastest), computed by Cole-Hopf quadrature with
``scripts/make_burgers_reference.py`` at ``nu = 0.01 / pi``.
"""

import hashlib
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

BURGERS_REFERENCE = "burgers_reference.csv"
BURGERS_SHA256 = "6ab19b744e28734232820d68e7d504f79895dcb2424d968b3b5599d39f863cca"
BURGERS_SHAPE = (100, 256)


def reference_path():
    return Path(str(resources.files("ifefpinn") / "data" / BURGERS_REFERENCE))


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_burgers_reference(path=None, verify=True):
    """``(points, u)`` with ``points[:, 0] = t`` and ``points[:, 1] = x``."""
    path = reference_path() if path is None else Path(path)
    if not path.exists():
        raise ConfigurationError(f"Burgers reference file {path} is missing; "
                                 "regenerate it with scripts/make_burgers_reference.py")
    if verify and path.name == BURGERS_REFERENCE and sha256_file(path) != BURGERS_SHA256:
        raise ConfigurationError(f"checksum mismatch for {path}")
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ConfigurationError(f"{path}: expected three columns t,x,u")
    return data[:, :2].copy(), data[:, 2].copy()

import importlib.util
from pathlib import Path

import numpy as np
import pytest

from ifefpinn.errors import ConfigurationError
from ifefpinn.reference import (BURGERS_SHA256, BURGERS_SHAPE, load_burgers_reference,
                                reference_path, sha256_file)

SCRIPT = Path(__file__).resolve().parents[1] / "scripts" / "make_burgers_reference.py"


@pytest.fixture(scope="module")
def ref():
    X, u = load_burgers_reference()
    nt, nx = BURGERS_SHAPE
    return X.reshape(nt, nx, 2), u.reshape(nt, nx)


@pytest.fixture(scope="module")
def script():
    spec = importlib.util.spec_from_file_location("make_burgers_reference", SCRIPT)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def test_checksum_and_layout(ref):
    assert sha256_file(reference_path()) == BURGERS_SHA256
    X, _ = ref
    np.testing.assert_allclose(X[:, 0, 0], np.linspace(0, 1, 100))
    np.testing.assert_allclose(X[0, :, 1], np.linspace(-1, 1, 256))
    assert np.all(X[:, :, 0] == X[:, :1, 0])


def test_initial_and_boundary_values(ref):
    X, u = ref
    np.testing.assert_allclose(u[0], -np.sin(np.pi * X[0, :, 1]), atol=1e-12)
    assert np.abs(u[:, [0, -1]]).max() < 1e-10


def test_odd_symmetry(ref):
    _, u = ref
    np.testing.assert_allclose(u, -u[:, ::-1], atol=1e-10)


def test_shock_steepens_then_persists(ref):
    X, u = ref
    dx = X[0, 1, 1] - X[0, 0, 1]
    slope = np.abs(np.diff(u, axis=1)).max(axis=1) / dx
    assert slope[0] < 4 and slope[-1] > 50


def test_basdevant_peak_slope(script):
    """Maximum |u_x| at x = 0 is 152.00516 at t = 0.51047 (t pi = 1.6037)."""
    nu = 0.01 / np.pi
    t = 1.6037 / np.pi
    h = 1e-5
    u = script.cole_hopf(t, np.array([-h, h]), nu)
    assert (u[1] - u[0]) / (2 * h) == pytest.approx(-152.00516, rel=1e-5)


def test_script_reproduces_rows(script, ref):
    X, u = ref
    nu = 0.01 / np.pi
    for k in (1, 50, 99):
        np.testing.assert_allclose(script.cole_hopf(X[k, 0, 0], X[k, :, 1], nu), u[k],
                                   atol=1e-12)


def test_missing_and_tampered_files(tmp_path):
    with pytest.raises(ConfigurationError, match="missing"):
        load_burgers_reference(tmp_path / "nope.csv")
    bad = tmp_path / "burgers_reference.csv"
    bad.write_text("t,x,u\n0,0,0\n")
    with pytest.raises(ConfigurationError, match="checksum"):
        load_burgers_reference(bad)
    other = tmp_path / "two_cols.csv"
    other.write_text("t,x\n0,0\n1,1\n")
    with pytest.raises(ConfigurationError, match="three columns"):
        load_burgers_reference(other)

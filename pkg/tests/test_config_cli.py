import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from ifefpinn import io as aio
from ifefpinn.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main, spectrum_header
from ifefpinn.config import load_config, parse_config, preset_names, resolve_config
from ifefpinn.errors import ConfigurationError
from ifefpinn.features import FeatureBasis, feature_jets, sample_rff
from ifefpinn.jets import NetworkParams
from ifefpinn.trainer import METRIC_COLUMNS

TABLE3 = ["helmholtz_low", "helmholtz_high", "convection_beta50", "convection_beta200",
          "burgers", "convection_diffusion"]

TINY = """
[experiment]
name = "tiny"

[problem]
kind = "convection"
beta = 5.0

[sampler]
method = "uniform"
n_boundary = 30
interior_shape = [7, 7]

[network]
depth = 2
width = 8

[train]
D = 6
pretrain_epochs = 3
ifef_epochs = 3
{extra}

[eval]
grid = [9, 9]

[compare]
seeds = [0, 1]
"""


def tiny(tmp_path, extra="", name="tiny.toml"):
    p = tmp_path / name
    p.write_text(TINY.format(extra=extra))
    return str(p)


# ------------------------------------------------------------------ config

def test_all_table3_rows_have_desk_and_full_presets():
    names = set(preset_names())
    for row in TABLE3:
        assert f"{row}_ifef" in names and f"{row}_ifef_full" in names
    assert {"spectrum", "spectrum_full", "convection_ablation"} <= names


@pytest.mark.parametrize("name", sorted(preset_names()))
def test_presets_parse(name):
    cfg = resolve_config(name)
    assert cfg.name == name
    prob = cfg.problem()
    assert len(cfg.network_sizes(prob)) >= 2


def test_preset_values_follow_tables():
    c = resolve_config("convection_beta50_ifef_full")
    assert (c.train.D, c.train.sigma, c.train.lambda_ll, c.train.gamma) == (800, 1.0, 1e-2, 1e-7)
    assert c.sampler.n_boundary == 204 and c.sampler.interior_shape == (51, 51)
    assert c.widths == [64] * 6 and c.train.pretrain_epochs > 0
    h = resolve_config("helmholtz_high_ifef_full")
    assert (h.train.D, h.train.lambda_ll, h.train.gamma, h.train.pretrain_epochs) == (2400, 1e-7, 1e-4, 0)
    assert h.sampler.method == "lhs" and h.sampler.n_interior == 23000
    b = resolve_config("burgers_ifef_full")
    assert b.widths == [20] * 8 and b.train.lambda_ll == 0.1 and b.train.gamma == 0.0
    assert resolve_config("helmholtz_low_ifef_full").widths == [50, 50, 20]
    desk = resolve_config("convection_beta50_ifef")
    assert desk.train.D == 200 and desk.train.ifef_epochs <= 2000


@pytest.mark.parametrize("doc,match", [
    ({"problem": {"kind": "convection", "bta": 1.0}}, "bta"),
    ({"problem": {"kind": "convection"}, "train": {"lambda": 1.0}}, "lambda"),
    ({"problem": {"kind": "convection"}, "trian": {}}, "trian"),
    ({"problem": {"kind": "poisson"}}, "poisson"),
    ({"train": {}}, "problem"),
    ({"problem": {"kind": "convection"}, "network": {"widths": [8], "depth": 2}}, "either"),
    ({"problem": {"kind": "convection"}, "eval": {"grid": [3]}}, "grid"),
    ({"problem": {"kind": "convection"}, "compare": {"variants": ["ifef", "adam"]}}, "adam"),
    ({"problem": {"kind": "convection"}, "sampler": {"method": "lhs"}}, "n_interior"),
])
def test_invalid_configs_rejected(doc, match):
    with pytest.raises(ConfigurationError, match=match):
        parse_config(doc)


def test_digest_stable_and_sensitive(tmp_path):
    a, b = load_config(tiny(tmp_path)), load_config(tiny(tmp_path))
    assert a.digest() == b.digest() and len(a.digest()) == 64
    assert a.with_overrides(seed=1).digest() != a.digest()
    assert a.with_overrides(seed=None).digest() == a.digest()


def test_bad_toml_and_missing_file(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[problem\nkind=1")
    with pytest.raises(ConfigurationError):
        load_config(p)
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "absent.toml")
    with pytest.raises(ConfigurationError, match="no preset"):
        resolve_config("not_a_preset")


# ---------------------------------------------------------------------- io

def test_atomic_write_leaves_no_temp(tmp_path):
    target = tmp_path / "sub" / "a.txt"
    aio.atomic_write(target, "one")
    aio.atomic_write(target, b"two")
    assert target.read_text() == "two"
    assert os.listdir(target.parent) == ["a.txt"]


def test_atomic_write_failure_keeps_old(tmp_path, monkeypatch):
    target = tmp_path / "a.txt"
    aio.atomic_write(target, "old")

    def boom(*a):
        raise OSError("disk full")

    monkeypatch.setattr(aio.os, "replace", boom)
    with pytest.raises(OSError):
        aio.atomic_write(target, "new")
    assert target.read_text() == "old" and os.listdir(tmp_path) == ["a.txt"]


@pytest.mark.parametrize("D", [0, 5])
def test_checkpoint_roundtrip(tmp_path, D):
    params = NetworkParams.init([2, 6, 4], 0)
    basis = FeatureBasis(params, sample_rff(D, 4, 0.5, 11) if D else None)
    theta = np.arange(basis.dim, dtype=float)
    aio.save_checkpoint(tmp_path / "c.npz", basis, theta)
    b2, th2 = aio.load_checkpoint(tmp_path / "c.npz")
    assert np.array_equal(th2, theta)
    X = np.random.default_rng(0).uniform(size=(5, 2))
    assert np.array_equal(feature_jets(b2, X, 2), feature_jets(basis, X, 2))
    assert np.array_equal(b2.params.readout, params.readout)


def test_metrics_roundtrip(tmp_path):
    hist = [{c: float(i) for c in METRIC_COLUMNS} for i in range(3)]
    aio.write_metrics(tmp_path / "m.csv", hist)
    assert aio.read_metrics(tmp_path / "m.csv") == hist
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ConfigurationError):
        aio.read_metrics(tmp_path / "bad.csv")


# --------------------------------------------------------------------- cli

def test_train_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["train", "--config", tiny(tmp_path), "--out", str(out)]) == EXIT_OK
    assert "rel_l2" in capsys.readouterr().out
    assert {p.name for p in out.iterdir()} == {"metrics.csv", "checkpoint.npz", "error_map.csv",
                                               "manifest.json"}
    rows = aio.read_metrics(out / "metrics.csv")
    assert [r["epoch"] for r in rows] == list(range(6))
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok" and len(man["config_hash"]) == 64
    assert set(man["seeds"]) == {"seed", "init", "rff", "collocation"}
    assert man["environment"]["kernel_backend"] in ("compiled", "python")
    with open(out / "error_map.csv") as fh:
        assert next(csv.reader(fh)) == ["t", "x", "abs_error"]


def test_train_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = tiny(tmp_path)
    assert main(["train", "--config", cfg, "--out", str(a)]) == EXIT_OK
    assert main(["train", "--config", cfg, "--out", str(b)]) == EXIT_OK
    for name in ("metrics.csv", "error_map.csv", "checkpoint.npz"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_train_flags_switch_variant_and_extension(tmp_path):
    cfg = tiny(tmp_path)
    assert main(["train", "--config", cfg, "--variant", "vanilla", "--out", str(tmp_path / "v")]) == 0
    man = json.loads((tmp_path / "v" / "manifest.json").read_text())
    assert man["config"]["train"]["variant"] == "vanilla"
    assert main(["train", "--config", cfg, "--extension", "none", "--seed", "4",
                 "--out", str(tmp_path / "n")]) == 0
    man = json.loads((tmp_path / "n" / "manifest.json").read_text())
    assert man["config"]["train"]["extension_mode"] == "none" and man["seeds"]["seed"] == 4


def test_exit_code_config_error(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text('[problem]\nkind = "convection"\nspeed = 3\n')
    assert main(["train", "--config", str(p)]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as ei:
        main(["train"])
    assert ei.value.code == 2


def test_exit_code_numeric_failure_writes_manifest(tmp_path):
    out = tmp_path / "fail"
    cfg = tiny(tmp_path, extra="pretrain_lr = 1e300")
    with np.errstate(all="ignore"):
        code = main(["train", "--config", cfg, "--out", str(out)])
    assert code == EXIT_NUMERIC
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "failed" and "epoch" in man["metrics"]["error"]
    assert not (out / "metrics.csv").exists()


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv(aio.OUTPUT_ENV, str(tmp_path / "root"))
    assert main(["train", "--config", tiny(tmp_path)]) == EXIT_OK
    assert (tmp_path / "root" / "tiny" / "ifef-seed0" / "manifest.json").exists()


def test_compare_csv(tmp_path):
    out = tmp_path / "cmp"
    cfg = tiny(tmp_path)
    assert main(["compare", "--config", cfg, "--out", str(out)]) == EXIT_OK
    with open(out / "compare.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["variant", "seed", "rel_l2", "std", "status"]
    body = rows[1:]
    assert [(r[0], r[1]) for r in body] == [("ifef", "0"), ("ifef", "1"), ("ifef", "mean"),
                                            ("vanilla", "0"), ("vanilla", "1"), ("vanilla", "mean")]
    ifef = [float(r[2]) for r in body[:2]]
    assert float(body[2][2]) == pytest.approx(np.mean(ifef))
    assert float(body[2][3]) == pytest.approx(np.std(ifef))
    first = (out / "compare.csv").read_bytes()
    assert main(["compare", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert (out / "compare.csv").read_bytes() == first
    assert main(["compare", "--config", cfg, "--variants", "ifef", "--out", str(out)]) == EXIT_CONFIG


def test_compare_records_failed_cells(tmp_path):
    out = tmp_path / "cmp"
    cfg = tiny(tmp_path, extra="pretrain_lr = 1e300")
    with np.errstate(all="ignore"):
        assert main(["compare", "--config", cfg, "--seeds", "0", "--out", str(out)]) == EXIT_OK
    with open(out / "compare.csv") as fh:
        rows = list(csv.reader(fh))[1:]
    assert rows[0][2] == "nan" and rows[0][4].startswith("failed")
    assert rows[1][4] == "0/1 ok"


SPECTRUM_TINY = """
[problem]
kind = "multiscale_convection"
frequencies = [1, 5]

[sampler]
n_boundary = 30
interior_shape = [6, 12]

[network]
depth = 2
width = 8

[train]
pretrain_epochs = 2

[eval]
grid = [5, 5]

[spectrum]
frequencies = [1, 5]
eval_grid = 64
D_sweep = [2, 4, 8]
seeds = [0]
"""


def test_spectrum_csv_schema_and_subset(tmp_path, capsys):
    p = tmp_path / "s.toml"
    p.write_text(SPECTRUM_TINY)
    out = tmp_path / "spec"
    assert main(["spectrum", "--config", str(p), "--out", str(out)]) == EXIT_OK
    with open(out / "spectrum.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == spectrum_header([1.0, 5.0]) == ["row", "f=1", "f=5"]
    assert [r[0] for r in rows[1:]] == ["vanilla", "D=2", "D=4", "D=8"]
    assert main(["spectrum", "--config", str(p), "--d-sweep", "4,2", "--out", str(out)]) == 0
    with open(out / "spectrum.csv") as fh:
        assert [r[0] for r in list(csv.reader(fh))[1:]] == ["vanilla", "D=2", "D=4"]
    assert main(["spectrum", "--config", str(p), "--d-sweep", "a", "--out", str(out)]) == EXIT_CONFIG


def test_selfcheck_protocol():
    r = subprocess.run([sys.executable, "-m", "ifefpinn.cli", "selfcheck"], capture_output=True,
                       text=True, timeout=60)
    assert r.returncode == EXIT_OK
    lines = r.stdout.strip().splitlines()
    assert len(lines) == 7
    for line in lines:
        tag, name, status, *_ = line.split(" ")
        assert tag == "CHECK" and status == "PASS" and name


def test_selfcheck_detects_sign_error(monkeypatch, capsys):
    from ifefpinn import lower, selfcheck

    orig = lower.QpAccumulator.finish

    def flipped(self, lam):
        s = orig(self, lam)
        s.c = -s.c
        return s

    monkeypatch.setattr(lower.QpAccumulator, "finish", flipped)
    assert main(["selfcheck"]) == EXIT_CHECK
    out = capsys.readouterr().out
    assert "CHECK qp_equivalence FAIL" in out
    monkeypatch.setattr(selfcheck, "CHECKS", [("boom", lambda: 1 / 0)])
    assert selfcheck.run_checks()[0][1] is False

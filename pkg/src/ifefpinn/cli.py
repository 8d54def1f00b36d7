"""Command-line entry point: ``ifef train | compare | spectrum | selfcheck``.

Exit codes: 0 success, 1 failed self-check, 2 invalid configuration or usage,
3 numeric failure (the manifest is still written, with ``status = "failed"``).
"""

from __future__ import annotations

import argparse
import sys
import time
import traceback
import warnings
from pathlib import Path

import numpy as np

from . import io as aio
from .config import preset_names, resolve_config
from .errors import ConfigurationError, NumericError
from .lower import RankWarning

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


def _out_dir(args, cfg, *parts):
    if args.out:
        return Path(args.out)
    root = Path(cfg.output_dir) if cfg.output_dir else aio.output_root()
    return root.joinpath(cfg.name, *parts)


def _load(args):
    cfg = resolve_config(args.config)
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "variant", None):
        over["variant"] = args.variant
    if getattr(args, "extension", None):
        over["extension_mode"] = args.extension
    return cfg.with_overrides(**over) if over else cfg


def run_one(cfg, out_dir=None, log=None):
    """Train one (variant, seed) cell. Returns ``(rel_l2, result, manifest)``."""
    from .jets import NetworkParams
    from .trainer import run_training

    tc = cfg.train
    problem = cfg.problem()
    init_seed, rff_seed, colloc_seed = tc.seeds()
    manifest = aio.RunManifest(
        command="train", config=cfg.to_dict(), config_hash=cfg.digest(),
        seeds={"seed": tc.seed, "init": init_seed, "rff": rff_seed, "collocation": colloc_seed})
    if problem.name == "burgers":
        from .reference import BURGERS_SHA256
        manifest.artifacts["burgers_reference_sha256"] = BURGERS_SHA256
    if cfg.problem_kind == "helmholtz" and cfg.sampler.method == "lhs":
        manifest.notes.append("boundary points split across faces in proportion to face measure")
    colloc = cfg.sampler.build(problem, colloc_seed)
    manifest.metrics["collocation"] = colloc.describe()
    evaluator = cfg.evaluator(problem)
    params0 = NetworkParams.init(cfg.network_sizes(problem), init_seed)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RankWarning)
            result = run_training(problem, params0, colloc, tc, evaluator)
        for w in caught:
            if issubclass(w.category, RankWarning) and str(w.message) not in manifest.notes:
                manifest.notes.append(str(w.message))
        rel = float(evaluator(result.basis, result.theta)) if evaluator else float("nan")
    except NumericError as exc:
        manifest.status = "failed"
        manifest.metrics["error"] = f"{type(exc).__name__}: {exc}"
        if out_dir is not None:
            manifest.write(Path(out_dir) / "manifest.json")
        raise
    manifest.status = "ok"
    manifest.metrics["rel_l2"] = rel
    if result.lambda_final is not None:
        manifest.metrics["lambda_final"] = result.lambda_final
    if out_dir is not None:
        out_dir = Path(out_dir)
        history = _global_history(result)
        aio.write_metrics(out_dir / "metrics.csv", history)
        aio.save_checkpoint(out_dir / "checkpoint.npz", result.basis, result.theta, rff_seed)
        manifest.artifacts.update(metrics="metrics.csv", checkpoint="checkpoint.npz")
        if evaluator is not None:
            rep = evaluator.report(result.basis, result.theta)
            names = list(problem.axes) + ["abs_error"]
            aio.atomic_write(out_dir / "error_map.csv", aio.csv_text(names, rep.rows()))
            manifest.artifacts["error_map"] = "error_map.csv"
        manifest.write(out_dir / "manifest.json")
    if log:
        log(f"{cfg.name} variant={tc.variant} seed={tc.seed} rel_l2={rel:.6e}")
    return rel, result, manifest


def _global_history(result):
    """Pre-training rows followed by bi-level rows, with one running epoch counter."""
    rows = [dict(r) for r in result.pretrain_history]
    off = len(rows)
    for r in result.history:
        r = dict(r)
        r["epoch"] = r["epoch"] + off
        rows.append(r)
    return rows


def cmd_train(args):
    cfg = _load(args)
    out = _out_dir(args, cfg, f"{cfg.train.variant}-seed{cfg.train.seed}")
    try:
        rel, _, _ = run_one(cfg, out, _log)
    except NumericError as exc:
        _log(f"numeric failure: {exc}")
        return EXIT_NUMERIC
    print(f"rel_l2 {rel:.10e}")
    print(f"output {out}")
    return EXIT_OK


COMPARE_COLUMNS = ("variant", "seed", "rel_l2", "std", "status")


def cmd_compare(args):
    cfg = _load(args)
    variants = args.variants.split(",") if args.variants else list(cfg.variants)
    if len(variants) < 2:
        raise ConfigurationError("compare needs at least two variants")
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else list(cfg.seeds)
    out = _out_dir(args, cfg, "compare")
    rows = []
    for v in variants:
        errs = []
        for s in seeds:
            cell = cfg.with_overrides(variant=v, seed=s)
            try:
                rel, _, _ = run_one(cell, out / f"{v}-seed{s}", _log)
                status = "ok"
            except NumericError as exc:
                rel, status = float("nan"), f"failed: {exc}".replace(",", ";")
                _log(f"{v} seed {s} failed: {exc}")
            errs.append(rel)
            rows.append([v, s, rel, "", status])
        ok = [e for e in errs if np.isfinite(e)]
        mean = float(np.mean(ok)) if ok else float("nan")
        std = float(np.std(ok)) if ok else float("nan")
        rows.append([v, "mean", mean, std, f"{len(ok)}/{len(errs)} ok"])
    aio.atomic_write(out / "compare.csv", aio.csv_text(COMPARE_COLUMNS, rows))
    for r in rows:
        if r[1] == "mean":
            print(f"{r[0]:10s} mean {r[2]:.4e} std {r[3]:.4e} ({r[4]})")
    print(f"output {out / 'compare.csv'}")
    return EXIT_OK


def spectrum_header(frequencies):
    return ["row"] + [f"f={f:g}" for f in frequencies]


def cmd_spectrum(args):
    from .evaluate import SpectrumConfig, spectrum_experiment

    cfg = _load(args)
    spec = cfg.spectrum or SpectrumConfig()
    if args.d_sweep:
        try:
            sweep = [int(d) for d in args.d_sweep.split(",")]
        except ValueError as exc:
            raise ConfigurationError(f"--d-sweep expects integers, got {args.d_sweep!r}") from exc
        spec = SpectrumConfig(**{**spec.__dict__, "D_sweep": sweep})
    out = _out_dir(args, cfg, "spectrum")
    table = spectrum_experiment(spec, cfg.train, cfg.network_sizes(cfg.problem()),
                                cfg.sampler.build, problem=cfg.problem(), log=_log)
    aio.atomic_write(out / "spectrum.csv",
                     aio.csv_text(spectrum_header(spec.frequencies), table.csv_rows()))
    manifest = aio.RunManifest(command="spectrum", config=cfg.to_dict(), config_hash=cfg.digest(),
                               seeds={"seeds": list(spec.seeds)},
                               status="ok" if not table.failures else "partial")
    manifest.metrics["failures"] = table.failures
    manifest.artifacts["spectrum"] = "spectrum.csv"
    manifest.write(out / "manifest.json")
    for r in table.csv_rows():
        print(r[0], " ".join(f"{v:.3f}" for v in r[1:]))
    print(f"output {out / 'spectrum.csv'}")
    return EXIT_OK if not table.failures else EXIT_NUMERIC


def cmd_selfcheck(args):
    from .selfcheck import run_checks

    results = run_checks()
    for name, ok, detail in results:
        print(f"CHECK {name} {'PASS' if ok else 'FAIL'} {detail}", flush=True)
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_CHECK


def build_parser():
    p = argparse.ArgumentParser(prog="ifef", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True,
                        help=f"TOML file or preset name ({', '.join(preset_names())})")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory (default: $IFEF_OUTPUT_ROOT/<name>/...)")

    t = sub.add_parser("train", help="train one variant")
    common(t)
    t.add_argument("--variant", choices=["ifef", "ifef_pd", "vanilla"])
    t.add_argument("--extension", choices=["rff", "none"])
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("compare", help="paired runs over variants and seeds")
    common(c)
    c.add_argument("--variants", help="comma-separated, e.g. ifef,vanilla")
    c.add_argument("--seeds", help="comma-separated integer seeds")
    c.add_argument("--extension", choices=["rff", "none"])
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("spectrum", help="t = 0 spectrum of vanilla and extended bases")
    common(s)
    s.add_argument("--d-sweep", help="comma-separated D values, e.g. 400,1600")
    s.set_defaults(func=cmd_spectrum)

    k = sub.add_parser("selfcheck", help="fast oracle suite")
    k.set_defaults(func=cmd_selfcheck)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except ConfigurationError as exc:
        _log(f"configuration error: {exc}")
        return EXIT_CONFIG
    except NumericError as exc:
        _log(f"numeric failure: {exc}")
        return EXIT_NUMERIC
    except KeyboardInterrupt:
        return 130
    except Exception:  # pragma: no cover - last-resort diagnostics
        traceback.print_exc()
        return EXIT_NUMERIC
    _log(f"done in {time.perf_counter() - t0:.1f} s")
    return code


if __name__ == "__main__":
    sys.exit(main())

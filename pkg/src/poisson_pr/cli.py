"""Configuration-driven experiment runner and benchmark suites.

Verbs:
  run    -- single experiment from a JSON config (plus dotted overrides)
  suite  -- preset comparison studies over a seed list
  check  -- quick invariant self-tests

Exit codes: 0 success, 1 config error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .admm import run_admm, update_v_magnitude_b0
from .baselines import run_lbfgs
from .init_eval import initialize, nrmse as _nrmse, psnr as _psnr
from .mm import CurvatureKind, curvature_improved, curvature_max, run_mm
from .objectives import DiffOp, GaussianObjective, HuberTV, PoissonObjective
from .operators import (
    CanonicalDftModel,
    DenseModel,
    FieldTag,
    MaskedDftModel,
    SignalVector,
    calibrate_scale,
    load_file_matrix,
    load_pgm,
    make_masks,
    random_gaussian_model,
    simulate_poisson,
)
from .phantoms import blocks, disk, random_complex
from .wf import StepKind, StepRule, TruncationRule, run_wf


class ConfigError(ValueError):
    pass


DEFAULT_CONFIG = {
    "model": {"variant": "dense", "m": 512, "n": 64, "seed": 12345},
    "signal": {"source": "blocks", "n": 64, "field": "real_nonnegative", "seed": 0},
    "mean_count": 0.25,
    "background": 0.1,
    "algorithm": {
        "kind": "wf",
        "step": "fisher",
        "noise_model": "poisson",
        "curvature": "improved",
        "rho0": 8.0,
        "truncation": None,
    },
    "regularizer": None,
    "n_iters": 100,
    "seed": 0,
    "init_iters": 300,
}

_FIELD = {
    "real": FieldTag.REAL,
    "complex": FieldTag.COMPLEX,
    "real_nonnegative": FieldTag.REAL_NONNEGATIVE,
}


def _deep_update(base: dict, upd: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in upd.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_update(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _apply_override(cfg: dict, key: str, raw: str) -> None:
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            node[p] = {}
        node = node[p]
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    node[parts[-1]] = val


def build_signal(cfg: dict) -> SignalVector:
    src = cfg.get("source", "blocks")
    field = _FIELD.get(cfg.get("field", "real_nonnegative"))
    if field is None:
        raise ConfigError(f"unknown field {cfg.get('field')!r}")
    if src == "blocks":
        sig = blocks(int(cfg.get("n", 64)), seed=int(cfg.get("seed", 0)))
    elif src == "disk":
        h, w = cfg.get("dims", [16, 16])
        sig = disk(int(h), int(w))
    elif src == "random_complex":
        sig = random_complex(int(cfg.get("n", 64)), seed=int(cfg.get("seed", 0)))
    elif src == "pgm":
        img = load_pgm(cfg["path"])
        sig = SignalVector(
            img.ravel().astype(complex), field=FieldTag.REAL_NONNEGATIVE,
            dims=img.shape,
        )
    else:
        raise ConfigError(f"unknown signal source {src!r}")
    if src != "pgm" and field is not sig.field:
        sig = SignalVector(sig.values, field=field, dims=sig.dims)
    return sig


def build_model(cfg: dict, signal: SignalVector, background: float):
    variant = cfg.get("variant", "dense")
    n = signal.n
    if variant == "dense":
        m = int(cfg.get("m", 8 * n))
        return random_gaussian_model(m, n, seed=int(cfg.get("seed", 12345)),
                                     background=background)
    if variant == "masked_dft":
        masks = make_masks(
            int(cfg.get("masks", 21)), n, seed=int(cfg.get("seed", 12345)),
            exact_half=bool(cfg.get("exact_half_masks", False)),
        )
        return MaskedDftModel(masks, background=background)
    if variant == "canonical_dft":
        if signal.dims is None:
            raise ConfigError("canonical_dft needs an image-shaped signal")
        if "reference_path" in cfg:
            ref = load_pgm(cfg["reference_path"])
        else:
            ref = disk(*signal.dims).values.real.reshape(signal.dims)
        return CanonicalDftModel(
            signal.dims, ref,
            pad_width=cfg.get("pad_width"),
            fft_dims=tuple(cfg["fft_dims"]) if "fft_dims" in cfg else None,
            background=background,
        )
    if variant == "file":
        model = load_file_matrix(cfg["path"], background=background)
        if model.cols != n:
            raise ConfigError(
                f"file matrix has {model.cols} columns, signal has {n}"
            )
        return model
    raise ConfigError(f"unknown model variant {variant!r}")


def build_regularizer(cfg: dict | None, signal: SignalVector) -> HuberTV | None:
    if cfg is None:
        return None
    if cfg.get("kind", "huber_tv") != "huber_tv":
        raise ConfigError(f"unknown regularizer {cfg.get('kind')!r}")
    diff = DiffOp(signal.n, dims=signal.dims)
    return HuberTV(float(cfg.get("beta", 32.0)), float(cfg.get("alpha", 0.1)), diff)


def _solve(cfg: dict, obj, reg, x0: SignalVector, x_true):
    alg = cfg["algorithm"]
    kind = alg.get("kind", "wf")
    n_iters = int(cfg.get("n_iters", 100))
    if kind == "wf":
        step = alg.get("step", "fisher")
        try:
            rule = StepRule(kind=StepKind(step))
        except ValueError:
            raise ConfigError(f"unknown step rule {step!r}")
        trunc_cfg = alg.get("truncation")
        trunc = (
            TruncationRule(enabled=True, a_h=float(trunc_cfg["a_h"]))
            if trunc_cfg else TruncationRule()
        )
        return run_wf(obj, x0, n_iters, rule=rule, reg=reg, trunc=trunc,
                      x_true=x_true)
    if kind == "mm":
        try:
            curv = CurvatureKind(alg.get("curvature", "improved"))
        except ValueError:
            raise ConfigError(f"unknown curvature {alg.get('curvature')!r}")
        return run_mm(obj, x0, n_iters, curvature=curv, reg=reg, x_true=x_true)
    if kind == "admm":
        return run_admm(obj, x0, n_iters, rho0=float(alg.get("rho0", 8.0)),
                        reg=reg, x_true=x_true)
    if kind == "lbfgs":
        return run_lbfgs(obj, x0, n_iters, reg=reg, x_true=x_true)
    raise ConfigError(f"unknown algorithm kind {kind!r}")


def run_experiment(cfg: dict, out_dir: str | Path) -> dict:
    """Run one configured experiment; write trace CSV, summary JSON, and the
    reconstructed signal; return the summary dict."""
    cfg = _deep_update(DEFAULT_CONFIG, cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = int(cfg["seed"])

    signal = build_signal(cfg["signal"])
    model = build_model(cfg["model"], signal, float(cfg["background"]))
    calibrate_scale(model, signal.values, float(cfg["mean_count"]))
    meas = simulate_poisson(model, signal.values, seed)

    x0 = initialize(model, meas.y, field=signal.field,
                    iters=int(cfg.get("init_iters", 300)), seed=seed)
    noise_model = cfg["algorithm"].get("noise_model", "poisson")
    if noise_model == "poisson":
        obj = PoissonObjective(model, meas.y, field=signal.field)
    elif noise_model == "gaussian":
        obj = GaussianObjective(model, meas.y, field=signal.field)
    else:
        raise ConfigError(f"unknown noise model {noise_model!r}")
    reg = build_regularizer(cfg.get("regularizer"), signal)

    t_start = time.perf_counter()
    state = _solve(cfg, obj, reg, x0, signal.values)
    wall = time.perf_counter() - t_start

    trace_path = out / "trace.csv"
    with open(trace_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iter", "time_s", "cost", "nrmse", "psnr"])
        init_cost = obj.cost(x0.values) + (
            reg.beta * reg.value(x0.values) if reg is not None else 0.0
        )
        writer.writerow([0, 0.0, repr(init_cost),
                         repr(_nrmse(x0.values, signal.values)),
                         repr(_psnr(x0.values, signal.values))])
        for row in state.trace:
            writer.writerow([row.k, repr(row.time_s), repr(row.cost),
                             repr(row.nrmse), repr(row.psnr)])

    xhat_path = out / "xhat.csv"
    with open(xhat_path, "w") as f:
        for z in state.x:
            f.write(f"{z.real:.17g}:{z.imag:.17g}\n")

    summary = {
        "version": __version__,
        "config": cfg,
        "status": state.status,
        "warnings": state.warnings,
        "wall_time_s": wall,
        "final_cost": state.trace[-1].cost if state.trace else init_cost,
        "final_nrmse": _nrmse(state.x, signal.values),
        "final_psnr": _psnr(state.x, signal.values),
        "metric_conventions": {
            "nrmse": "phase-corrected l2 error over ||x_true||",
            "psnr_peak": "max |x_true|, capped at 300 dB",
        },
        "trace_csv": str(trace_path),
        "xhat_csv": str(xhat_path),
    }
    with open(out / "summary.json", "w") as f:
        json.dump(summary, f, indent=2)
    return summary


SUITE_PRESETS = {
    "step-rules": [
        ("wf-fisher", {"algorithm": {"kind": "wf", "step": "fisher"}}),
        ("wf-backtracking", {"algorithm": {"kind": "wf", "step": "backtracking"}}),
        ("wf-exact-gaussian",
         {"algorithm": {"kind": "wf", "step": "exact_gaussian",
                        "noise_model": "gaussian"}}),
        ("lbfgs", {"algorithm": {"kind": "lbfgs"}}),
    ],
    "poisson-vs-gaussian": [
        ("wf-fisher-poisson", {"algorithm": {"kind": "wf", "step": "fisher"}}),
        ("wf-fisher-gaussian",
         {"algorithm": {"kind": "wf", "step": "fisher", "noise_model": "gaussian"}}),
        ("wf-fisher-poisson-tv",
         {"algorithm": {"kind": "wf", "step": "fisher"},
          "regularizer": {"kind": "huber_tv", "beta": 32.0, "alpha": 0.1}}),
    ],
    "reg-race": [
        (name, _deep_update(cfg, {"regularizer":
                                  {"kind": "huber_tv", "beta": 32.0, "alpha": 0.1}}))
        for name, cfg in [
            ("wf-fisher", {"algorithm": {"kind": "wf", "step": "fisher"}}),
            ("wf-backtracking", {"algorithm": {"kind": "wf", "step": "backtracking"}}),
            ("lbfgs", {"algorithm": {"kind": "lbfgs"}}),
            ("mm-improved", {"algorithm": {"kind": "mm", "curvature": "improved"}}),
            ("mm-max", {"algorithm": {"kind": "mm", "curvature": "max"}}),
            ("admm", {"algorithm": {"kind": "admm", "rho0": 8.0}}),
        ]
    ],
}


def run_suite(
    preset: str, seeds: list[int], out_dir: str | Path, base: dict | None = None
) -> dict:
    """Run a preset comparison over seeds; write median traces per algorithm
    and a combined final-metric comparison CSV."""
    if preset not in SUITE_PRESETS:
        raise ConfigError(f"unknown suite preset {preset!r}; "
                          f"available: {sorted(SUITE_PRESETS)}")
    if not seeds:
        raise ConfigError("suite needs a nonempty seed list")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = base or {}
    comparison = []
    results = {}
    for name, patch in SUITE_PRESETS[preset]:
        per_seed = []
        for s in seeds:
            cfg = _deep_update(_deep_update(base, patch), {"seed": int(s)})
            summary = run_experiment(cfg, out / name / f"seed{s}")
            per_seed.append(summary)
        # aggregate per-iteration medians over seeds
        traces = []
        for s in seeds:
            rows = []
            with open(out / name / f"seed{s}" / "trace.csv") as f:
                reader = csv.reader(f)
                next(reader)
                for r in reader:
                    rows.append([float(v) for v in r])
            traces.append(np.array(rows))
        n_rows = min(t.shape[0] for t in traces)
        stacked = np.stack([t[:n_rows] for t in traces])
        median = np.median(stacked, axis=0)
        agg_path = out / f"{name}_median_trace.csv"
        with open(agg_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["iter", "time_s", "cost", "nrmse", "psnr"])
            for row in median:
                writer.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])
        finals = {
            "algorithm": name,
            "median_final_cost": float(np.median([p["final_cost"] for p in per_seed])),
            "median_final_nrmse": float(np.median([p["final_nrmse"] for p in per_seed])),
            "median_final_psnr": float(np.median([p["final_psnr"] for p in per_seed])),
            "median_wall_time_s": float(np.median([p["wall_time_s"] for p in per_seed])),
        }
        comparison.append(finals)
        results[name] = {"per_seed": per_seed, "median_trace_csv": str(agg_path)}
    with open(out / "comparison.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(comparison[0].keys()))
        writer.writeheader()
        writer.writerows(comparison)
    return results


def run_check() -> int:
    """Quick invariant self-tests; returns a process exit code."""
    failures = []

    def check(name, ok):
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        if not ok:
            failures.append(name)

    rng = np.random.default_rng(0)
    for name, model in [
        ("dense", random_gaussian_model(12, 5, seed=1)),
        ("masked_dft", MaskedDftModel(make_masks(3, 5, seed=2))),
        ("canonical_dft", CanonicalDftModel((2, 3), np.ones((2, 2)))),
    ]:
        x = rng.standard_normal(model.cols) + 1j * rng.standard_normal(model.cols)
        z = rng.standard_normal(model.rows) + 1j * rng.standard_normal(model.rows)
        lhs = np.vdot(z, model.apply_linear(x))
        rhs = np.vdot(model.adjoint(z), x)
        check(f"adjoint consistency ({name})",
              abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0))

    y = rng.uniform(0.0, 20.0, 200)
    b = rng.uniform(0.05, 5.0, 200)
    s = rng.uniform(-10.0, 10.0, 200)
    ci = curvature_improved(s, y, b)
    cm = curvature_max(y, b)
    check("curvature ordering 2 <= c_imp <= c_max",
          bool(np.all(ci >= 2.0 - 1e-12) and np.all(ci <= cm + 1e-12)))

    t = rng.uniform(0.0, 5.0, 100)
    yy = rng.uniform(0.0, 10.0, 100)
    m = update_v_magnitude_b0(t, yy, 2.0)
    resid = 2 * m - np.divide(2 * yy, m, out=np.zeros_like(m), where=m > 0) \
        + 2.0 * (m - t)
    ok = np.all((np.abs(resid) < 1e-8) | (yy == 0))
    check("ADMM b=0 magnitude stationarity", bool(ok))
    return 0 if not failures else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="poisson-pr",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("--config", help="JSON config file")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--override", action="append", default=[],
                       metavar="K=V", help="dotted-key config override")

    p_suite = sub.add_parser("suite", help="run a preset comparison study")
    p_suite.add_argument("--preset", required=True)
    p_suite.add_argument("--seed", type=int, action="append", default=[],
                         help="repeatable; seed list for the suite")
    p_suite.add_argument("--config", help="JSON base config file")
    p_suite.add_argument("--out", default="out")
    p_suite.add_argument("--override", action="append", default=[],
                         metavar="K=V")

    sub.add_parser("check", help="run invariant self-tests")

    args = parser.parse_args(argv)
    try:
        if args.verb == "check":
            return run_check()
        cfg = {}
        if args.config:
            try:
                with open(args.config) as f:
                    cfg = json.load(f)
            except (OSError, json.JSONDecodeError) as exc:
                print(f"config error: {exc}", file=sys.stderr)
                return 1
        for ov in args.override:
            if "=" not in ov:
                print(f"config error: bad override {ov!r}", file=sys.stderr)
                return 1
            k, _, v = ov.partition("=")
            _apply_override(cfg, k, v)
        if args.verb == "run":
            if args.seed is not None:
                cfg["seed"] = args.seed
            summary = run_experiment(cfg, args.out)
            print(json.dumps({k: summary[k] for k in
                              ("final_cost", "final_nrmse", "final_psnr",
                               "wall_time_s", "status")}, indent=2))
            return 0 if summary["status"].startswith("ok") else 2
        if args.verb == "suite":
            seeds = args.seed or [0]
            run_suite(args.preset, seeds, args.out, base=cfg)
            print(f"suite {args.preset} complete: results in {args.out}")
            return 0
    except (ConfigError, KeyError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (np.linalg.LinAlgError, RuntimeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

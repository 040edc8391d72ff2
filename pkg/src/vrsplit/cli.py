"""Benchmark command line: ``vrsplit run | validate | compare``.

``run`` executes a declarative YAML experiment config (schema below), writing
one trace CSV per (method x seed x instance) plus a ``manifest.json`` listing
every output with a digest of the config.  ``validate`` executes the built-in
invariant checks and exits nonzero on any failure.  ``compare`` aggregates the
traces named by a manifest into a summary table.

Exit codes: 0 ok, 1 check/run failure, 2 usage or config error.

Config schema (YAML, keys -> defaults)::

    problem:
      kind: logistic_minimax | matrix_game | synthetic_linear
      # logistic_minimax: dataset (libsvm path) or n/p1 for a synthetic set,
      #   p2 (10), reg (l1|scad), reg_weight (5.0e-3), noise_sigma (0.05),
      #   data_seed (0)
      # matrix_game: p1, n_samples, theta (0.8), data_seed (0)
      # synthetic_linear: p, spectrum_f, spectrum_t, q_scale, s_scale
    methods:                       # list of method specs
      - method: afbs | abfs | og | fkm | vr_halpern | vr_eg | vr_frbs
        estimator: full_batch | lsvrg | saga | lsarah | hsgd   # splitting methods
        b_scale: 1.0               # optional batch/probability rescaling
        p_scale: 1.0
        eta_scale: 1.0             # baselines: scale on the default step size
    accel:
      mu: 0.6333...                # 0.95 * 2/3
      r: null                      # default 2 + 1/mu
      lambda_scale: null           # lam = lambda_scale / L (default 1/L_hat)
      zeta_scale: 0.05             # L_hat = (1 + zeta_scale) * L
      beta_scale: 1.0
    x0: {kind: randn, scale: 0.25} | {kind: simplex_pair}
    budget_epochs: 200
    seeds: [0]
    instances: 1
    metric_stride_epochs: 1.0
    out_dir: vrsplit-results

Environment: ``VRSPLIT_THREADS`` sets the default worker count of ``run``;
``VRSPLIT_PURE_NUMPY=1`` selects the numpy kernel backend.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import baselines, data, problems, solvers
from .core import (
    ConfigurationError,
    GeProblem,
    check_cocoercivity,
    check_resolvent_nonexpansive,
    compute_split_constants,
    fbs_residual,
)
from .estimators import ESTIMATOR_KINDS, build_schedule
from .prox import project_simplex, prox_scad

__all__ = ["main", "run_experiment", "run_validation", "summarize_manifest"]

_SPLIT_METHODS = ("afbs", "abfs")
_BASELINES = ("og", "fkm", "vr_halpern", "vr_eg", "vr_frbs")


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------


class ConfigError(ValueError):
    """Invalid experiment config; message names the offending field."""


def _require(cfg: dict, field: str, ctx: str):
    if field not in cfg:
        raise ConfigError(f"missing required field '{ctx}{field}'")
    return cfg[field]


def load_config(path: str) -> dict:
    with open(path, "r") as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a mapping")
    return cfg


def config_digest(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()[:16]


def build_problem(pcfg: dict, instance: int) -> GeProblem:
    kind = _require(pcfg, "kind", "problem.")
    data_seed = int(pcfg.get("data_seed", 0))
    rng = np.random.default_rng(np.random.SeedSequence([data_seed, instance]))
    if kind == "logistic_minimax":
        p2 = int(pcfg.get("p2", 10))
        sigma = float(pcfg.get("noise_sigma", 0.05))
        if "dataset" in pcfg:
            ds = data.parse_libsvm(pcfg["dataset"]).preprocess()
        else:
            n = int(_require(pcfg, "n", "problem."))
            p1 = int(_require(pcfg, "p1", "problem."))
            ds = data.make_synthetic_classification(n, p1, seed=data_seed + 7919 * instance)
            ds = ds.preprocess()
        tensor = data.make_ambiguous(ds, p2, sigma, rng)
        return problems.build_logistic_minimax(
            tensor,
            ds.labels,
            reg_kind=pcfg.get("reg", "l1"),
            reg_weight=float(pcfg.get("reg_weight", 5.0e-3)),
        )
    if kind == "matrix_game":
        return problems.build_matrix_game(
            p1=int(_require(pcfg, "p1", "problem.")),
            n_samples=int(_require(pcfg, "n_samples", "problem.")),
            rng=rng,
            theta=float(pcfg.get("theta", 0.8)),
        )
    if kind == "synthetic_linear":
        p = int(_require(pcfg, "p", "problem."))
        spec_f = pcfg.get("spectrum_f")
        if spec_f is None:
            spec_f = np.logspace(-4, 0, p).tolist()
        spec_t = pcfg.get("spectrum_t")
        if spec_t is None:
            spec_t = np.full(p, 0.5).tolist()
        q = rng.normal(size=p) * float(pcfg.get("q_scale", 1.0))
        s = rng.normal(size=p) * float(pcfg.get("s_scale", 0.0))
        return problems.build_synthetic_linear(
            p, spec_f, spec_t, rho_target=pcfg.get("rho_target"), rng=rng, q=q, s=s
        )
    raise ConfigError(f"unknown problem.kind '{kind}'")


def _accel_params(problem: GeProblem, acfg: dict) -> solvers.AccelParams:
    mu = float(acfg.get("mu", 0.95 * 2.0 / 3.0))
    r = acfg.get("r")
    L = problem.lipschitz_L
    zeta = float(acfg.get("zeta_scale", 0.05)) * L
    lam_scale = acfg.get("lambda_scale")
    lam = None if lam_scale is None else float(lam_scale) / L
    constants = compute_split_constants(L, problem.cohypo_rho, zeta=zeta, lambda_override=lam)
    return solvers.AccelParams.from_constants(
        constants,
        mu=mu,
        r=None if r is None else float(r),
        beta_scale=float(acfg.get("beta_scale", 1.0)),
    )


def _initial_point(problem: GeProblem, xcfg: dict, rng: np.random.Generator) -> np.ndarray:
    kind = xcfg.get("kind", "randn")
    if kind == "randn":
        return float(xcfg.get("scale", 0.25)) * rng.normal(size=problem.dim)
    if kind == "simplex_pair":
        # Feasible two-block start: each simplex block sums to one.
        return np.full(problem.dim, 2.0 / problem.dim)
    if kind == "zeros":
        return np.zeros(problem.dim)
    raise ConfigError(f"unknown x0.kind '{kind}'")


def _make_method(problem, mcfg: dict, acfg: dict, x0: np.ndarray):
    name = _require(mcfg, "method", "methods[].")
    n = problem.n_components
    if name in _SPLIT_METHODS:
        est_kind = mcfg.get("estimator", "full_batch")
        if est_kind not in ESTIMATOR_KINDS:
            raise ConfigError(f"unknown methods[].estimator '{est_kind}'")
        params = _accel_params(problem, acfg)
        cfg = build_schedule(
            est_kind, n, constants={"mu": params.mu, "r": params.r}, flavor=mcfg.get("flavor", "practical")
        )
        cfg = cfg.scaled(float(mcfg.get("b_scale", 1.0)), float(mcfg.get("p_scale", 1.0)))
        cls = solvers.ForwardBackwardAccel if name == "afbs" else solvers.BackwardForwardAccel
        return cls(problem, params, cfg, x0)
    eta_scale = float(mcfg.get("eta_scale", 1.0))
    if name == "og":
        return baselines.OptimisticGradient(problem, x0, eta=eta_scale / problem.lipschitz_L)
    if name == "fkm":
        return baselines.AnchoredKM(problem, x0, eta=eta_scale / problem.lipschitz_L)
    if name == "vr_halpern":
        cfg = build_schedule("lsarah", n).scaled(
            float(mcfg.get("b_scale", 1.0)), float(mcfg.get("p_scale", 1.0))
        )
        eta = float(mcfg.get("eta_over_L", 0.5)) / problem.lipschitz_L
        return baselines.VrHalpern(problem, x0, cfg, eta=eta)
    if name in ("vr_eg", "vr_frbs"):
        svrg = build_schedule("lsvrg", n).scaled(
            float(mcfg.get("b_scale", 1.0)), float(mcfg.get("p_scale", 1.0))
        )
        b = svrg.batch_at(0, n)
        p = svrg.prob_at(0)
        cls = baselines.VrExtragradient if name == "vr_eg" else baselines.VrForwardReflected
        return cls(problem, x0, batch_size=b, prob=p)
    raise ConfigError(f"unknown methods[].method '{name}'")


def _method_label(mcfg: dict) -> tuple:
    # An optional alias lets one scheme appear under several names.
    return (mcfg.get("alias") or mcfg["method"], mcfg.get("estimator", ""))


def _run_one(cfg: dict, mcfg: dict, seed: int, instance: int, out_path: str) -> dict:
    problem = build_problem(cfg["problem"], instance)
    run_rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(instance)]))
    x0 = _initial_point(problem, cfg.get("x0", {}), run_rng)
    method = _make_method(problem, mcfg, cfg.get("accel", {}), x0)
    lam_scale = cfg.get("metric_lambda_scale")
    metric_lambda = None if lam_scale is None else float(lam_scale) / problem.lipschitz_L
    stride = int(
        round(float(cfg.get("metric_stride_epochs", 1.0)) * problem.n_components)
    )
    name, estimator = _method_label(mcfg)
    trace = solvers.run_solver(
        problem,
        method,
        budget_epochs=float(cfg.get("budget_epochs", 200)),
        seed=seed,
        metric_stride=max(stride, 1),
        metric_lambda=metric_lambda,
        rng=run_rng,
        metadata={
            "method": name,
            "estimator": estimator,
            "problem": problem.tag,
            "instance": instance,
            "params_digest": config_digest(cfg),
        },
    )
    data.write_trace_csv(trace, out_path)
    return {
        "file": os.path.basename(out_path),
        "method": name,
        "estimator": estimator,
        "seed": seed,
        "instance": instance,
        "diverged": bool(trace.metadata.get("diverged", False)),
        "final_rel_residual": trace.rel_residual[-1],
    }


def _validate_config(cfg: dict) -> None:
    _require(cfg, "problem", "")
    methods = _require(cfg, "methods", "")
    if not isinstance(methods, list) or not methods:
        raise ConfigError("field 'methods' must be a non-empty list")
    for mcfg in methods:
        name = _require(mcfg, "method", "methods[].")
        if name not in _SPLIT_METHODS + _BASELINES:
            raise ConfigError(f"unknown methods[].method '{name}'")
    # Fail fast on invalid acceleration parameters before scheduling runs.
    if any(m["method"] in _SPLIT_METHODS for m in methods):
        probe = build_problem(cfg["problem"], instance=0)
        _accel_params(probe, cfg.get("accel", {}))


def run_experiment(cfg: dict, out_dir: str, workers: int = 1) -> str:
    """Execute every (method, seed, instance) run; returns the manifest path."""
    _validate_config(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [int(s) for s in cfg.get("seeds", [0])]
    instances = int(cfg.get("instances", 1))
    labels = ["-".join(filter(None, _method_label(m))) for m in cfg["methods"]]
    if len(set(labels)) != len(labels):
        raise ConfigError("duplicate method entries; disambiguate with an 'alias' field")
    tasks = []
    for mcfg, label in zip(cfg["methods"], labels):
        for seed in seeds:
            for inst in range(instances):
                fname = f"{label}_seed{seed}_inst{inst}.csv"
                tasks.append((mcfg, seed, inst, str(out / fname)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(
                pool.map(_run_one_star, [(cfg, m, s, i, p) for (m, s, i, p) in tasks])
            )
    else:
        entries = [_run_one(cfg, m, s, i, p) for (m, s, i, p) in tasks]
    manifest = {
        "config_digest": config_digest(cfg),
        "problem": cfg["problem"],
        "outputs": entries,
    }
    manifest_path = out / "manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return str(manifest_path)


def _run_one_star(args):
    return _run_one(*args)


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def run_validation(seed: int = 0, split_constants_fn=compute_split_constants) -> list:
    """Built-in invariant suite; returns ``[(name, passed, detail), ...]``.

    ``split_constants_fn`` is injectable so a deliberately broken constant
    formula is caught by the step-size inequality check.
    """
    results = []
    rng = np.random.default_rng(seed)

    # Step-size inequality of the residual map on a monotone quadratic
    # paired with a soft-threshold resolvent.
    p = 8
    f_eig = np.linspace(0.2, 1.0, p)
    prob = problems.build_synthetic_linear(
        p, f_eig, np.full(p, 0.4), rng=np.random.default_rng(seed), q=rng.normal(size=p)
    )
    sc = split_constants_fn(prob.lipschitz_L, 0.0, zeta=0.05 * prob.lipschitz_L)
    min_slack = math.inf
    for _ in range(200):
        x = rng.uniform(-1, 1, p)
        y = rng.uniform(-1, 1, p)
        gx = fbs_residual(prob, x, sc.lam, prob.full_F(x))
        gy = fbs_residual(prob, y, sc.lam, prob.full_F(y))
        lhs = float(np.dot(gx - gy, x - y))
        rhs = sc.beta_bar * float(np.sum((gx - gy) ** 2)) + sc.Lambda_gap * prob.lipschitz_L * float(
            np.dot(prob.full_F(x) - prob.full_F(y), x - y)
        )
        min_slack = min(min_slack, lhs - rhs)
    results.append(("residual-map inequality", min_slack >= -1e-8, f"min slack {min_slack:.3e}"))

    # Unbiasedness of the snapshot and table estimators by enumeration.
    n = 4
    quad = _tiny_finite_sum(n, dim=3, seed=seed)
    for kind in ("lsvrg", "saga"):
        gap = _enumeration_bias(quad, kind, seed)
        results.append((f"{kind} unbiasedness (n=4, b=1)", gap <= 1e-12, f"max |E - F| {gap:.2e}"))

    # Proximal maps against brute-force minimization.
    rng2 = np.random.default_rng(seed + 1)
    worst = 0.0
    for _ in range(20):
        x = rng2.uniform(-0.03, 0.03, size=3)
        ours = prox_scad(x, 1.0, 0.005, 3.7)
        grid = _grid_prox_scad(x, 1.0, 0.005, 3.7)
        worst = max(worst, float(np.max(np.abs(ours - grid))))
    results.append(("scad prox vs grid oracle", worst <= 2e-4, f"max gap {worst:.2e}"))

    worst = 0.0
    for _ in range(20):
        v = rng2.uniform(-1, 2, size=4)
        worst = max(worst, float(np.max(np.abs(project_simplex(v) - _kkt_simplex(v)))))
    results.append(("simplex projection vs active-set oracle", worst <= 1e-6, f"max gap {worst:.2e}"))

    rep = check_resolvent_nonexpansive(prob, sc.lam, 100, rng_seed=seed)
    results.append(
        ("resolvent nonexpansiveness", rep.max_ratio <= 1.0 + 1e-10, f"max ratio {rep.max_ratio:.12f}")
    )
    rep2 = check_cocoercivity(prob, 100, rng_seed=seed)
    results.append(
        ("averaged co-coercivity probe", rep2.min_margin >= -1e-8, f"min margin {rep2.min_margin:.3e}")
    )
    return results


def _tiny_finite_sum(n: int, dim: int, seed: int) -> GeProblem:
    rng = np.random.default_rng(seed)
    mats = [np.eye(dim) * (0.5 + i / n) + 0.1 * rng.normal(size=(dim, dim)) for i in range(n)]
    offs = [rng.normal(size=dim) for _ in range(n)]

    def component_batch(x, idx):
        return np.stack([mats[i] @ x + offs[i] for i in idx])

    return GeProblem(
        dim=dim,
        n_components=n,
        component_batch=component_batch,
        resolvent=lambda x, lam: x,
        lipschitz_L=2.0,
    )


def _enumeration_bias(problem: GeProblem, kind: str, seed: int) -> float:
    import copy

    from .estimators import EstimatorConfig, make_estimator

    class _Forced:
        def __init__(self, j):
            self.j = j

        def integers(self, low, high, size):
            return np.full(size, self.j, dtype=np.int64)

        def random(self):
            return 1.0  # never refresh

    rng = np.random.default_rng(seed)
    n = problem.n_components
    x0 = rng.normal(size=problem.dim)
    x1 = rng.normal(size=problem.dim)
    base = make_estimator(problem, EstimatorConfig(kind, batch_size=1, prob=0.25))
    base.estimate(0, x0, x0, rng)
    acc = np.zeros(problem.dim)
    for j in range(n):
        branch = copy.deepcopy(base)
        acc += branch.estimate(1, x1, x0, _Forced(j))
    exact = problem.full_F(x1)
    return float(np.max(np.abs(acc / n - exact)))


def _grid_prox_scad(x: np.ndarray, step: float, weight: float, a: float, span: float = 1.0) -> np.ndarray:
    grid = np.arange(-span, span + 1e-5, 1e-5)

    def pen(t):
        at = np.abs(t)
        return np.where(
            at <= weight,
            weight * at,
            np.where(
                at <= a * weight,
                (2 * a * weight * at - at**2 - weight**2) / (2 * (a - 1)),
                weight**2 * (a + 1) / 2,
            ),
        )

    out = np.empty_like(x)
    for i, xi in enumerate(x):
        obj = 0.5 * (grid - xi) ** 2 + step * pen(grid)
        out[i] = grid[np.argmin(obj)]
    return out


def _kkt_simplex(v: np.ndarray) -> np.ndarray:
    """Exact projection by enumerating active sets (independent oracle)."""
    from itertools import combinations

    p = v.size
    best, best_d = None, math.inf
    for size in range(1, p + 1):
        for support in combinations(range(p), size):
            s = np.array(support)
            w = np.zeros(p)
            w[s] = v[s] + (1.0 - v[s].sum()) / size
            if np.any(w[s] < -1e-12):
                continue
            d = float(np.sum((w - v) ** 2))
            if d < best_d - 1e-15:
                best, best_d = w, d
    return np.maximum(best, 0.0)


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def summarize_manifest(manifest_path: str) -> list:
    """Per-method summary rows: final residual stats, area under the log
    curve, epochs to reach 1e-2."""
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    base = Path(manifest_path).parent
    groups = {}
    for entry in manifest["outputs"]:
        key = (entry["method"], entry["estimator"])
        groups.setdefault(key, []).append(data.read_trace_csv(str(base / entry["file"])))
    rows = []
    for (method, estimator), traces in sorted(groups.items()):
        finals = np.array([t.rel_residual[-1] for t in traces])
        aucs = []
        reach = []
        for t in traces:
            rel = np.maximum(np.asarray(t.rel_residual), 1e-300)
            aucs.append(float(np.trapezoid(np.log10(rel), np.asarray(t.epochs))))
            hit = [e for e, r in zip(t.epochs, t.rel_residual) if r <= 1e-2]
            reach.append(hit[0] if hit else math.inf)
        rows.append(
            {
                "method": method,
                "estimator": estimator,
                "final_mean": float(finals.mean()),
                "final_std": float(finals.std()),
                "auc_log": float(np.mean(aucs)),
                "epochs_to_1e-2": float(np.median(reach)),
            }
        )
    return rows


def _write_summary(rows: list, path: str) -> None:
    import csv as _csv

    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["method", "estimator", "final_mean", "final_std", "auc_log", "epochs_to_1e-2"])
        for r in rows:
            w.writerow(
                [
                    r["method"],
                    r["estimator"],
                    repr(r["final_mean"]),
                    repr(r["final_std"]),
                    repr(r["auc_log"]),
                    repr(r["epochs_to_1e-2"]),
                ]
            )


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def preset_path(name: str) -> str:
    ref = resources.files("vrsplit").joinpath("presets", f"{name}.yaml")
    if not ref.is_file():
        available = sorted(
            p.name[:-5] for p in resources.files("vrsplit").joinpath("presets").iterdir()
        )
        raise ConfigError(f"unknown preset '{name}'; available: {', '.join(available)}")
    return str(ref)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="vrsplit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    src = p_run.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="path to a YAML experiment config")
    src.add_argument("--preset", help="name of a shipped preset config")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("VRSPLIT_THREADS", "1")),
        help="worker processes (default: VRSPLIT_THREADS or 1)",
    )

    p_val = sub.add_parser("validate", help="run the built-in invariant checks")
    p_val.add_argument("--seed", type=int, default=0)

    p_cmp = sub.add_parser("compare", help="summarize traces listed in a manifest")
    p_cmp.add_argument("--manifest", required=True)
    p_cmp.add_argument("--csv", default=None, help="also write the summary as CSV")

    args = parser.parse_args(argv)

    if args.command == "run":
        try:
            cfg_path = args.config if args.config else preset_path(args.preset)
            cfg = load_config(cfg_path)
            out_dir = args.out or cfg.get("out_dir", "vrsplit-results")
            manifest = run_experiment(cfg, out_dir, workers=max(1, args.threads))
        except (ConfigError, ConfigurationError, FileNotFoundError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(manifest)
        return 0

    if args.command == "validate":
        results = run_validation(seed=args.seed)
        ok = True
        for name, passed, detail in results:
            print(f"{'PASS' if passed else 'FAIL'}  {name}  ({detail})")
            ok &= passed
        return 0 if ok else 1

    if args.command == "compare":
        try:
            rows = summarize_manifest(args.manifest)
        except (FileNotFoundError, data.ParseError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        header = f"{'method':<12} {'estimator':<10} {'final_mean':>12} {'final_std':>12} {'auc_log':>10} {'to 1e-2':>8}"
        print(header)
        for r in rows:
            print(
                f"{r['method']:<12} {r['estimator']:<10} {r['final_mean']:>12.4e} "
                f"{r['final_std']:>12.4e} {r['auc_log']:>10.3f} {r['epochs_to_1e-2']:>8.1f}"
            )
        if args.csv:
            _write_summary(rows, args.csv)
        return 0

    return 2  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Experiment CLI: a registry of seeded, CSV-emitting experiments covering
forward/backward stability, polynomial growth, moment gaps, random linear
systems and bound audits at desk scale.

Each experiment fans its trials out over a worker pool (LANCZOS_LAB_THREADS
caps the size; every trial is internally single-threaded and seeded as
seed_base + trial, so results do not depend on the pool).  Rows are written in
a fixed long format: experiment, seed, n_or_k, quantity, value, precision,
status.  Exit codes: 0 success, 2 configuration error, 3 divergent-run quota
exceeded.
"""

from __future__ import annotations

import argparse
import dataclasses
import enum
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import __version__, krylov, lanczos, measures, orthopoly, stability
from .ensembles import sample_covariance, sample_goe
from .lanczos import DivergentRunError, LanczosOptions, run_lanczos
from .measures import SemicircleMeasure
from .scalars import Precision


class Experiment(enum.Enum):
    COEFF_FORWARD_ERROR = "coeff-forward-error"
    BACKWARD_RECONSTRUCTION = "backward-reconstruction"
    POLY_GROWTH = "poly-growth"
    MOMENT_GAPS = "moment-gaps"
    CG_RANDOM_SYSTEMS = "cg-random-systems"
    BOUND_AUDIT = "bound-audit"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment
    n: int = 2000
    k: int = 36
    d: float = 0.2
    precisions: Tuple[str, ...] = ("low32",)
    trials: int = 1
    seed_base: int = 1
    output_dir: str = "results"
    entry_dist: str = "gaussian"
    plots: bool = False
    divergent_quota: Optional[int] = None

    def validate(self) -> None:
        if self.trials < 1:
            raise ValueError("config field 'trials' must be >= 1")
        if self.k < 1:
            raise ValueError("config field 'k' must be >= 1")
        if self.n < 1:
            raise ValueError("config field 'n' must be >= 1")
        if self.experiment is Experiment.CG_RANDOM_SYSTEMS and not (0 < self.d < 1):
            raise ValueError("config field 'd' must be in (0,1)")
        if self.entry_dist not in ("gaussian", "rademacher"):
            raise ValueError("config field 'entry_dist' must be gaussian|rademacher")
        for p in self.precisions:
            Precision.parse(p)


@dataclass
class ResultRow:
    experiment: str
    seed: int
    n_or_k: int
    quantity: str
    value: float
    precision: str
    status: str = "ok"

    def csv(self) -> str:
        return (
            f"{self.experiment},{self.seed},{self.n_or_k},{self.quantity},"
            f"{float(self.value)!r},{self.precision},{self.status}"
        )


def _trial_coeff_forward_error(cfg: ExperimentConfig, seed: int) -> List[ResultRow]:
    problem = sample_goe(cfg.n, seed)
    exact = run_lanczos(
        problem,
        LanczosOptions(k=cfg.k, precision=Precision.EXT128, reorthogonalize=True),
    )
    ea, eb = exact.coefficient_arrays()
    rows: List[ResultRow] = []
    name = cfg.experiment.value
    for ptxt in cfg.precisions:
        prec = Precision.parse(ptxt)
        run = run_lanczos(problem, LanczosOptions(k=cfg.k, precision=prec))
        ra, rb = run.coefficient_arrays()
        m = min(len(ra), len(ea))
        for i in range(m):
            rows += [
                ResultRow(name, seed, i, "alpha_forward_err", abs(ea[i] - ra[i]), ptxt),
                ResultRow(name, seed, i, "beta_forward_err", abs(eb[i] - rb[i]), ptxt),
                ResultRow(name, seed, i, "alpha_limit_dist", abs(ra[i]), ptxt),
                ResultRow(name, seed, i, "beta_limit_dist", abs(rb[i] - 0.5), ptxt),
            ]
    return rows


def _trial_moment_gaps(cfg: ExperimentConfig, seed: int) -> List[ResultRow]:
    problem = sample_goe(cfg.n, seed)
    prec = Precision.parse(cfg.precisions[0])
    run = run_lanczos(problem, LanczosOptions(k=cfg.k, precision=prec))
    mu_N = stability.problem_vesd(problem)
    h = stability.build_h(run, mu_N)
    name = cfg.experiment.value
    return [
        ResultRow(name, seed, n, "moment_gap", g, cfg.precisions[0])
        for n, g in enumerate(np.abs(h.coefficients.to_float()))
    ]


def _trial_backward_reconstruction(cfg: ExperimentConfig, seed: int) -> List[ResultRow]:
    problem = sample_goe(cfg.n, seed)
    prec = Precision.parse(cfg.precisions[0])
    run = run_lanczos(problem, LanczosOptions(k=cfg.k, precision=prec))
    mu_N = stability.problem_vesd(problem)
    h = stability.build_h(run, mu_N)
    bstar = stability.build_b_star(problem, h)
    a_err, b_err = stability.verify_backward(problem, run, bstar.vector)
    name = cfg.experiment.value
    rows = [
        ResultRow(name, seed, 0, "b_star_distance", bstar.distance, cfg.precisions[0]),
        ResultRow(name, seed, 0, "h_sup_on_spectrum", bstar.h_sup_on_spectrum,
                  cfg.precisions[0]),
    ]
    for n in range(len(a_err)):
        rows += [
            ResultRow(name, seed, n, "moment_gap",
                      abs(float(h.coefficients[n])), cfg.precisions[0]),
            ResultRow(name, seed, n, "alpha_star_err", float(a_err[n]), cfg.precisions[0]),
            ResultRow(name, seed, n, "beta_star_err", float(b_err[n]), cfg.precisions[0]),
        ]
    return rows


def _trial_poly_growth(cfg: ExperimentConfig, seed: int) -> List[ResultRow]:
    problem = sample_goe(cfg.n, seed)
    mu_N = stability.problem_vesd(problem)
    basis = orthopoly.stieltjes_jacobi(mu_N, cfg.k + 1)
    sup = orthopoly.sup_norm_all(basis, min(cfg.k, basis.max_degree), (-1.0, 1.0))
    name = cfg.experiment.value
    return [
        ResultRow(name, seed, n, "sup_norm", float(s), "ext128")
        for n, s in enumerate(sup)
    ]


def _trial_cg(cfg: ExperimentConfig, seed: int) -> List[ResultRow]:
    problem = sample_covariance(cfg.n, cfg.d, seed, entry_dist=cfg.entry_dist,
                                b_kind="ones")
    name = cfg.experiment.value
    rows: List[ResultRow] = []
    for ptxt in cfg.precisions:
        prec = Precision.parse(ptxt)
        run = run_lanczos(problem, LanczosOptions(k=cfg.k, precision=prec))
        trace = krylov.solve_trace(problem, run, cfg.d)
        for i in range(len(trace.ks)):
            rows.append(ResultRow(name, seed, int(trace.ks[i]), "a_norm_error",
                                  float(trace.errors[i]), ptxt))
            rows.append(ResultRow(name, seed, int(trace.ks[i]), "limit",
                                  float(trace.limit_curve[i]), ptxt))
        if trace.stagnation_index is not None:
            rows.append(ResultRow(name, seed, trace.stagnation_index,
                                  "stagnation_index", float(trace.stagnation_index),
                                  ptxt))
    return rows


def _trial_bound_audit(cfg: ExperimentConfig, seed: int) -> List[ResultRow]:
    problem = sample_goe(cfg.n, seed)
    prec = Precision.parse(cfg.precisions[0])
    run = run_lanczos(problem, LanczosOptions(k=cfg.k, precision=prec))
    diag = lanczos.measure_diagnostics(problem, run)
    audit = stability.check_cheb_moment_bound(problem, run, diag)
    name = cfg.experiment.value
    rows = [
        ResultRow(name, seed, 0, "eps_lan", diag.eps_lan, cfg.precisions[0]),
        ResultRow(name, seed, 0, "sigma", audit.sigma, cfg.precisions[0]),
        ResultRow(name, seed, 0, "cheb_violations", audit.violations, cfg.precisions[0]),
        ResultRow(name, seed, 0, "vec_violations", audit.vec_violations,
                  cfg.precisions[0]),
    ]
    for i, n in enumerate(audit.n_values):
        rows.append(ResultRow(name, seed, int(n), "cheb_moment_gap",
                              float(audit.lhs[i]), cfg.precisions[0]))
        rows.append(ResultRow(name, seed, int(n), "cheb_moment_bound",
                              float(audit.rhs[i]), cfg.precisions[0]))
    mu_N = stability.problem_vesd(problem)
    lam = problem.eigenvalues()
    halfwidth = max(abs(lam[0]), abs(lam[-1]))
    reg = stability.evaluate_regularity(
        mu_N, SemicircleMeasure(-halfwidth, halfwidth), cfg.k, cfg.n, alpha=1.0 / 3.0
    )
    rows += [
        ResultRow(name, seed, 0, "d_ks", reg.d_ks, cfg.precisions[0]),
        ResultRow(name, seed, 0, "P_vesd_measured", reg.P_vesd_measured,
                  cfg.precisions[0]),
        ResultRow(name, seed, 0, "P_vesd_bound", reg.P_vesd_bound, cfg.precisions[0]),
        ResultRow(name, seed, 0, "regularity_bounds_hold", float(reg.bounds_hold),
                  cfg.precisions[0]),
    ]
    return rows


_TRIALS = {
    Experiment.COEFF_FORWARD_ERROR: _trial_coeff_forward_error,
    Experiment.BACKWARD_RECONSTRUCTION: _trial_backward_reconstruction,
    Experiment.POLY_GROWTH: _trial_poly_growth,
    Experiment.MOMENT_GAPS: _trial_moment_gaps,
    Experiment.CG_RANDOM_SYSTEMS: _trial_cg,
    Experiment.BOUND_AUDIT: _trial_bound_audit,
}


def _run_one(args) -> Tuple[int, List[ResultRow], Optional[str]]:
    cfg_dict, trial = args
    cfg = _config_from_dict(cfg_dict)
    seed = cfg.seed_base + trial
    try:
        return trial, _TRIALS[cfg.experiment](cfg, seed), None
    except DivergentRunError:
        name = cfg.experiment.value
        row = ResultRow(name, seed, 0, "run", float("nan"),
                        cfg.precisions[0], status="divergent")
        return trial, [row], "divergent"


def _pool_size(trials: int) -> int:
    cap = os.environ.get("LANCZOS_LAB_THREADS")
    if cap:
        return max(1, min(trials, int(cap)))
    return max(1, min(trials, os.cpu_count() or 1))


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute all trials, write <out>/<experiment>.csv, a manifest and
    optional SVG plots; returns a summary dict (paths, divergent count)."""
    config.validate()
    started = time.time()
    os.makedirs(config.output_dir, exist_ok=True)
    cfg_dict = _config_to_dict(config)
    jobs = [(cfg_dict, t) for t in range(config.trials)]
    results: List[Optional[List[ResultRow]]] = [None] * config.trials
    divergent = 0
    workers = _pool_size(config.trials)
    if workers == 1:
        outputs = map(_run_one, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        outputs = pool.map(_run_one, jobs)
    for trial, rows, err in outputs:
        results[trial] = rows
        if err == "divergent":
            divergent += 1
    if workers > 1:
        pool.shutdown()

    csv_path = os.path.join(config.output_dir, f"{config.experiment.value}.csv")
    with open(csv_path, "w") as fh:
        fh.write("experiment,seed,n_or_k,quantity,value,precision,status\n")
        for rows in results:
            for row in rows or []:
                fh.write(row.csv() + "\n")

    manifest = {
        "config": cfg_dict,
        "version": _describe_version(),
        "wall_time_s": time.time() - started,
        "divergent_runs": divergent,
    }
    manifest_path = os.path.join(
        config.output_dir, f"{config.experiment.value}.manifest.json"
    )
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)

    plot_paths = []
    if config.plots:
        plot_paths = _emit_plots(config, results)

    quota = config.divergent_quota
    return {
        "csv": csv_path,
        "manifest": manifest_path,
        "plots": plot_paths,
        "divergent": divergent,
        "quota_exceeded": quota is not None and divergent > quota,
    }


def _emit_plots(config: ExperimentConfig, results) -> List[str]:
    from .svgplot import polyline_plot

    by_quantity: dict = {}
    for rows in results:
        for row in rows or []:
            if row.status != "ok" or not np.isfinite(row.value):
                continue
            by_quantity.setdefault(row.quantity, {}).setdefault(row.seed, []).append(
                (row.n_or_k, row.value)
            )
    paths = []
    for quantity, by_seed in by_quantity.items():
        series = []
        for seed, pts in sorted(by_seed.items()):
            pts.sort()
            series.append(
                (f"seed {seed}", [p[0] for p in pts], [p[1] for p in pts])
            )
        vals = [p[1] for _, _, ys in series for p in [(0, y) for y in ys]]
        log_y = bool(vals) and min(vals) > 0 and max(vals) / max(min(vals), 1e-300) > 1e3
        path = os.path.join(
            config.output_dir, f"{config.experiment.value}_{quantity}.svg"
        )
        polyline_plot(series, path, title=quantity, xlabel="n or k",
                      ylabel=quantity, log_y=log_y)
        paths.append(path)
    return paths


def _describe_version() -> str:
    import subprocess

    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        )
        if out.returncode == 0:
            return f"lanczos-lab {__version__} ({out.stdout.strip()})"
    except Exception:
        pass
    return f"lanczos-lab {__version__}"


def _config_to_dict(cfg: ExperimentConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["experiment"] = cfg.experiment.value
    d["precisions"] = list(cfg.precisions)
    return d


def _config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    d["experiment"] = Experiment(d["experiment"])
    d["precisions"] = tuple(d["precisions"])
    return ExperimentConfig(**d)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lanczos-lab",
        description="Seeded Lanczos stability experiments (CSV + optional SVG).",
    )
    parser.add_argument("--experiment", choices=[e.value for e in Experiment])
    parser.add_argument("--n", type=int, help="matrix dimension")
    parser.add_argument("--k", type=int, help="Lanczos iterations")
    parser.add_argument("--d", type=float, help="covariance aspect ratio in (0,1)")
    parser.add_argument("--precision", help="comma list: low32,work64,ext128")
    parser.add_argument("--trials", type=int)
    parser.add_argument("--seed", type=int, help="seed base")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--entry-dist", choices=["gaussian", "rademacher"])
    parser.add_argument("--plots", action="store_true", default=None)
    parser.add_argument("--divergent-quota", type=int)
    parser.add_argument("--config", help="JSON config file; flags override it")
    return parser


def cli_parse(argv: Sequence[str]) -> ExperimentConfig:
    """Flags plus optional JSON config file; flags win.  Raises ValueError on
    invalid configurations (main() maps this to exit code 2)."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    base: dict = {}
    if ns.config:
        with open(ns.config) as fh:
            base = json.load(fh)
    merged = {
        "experiment": ns.experiment or base.get("experiment"),
        "n": ns.n if ns.n is not None else base.get("n", 2000),
        "k": ns.k if ns.k is not None else base.get("k", 36),
        "d": ns.d if ns.d is not None else base.get("d", 0.2),
        "precisions": (
            tuple(ns.precision.split(","))
            if ns.precision
            else tuple(base.get("precisions", ("low32",)))
        ),
        "trials": ns.trials if ns.trials is not None else base.get("trials", 1),
        "seed_base": ns.seed if ns.seed is not None else base.get("seed_base", 1),
        "output_dir": ns.out or base.get("output_dir", "results"),
        "entry_dist": ns.entry_dist or base.get("entry_dist", "gaussian"),
        "plots": ns.plots if ns.plots is not None else base.get("plots", False),
        "divergent_quota": (
            ns.divergent_quota
            if ns.divergent_quota is not None
            else base.get("divergent_quota")
        ),
    }
    if not merged["experiment"]:
        raise ValueError("--experiment is required (or provide it in --config)")
    merged["experiment"] = Experiment(merged["experiment"])
    cfg = ExperimentConfig(**merged)
    cfg.validate()
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = cli_parse(argv)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        build_parser().print_usage(sys.stderr)
        return 2
    summary = run_experiment(cfg)
    print(f"wrote {summary['csv']}")
    for p in summary["plots"]:
        print(f"wrote {p}")
    if summary["quota_exceeded"]:
        print(
            f"divergent-run quota exceeded ({summary['divergent']} divergent)",
            file=sys.stderr,
        )
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

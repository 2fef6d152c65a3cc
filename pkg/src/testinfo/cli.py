"""Command-line front end.

Subcommands wrap the library's experiment drivers and write plot-ready CSV or
JSON tables.  Configuration is a flat INI file with sectioned headers; every
key has a documented default, unknown keys are rejected, and rerunning a
command with the same config and seed produces byte-identical outputs.

Exit codes: 0 on success, 1 on a computation failure (with a machine-readable
error record on stderr), 2 on invalid configuration.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import criteria as crit
from .errors import DomainError, TestInfoError
from .evidence import EvidenceFunction, evidence_from_config
from .lightcurve import FollowupConfig, run_followup_experiment
from .models import (BinaryRegressionModel, Design, LinearGaussianModel,
                     write_design_csv)
from .optimizer import CandidateGrid, exchange_optimize
from .sequential import SequentialStudyConfig, run_sequential_study


class ConfigError(Exception):
    """Invalid or incomplete run configuration."""


# -- config parsing helpers ---------------------------------------------------

def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.replace(";", ",").split(",") if v.strip()])
    except ValueError as exc:
        raise ConfigError(f"cannot parse vector {text!r}") from exc


def _parse_matrix(text: str, dim: int) -> np.ndarray:
    text = text.strip()
    if text.startswith("scaled-identity:"):
        return float(text.split(":", 1)[1]) * np.eye(dim)
    if text.startswith("diag:"):
        d = _parse_vector(text.split(":", 1)[1])
        if d.size != dim:
            raise ConfigError(f"diagonal length {d.size} does not match dimension {dim}")
        return np.diag(d)
    rows = [r for r in text.split(";") if r.strip()]
    mat = np.array([[float(v) for v in row.split()] for row in rows])
    if mat.shape != (dim, dim):
        raise ConfigError(f"matrix shape {mat.shape} does not match dimension {dim}")
    return mat


def _parse_grid(text: str) -> np.ndarray:
    if text.startswith("linspace:"):
        lo, hi, num = text.split(":", 1)[1].split(",")
        return np.linspace(float(lo), float(hi), int(num))
    return _parse_vector(text)


_SECTION_KEYS = {
    "problem": {"family", "sigma2", "null", "alt_mean", "alt_cov", "prior0",
                "eta", "cov", "null_link", "alt_link"},
    "design": {"points", "replications", "basis", "box"},
    "criteria": {"names", "engine", "evidence_prior0", "draws", "inner_draws",
                 "size", "outer_draws", "calibration_draws"},
    "optimize": {"criterion", "grid", "n_points", "replications", "restarts",
                 "passes", "evidence_prior0", "engine", "draws", "inner_draws"},
    "sequential": {"scenario", "constrained", "procedures", "beta_draws",
                   "datasets_per_beta", "grid_size", "p_inner_draws"},
    "theorem1": {"evidence", "prior0", "deltas", "theta_obs", "n_obs", "n_mis",
                 "sigma2", "draws"},
    "appendix-b": {"pi0", "pi1", "alpha", "beta1", "beta2"},
    "lightcurve": {"n_stars", "n_stages", "methods", "candidates_per_stage",
                   "inner_draws"},
}


def _load_config(path, needed_sections) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path} not found or unreadable")
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        unknown = set(parser[section]) - _SECTION_KEYS[section]
        if unknown:
            raise ConfigError(
                f"unknown keys in [{section}]: {', '.join(sorted(unknown))}")
    for section in needed_sections:
        if section not in parser:
            raise ConfigError(f"missing required config section [{section}]")
    return parser


def _design_from_config(cfg, section: str = "design") -> Design:
    if section not in cfg:
        raise ConfigError(f"missing required config section [{section}]")
    sec = cfg[section]
    if "points" not in sec:
        raise ConfigError("[design] needs a 'points' key")
    points = _parse_vector(sec["points"])
    reps_text = sec.get("replications", "1")
    reps = _parse_vector(reps_text).astype(int)
    reps = int(reps[0]) if reps.size == 1 else reps
    basis = sec.get("basis", "intercept-slope")
    box = tuple(_parse_vector(sec.get("box", "-1,1")))
    return Design(points, reps, basis, box)


def _problem_from_config(cfg, design: Design):
    if "problem" not in cfg:
        raise ConfigError("missing required config section [problem]")
    sec = cfg["problem"]
    family = sec.get("family", "linear-gaussian")
    prior0 = float(sec.get("prior0", "0.5"))
    if family == "linear-gaussian":
        for key in ("null", "alt_mean"):
            if key not in sec:
                raise ConfigError(f"[problem] needs '{key}' for the linear-gaussian family")
        null = _parse_vector(sec["null"])
        eta = _parse_vector(sec["alt_mean"])
        R = _parse_matrix(sec.get("alt_cov", "scaled-identity:1.0"), null.size)
        model = LinearGaussianModel(design, float(sec.get("sigma2", "1.0")),
                                    null, eta, R)
        return model.problem(prior0)
    if family == "binary":
        if "eta" not in sec:
            raise ConfigError("[problem] needs 'eta' for the binary family")
        eta = _parse_vector(sec["eta"])
        R = _parse_matrix(sec.get("cov", "scaled-identity:1.0"), eta.size)
        return BinaryRegressionModel.link_choice_problem(
            design, eta, R, prior0,
            null_link=sec.get("null_link", "cloglog"),
            alt_link=sec.get("alt_link", "probit"))
    raise ConfigError(f"unknown model family {family!r}")


# -- output writing -----------------------------------------------------------

def _write_table(out_dir: Path, name: str, header, rows, fmt: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        path = out_dir / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    else:
        path = out_dir / f"{name}.json"
        records = [dict(zip(header, row)) for row in rows]
        with open(path, "w") as fh:
            json.dump(records, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return path


def _write_json(out_dir: Path, name: str, payload) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.json"
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# -- subcommands ---------------------------------------------------------------

def cmd_criteria(args) -> int:
    cfg = _load_config(args.config, ["problem", "design", "criteria"])
    design = _design_from_config(cfg)
    problem = _problem_from_config(cfg, design)
    sec = cfg["criteria"]
    names = [n.strip() for n in sec.get("names", "tk").split(",") if n.strip()]
    engine = sec.get("engine", "exact")
    draws = args.draws or int(sec.get("draws", "10000"))
    inner = int(sec.get("inner_draws", "1000"))
    prior0 = float(sec.get("evidence_prior0", "0.5"))
    rows = []
    for name in names:
        if name == "tk":
            h1 = problem.hyp1
            est = crit.tk_closed_form(design.matrix(), problem.hyp0.beta_mean,
                                      h1.beta_mean, h1.beta_cov_scale,
                                      h1.noise_variance)
        elif name == "d":
            h1 = problem.hyp1
            est = crit.d_criterion(design.matrix(), h1.beta_cov_scale,
                                   h1.noise_variance)
        elif name in ("expected-tk", "expected-p"):
            v = (EvidenceFunction("log") if name == "expected-tk"
                 else EvidenceFunction("posterior-prior-ratio", prior0=prior0))
            est = crit.expected_test_info(problem, v, engine=engine,
                                          draw_count=draws, inner_draws=inner,
                                          seed=args.seed)
        elif name == "boxhill":
            est = crit.box_hill(problem, engine=engine, draw_count=draws,
                                inner_draws=inner, seed=args.seed)
        elif name == "power":
            est = crit.prior_mean_power(
                problem, size=float(sec.get("size", "0.05")),
                outer_draws=int(sec.get("outer_draws", "200")),
                calibration_draws=int(sec.get("calibration_draws", "2000")),
                seed=args.seed)
        else:
            raise ConfigError(f"unknown criterion name {name!r}")
        rows.append([name, repr(est.value), repr(est.standard_error),
                     est.draws, args.seed])
    path = _write_table(Path(args.out), "criteria",
                        ["criterion", "value", "se", "draws", "seed"],
                        rows, args.format)
    print(path)
    return 0


def _optimizer_criterion(name: str, problem, sec, seed_default: int):
    prior0 = float(sec.get("evidence_prior0", "0.5"))
    engine = sec.get("engine", "exact")
    draws = int(sec.get("draws", "2000"))
    inner = int(sec.get("inner_draws", "500"))
    h0, h1 = problem.hyp0, problem.hyp1
    if name == "tk":
        return lambda d, s: crit.tk_closed_form(d.matrix(), h0.beta_mean,
                                                h1.beta_mean, h1.beta_cov_scale,
                                                h1.noise_variance)
    if name == "d":
        return lambda d, s: crit.d_criterion(d.matrix(), h1.beta_cov_scale,
                                             h1.noise_variance)
    if name in ("expected-tk", "expected-p"):
        v = (EvidenceFunction("log") if name == "expected-tk"
             else EvidenceFunction("posterior-prior-ratio", prior0=prior0))
        return lambda d, s: crit.expected_test_info(
            problem, v, design=d, engine=engine, draw_count=draws,
            inner_draws=inner, seed=s)
    if name == "boxhill":
        return lambda d, s: crit.box_hill(problem, design=d, engine=engine,
                                          draw_count=draws, inner_draws=inner,
                                          seed=s)
    raise ConfigError(f"unknown optimize criterion {name!r}")


def cmd_optimize(args) -> int:
    cfg = _load_config(args.config, ["problem", "design", "optimize"])
    design = _design_from_config(cfg)
    problem = _problem_from_config(cfg, design)
    sec = cfg["optimize"]
    grid_points = _parse_grid(sec.get("grid", "linspace:-1,1,21"))
    if grid_points.size == 0:
        raise ConfigError("optimize grid is empty")
    reps = int(sec.get("replications", "1"))
    grid = CandidateGrid(grid_points, reps, design.basis, design.box)
    criterion = _optimizer_criterion(sec.get("criterion", "tk"), problem, sec,
                                     args.seed)
    result = exchange_optimize(criterion, grid,
                               n_points=int(sec.get("n_points", "5")),
                               max_passes=int(sec.get("passes", "20")),
                               seed=args.seed,
                               n_restarts=int(sec.get("restarts", "5")))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_design_csv(result.design, out_dir / "design.csv")
    _write_table(out_dir, "trace", ["pass", "candidate", "value", "se"],
                 [[p, repr(c), repr(v), repr(se)] for p, c, v, se in result.accepted_moves],
                 "csv")
    _write_json(out_dir, "optimize", {
        "criterion": sec.get("criterion", "tk"),
        "value": result.criterion_value.value,
        "se": result.criterion_value.standard_error,
        "iterations": result.iterations,
        "points": [float(p) for p in result.design.points],
        "seed": args.seed,
    })
    print(out_dir / "design.csv")
    return 0


def cmd_sequential(args) -> int:
    cfg = _load_config(args.config, ["sequential"])
    sec = cfg["sequential"]
    config = SequentialStudyConfig(
        scenario=sec.get("scenario", "parabola"),
        beta_draws=int(sec.get("beta_draws", "20")),
        datasets_per_beta=int(sec.get("datasets_per_beta", "50")),
        grid_size=int(sec.get("grid_size", "21")),
        p_inner_draws=int(sec.get("p_inner_draws", "500")),
    )
    procedures = [p.strip() for p in sec.get("procedures", "P,TK,D").split(",")]
    constrained = sec.get("constrained", "false").lower() in ("true", "1", "yes")
    results = run_sequential_study(config, procedures, constrained, args.seed)
    rows = [r.to_csv_row() for r in results]
    path = _write_table(Path(args.out), "study",
                        ["procedure", "scenario", "constrained", "power", "se",
                         "frac_design_i"], rows, args.format)
    print(path)
    return 0


def cmd_theorem1(args) -> int:
    cfg = _load_config(args.config, ["theorem1"])
    sec = cfg["theorem1"]
    kind = sec.get("evidence", "log")
    prior0 = sec.get("prior0", None)
    v = evidence_from_config(kind, prior0=float(prior0) if prior0 else None)
    deltas = _parse_vector(sec.get("deltas", "0.2,0.1,0.05"))
    rows = crit.theorem1_check(
        theta_obs=float(sec.get("theta_obs", "0.0")), deltas=deltas, v=v,
        draw_count=args.draws or int(sec.get("draws", "100000")),
        seed=args.seed, n_obs=int(sec.get("n_obs", "5")),
        n_mis=int(sec.get("n_mis", "5")),
        noise_variance=float(sec.get("sigma2", "1.0")))
    table = [[repr(r.delta), repr(r.numeric_fraction), repr(r.analytic_fraction),
              repr(r.abs_error)] for r in rows]
    path = _write_table(Path(args.out), "theorem1",
                        ["delta", "numeric", "analytic", "abs_error"],
                        table, args.format)
    print(path)
    return 0


def cmd_appendix_b(args) -> int:
    cfg = _load_config(args.config, ["appendix-b"]) if args.config else None
    kwargs = {}
    if cfg is not None and "appendix-b" in cfg:
        sec = cfg["appendix-b"]
        for key in ("pi0", "pi1", "alpha", "beta1", "beta2"):
            if key in sec:
                kwargs[key] = float(sec[key])
    report = crit.appendix_b_example(**kwargs)
    payload = {
        "inputs": report.inputs,
        "phi_bh": report.phi_bh,
        "phi_p": report.phi_p,
        "correct_prob": report.correct_prob,
        "expected_true_posterior": report.expected_true_posterior,
        "flags": report.flags,
    }
    path = _write_json(Path(args.out), "appendix_b", payload)
    print(path)
    return 0


def cmd_lightcurve(args) -> int:
    cfg = _load_config(args.config, ["lightcurve"])
    sec = cfg["lightcurve"]
    methods = tuple(m.strip() for m in
                    sec.get("methods", "oracle,testinfo,boxhill,random").split(","))
    config = FollowupConfig(
        n_stars=int(sec.get("n_stars", "60")),
        n_stages=int(sec.get("n_stages", "30")),
        per_stage_candidates=int(sec.get("candidates_per_stage", "3")),
        methods=methods,
        inner_draws=int(sec.get("inner_draws", "64")),
    )
    result = run_followup_experiment(config, seed=args.seed)
    path = _write_table(Path(args.out), "followup",
                        ["stage", "method", "correct_count"],
                        result.to_rows(), args.format)
    _write_json(Path(args.out), "followup_summary", {
        "n_tracked": result.n_tracked,
        "n_stars": result.n_stars,
        "oracle_match_rate": result.oracle_match_rate,
        "boxhill_match_rate": result.boxhill_match_rate,
        "seed": args.seed,
    })
    print(path)
    return 0


_COMMANDS = {
    "criteria": cmd_criteria,
    "optimize": cmd_optimize,
    "sequential": cmd_sequential,
    "theorem1": cmd_theorem1,
    "appendix-b": cmd_appendix_b,
    "lightcurve": cmd_lightcurve,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="testinfo",
        description="Test-information criteria and design search for two-hypothesis experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} command")
        p.add_argument("--config", required=(name != "appendix-b"),
                       help="INI config file")
        p.add_argument("--seed", type=int, default=0, help="root RNG seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--draws", type=int, default=None,
                       help="override the configured Monte Carlo draw count")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, DomainError, configparser.Error,
            FileNotFoundError) as exc:
        # invalid or incomplete run configuration (bad values included)
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TestInfoError as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

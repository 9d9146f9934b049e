"""Experiment orchestration: config parsing, dispatch, CSV/JSON output.

Subcommands: ``roc``, ``lowdeg-norm``, ``envelope``, ``witness``, ``diag``.
Configuration comes from flags and/or a JSON config file (flags override the
file); a seed is always required so no run carries implicit entropy. Every
run writes its results file plus a manifest (config echo, config digest,
version, wall time, tolerances, output digests) next to it.

Exit codes: 0 success, 1 usage error, 2 numerical-guard error
(MarginTooSmall / DegenerateDenominator).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats as sstats

from . import __version__
from .errors import DegenerateDenominator, InvalidPrior, MarginTooSmall, UsageError
from .lowdeg import (
    INF_DEGREE,
    ldr_norm_enumerate_rademacher,
    ldr_norm_exact_rademacher,
    ldr_norm_limit,
    ldr_norm_mc,
    overlap_statistics,
)
from .priors import SpikePrior, finite_atoms, rademacher, sparse_rademacher
from .roc import (
    PhiCurve,
    RocPolyline,
    discretize_envelope,
    perturb_points,
    pushout_check,
    upper_concave_envelope,
    val_piecewise,
)
from .spectral import calibrate_null, empirical_roc, make_test, top_eigenvalue_diag
from .witness import build_witness, evaluate_witness

SUBCOMMANDS = ("roc", "lowdeg-norm", "envelope", "witness", "diag")

# numerical knobs echoed into every run manifest
TOLERANCES = {
    "clip_eps": 1e-12,
    "quad_tol_squared_value": 1e-4,
    "tangency_alpha_tol": 1e-10,
    "prior_invariant_atol": 1e-12,
}


@dataclass
class ExperimentConfig:
    subcommand: str
    seed: int
    lam: float
    n: int
    trials: int
    out: str
    prior: dict = field(default_factory=lambda: {"kind": "rademacher"})
    degree: float | int | None = None
    method: str = "binomial_sum"
    alpha_grid: list = field(default_factory=lambda: [round(0.1 * k, 1) for k in range(1, 10)])
    calib_trials: int = 2000
    alpha_star: float | None = None
    beta_star: float | None = None
    eps_budget: float | None = None
    gamma_u: float = 0.05
    gamma_v: float = 0.02
    r: int = 6
    choice: str = "lower"
    overlap_draws: int = 0
    workers: int | None = None

    def echo(self) -> dict:
        d = asdict(self)
        d["degree"] = _degree_str(self.degree) if self.degree is not None else None
        return d


def _degree_str(degree) -> str:
    return "inf" if degree == INF_DEGREE else str(int(degree))


def _parse_degree(text: str):
    if text.strip().lower() in ("inf", "infinity"):
        return INF_DEGREE
    try:
        return int(text)
    except ValueError as exc:
        raise UsageError(f"degree: expected an integer or 'inf', got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swrl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON config file; flags override")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--lambda", dest="lam", type=float, default=None)
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--prior", type=str, default=None, choices=("rademacher", "sparse", "atoms"))
        p.add_argument("--rho", type=float, default=None)
        p.add_argument("--values", type=str, default=None)
        p.add_argument("--probs", type=str, default=None)
        if name == "roc":
            p.add_argument("--alpha-grid", dest="alpha_grid", type=str, default=None)
            p.add_argument("--calib-trials", dest="calib_trials", type=int, default=None)
        if name == "lowdeg-norm":
            p.add_argument("--degree", type=str, default=None)
            p.add_argument(
                "--method",
                type=str,
                default=None,
                choices=("binomial_sum", "monte_carlo", "exact_enum"),
            )
        if name == "envelope":
            p.add_argument("--alpha-star", dest="alpha_star", type=float, default=None)
            p.add_argument("--beta-star", dest="beta_star", type=float, default=None)
            p.add_argument("--eps", dest="eps_budget", type=float, default=None)
            p.add_argument("--gamma-u", dest="gamma_u", type=float, default=None)
            p.add_argument("--gamma-v", dest="gamma_v", type=float, default=None)
        if name == "witness":
            p.add_argument("--r", type=int, default=None)
            p.add_argument("--choice", type=str, default=None, choices=("lower", "upper", "midpoint"))
            p.add_argument("--calib-trials", dest="calib_trials", type=int, default=None)
            p.add_argument("--gamma-v", dest="gamma_v", type=float, default=None)
        if name == "diag":
            p.add_argument("--overlap-draws", dest="overlap_draws", type=int, default=None)
    return parser


_DEFAULTS = {
    "trials": 2000,
    "out": "swrl_out",
    "prior": {"kind": "rademacher"},
    "degree": None,
    "method": "binomial_sum",
    "alpha_grid": [round(0.1 * k, 1) for k in range(1, 10)],
    "calib_trials": 2000,
    "alpha_star": None,
    "beta_star": None,
    "eps_budget": None,
    "gamma_u": 0.05,
    "gamma_v": 0.02,
    "r": 6,
    "choice": "lower",
    "overlap_draws": 0,
    "workers": None,
}


def parse_config(argv) -> ExperimentConfig:
    """Merge flags over an optional JSON config file and validate."""
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        raise UsageError("invalid arguments (see --help)") from exc
    if ns.subcommand is None:
        raise UsageError(f"subcommand: choose one of {', '.join(SUBCOMMANDS)}")

    file_cfg: dict = {}
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"config: cannot read {ns.config!r} ({exc})") from exc

    def pick(name, flag_value):
        if flag_value is not None:
            return flag_value
        if name in file_cfg:
            return file_cfg[name]
        return _DEFAULTS.get(name)

    if ns.prior is None and isinstance(file_cfg.get("prior"), dict):
        prior_cfg = dict(file_cfg["prior"])
    elif ns.prior in (None, "rademacher"):
        prior_cfg = {"kind": "rademacher"}
    elif ns.prior == "sparse":
        rho = pick("rho", ns.rho)
        if rho is None:
            raise UsageError("rho: required for the sparse prior")
        prior_cfg = {"kind": "sparse", "rho": float(rho)}
    else:
        values, probs = pick("values", ns.values), pick("probs", ns.probs)
        if values is None or probs is None:
            raise UsageError("values/probs: required for the atoms prior")
        if isinstance(values, str):
            values = _float_list(values)
        if isinstance(probs, str):
            probs = _float_list(probs)
        prior_cfg = {"kind": "atoms", "values": values, "probs": probs}

    alpha_grid = pick("alpha_grid", getattr(ns, "alpha_grid", None))
    if isinstance(alpha_grid, str):
        alpha_grid = _float_list(alpha_grid)

    degree = getattr(ns, "degree", None)
    if degree is not None:
        degree = _parse_degree(degree)
    elif "degree" in file_cfg and file_cfg["degree"] is not None:
        degree = _parse_degree(str(file_cfg["degree"]))

    seed = pick("seed", ns.seed)
    if seed is None:
        raise UsageError("seed: required (runs carry no implicit entropy)")

    cfg = ExperimentConfig(
        subcommand=ns.subcommand,
        seed=int(seed),
        lam=_require_float("lambda", pick("lambda", ns.lam)),
        n=_require_int("n", pick("n", ns.n)),
        trials=_require_int("trials", pick("trials", ns.trials)),
        out=str(pick("out", ns.out)),
        prior=prior_cfg,
        degree=degree,
        method=str(pick("method", getattr(ns, "method", None))),
        alpha_grid=[float(a) for a in alpha_grid],
        calib_trials=int(pick("calib_trials", getattr(ns, "calib_trials", None))),
        alpha_star=_opt_float(pick("alpha_star", getattr(ns, "alpha_star", None))),
        beta_star=_opt_float(pick("beta_star", getattr(ns, "beta_star", None))),
        eps_budget=_opt_float(pick("eps_budget", getattr(ns, "eps_budget", None))),
        gamma_u=float(pick("gamma_u", getattr(ns, "gamma_u", None))),
        gamma_v=float(pick("gamma_v", getattr(ns, "gamma_v", None))),
        r=int(pick("r", getattr(ns, "r", None))),
        choice=str(pick("choice", getattr(ns, "choice", None))),
        overlap_draws=int(pick("overlap_draws", getattr(ns, "overlap_draws", None))),
        workers=pick("workers", ns.workers),
    )
    _validate(cfg)
    return cfg


def _require_float(name, value) -> float:
    if value is None:
        raise UsageError(f"{name}: required")
    return float(value)


def _require_int(name, value) -> int:
    if value is None:
        raise UsageError(f"{name}: required")
    return int(value)


def _opt_float(value):
    return None if value is None else float(value)


def _validate(cfg: ExperimentConfig) -> None:
    if not 0.0 <= cfg.lam <= 5.0:
        raise UsageError(f"lambda: must be in [0, 5], got {cfg.lam}")
    if not 2 <= cfg.n <= 10**4:
        raise UsageError(f"n: must be in [2, 10^4], got {cfg.n}")
    if not 100 <= cfg.trials <= 10**7:
        raise UsageError(f"trials: must be in [10^2, 10^7], got {cfg.trials}")
    if cfg.subcommand in ("roc", "lowdeg-norm", "envelope", "witness"):
        if not 0.0 < cfg.lam < 1.0:
            raise UsageError(f"lambda: subcommand '{cfg.subcommand}' requires 0 < lambda < 1")
    if cfg.subcommand == "roc":
        if not all(0.0 < a < 1.0 for a in cfg.alpha_grid):
            raise UsageError("alpha_grid: entries must lie in (0, 1)")
    if cfg.subcommand == "lowdeg-norm":
        if cfg.degree is None:
            raise UsageError("degree: required for lowdeg-norm (integer or 'inf')")
        if cfg.method == "monte_carlo" and cfg.trials < 1000:
            raise UsageError("trials: monte_carlo needs >= 10^3 trials")
    if cfg.subcommand == "envelope":
        if cfg.alpha_star is None or cfg.beta_star is None:
            raise UsageError("alpha_star/beta_star: required for envelope")
    if cfg.subcommand == "witness" and not 1 <= cfg.r <= 20:
        raise UsageError(f"r: must be in [1, 20], got {cfg.r}")
    if cfg.subcommand == "diag" and cfg.overlap_draws:
        if not 0.0 < cfg.lam < 1.0:
            raise UsageError("lambda: overlap diagnostics require 0 < lambda < 1")
    try:
        make_prior(cfg.prior)
    except InvalidPrior as exc:
        raise UsageError(f"prior: {exc}") from exc


def make_prior(prior_cfg: dict) -> SpikePrior:
    kind = prior_cfg.get("kind", "rademacher")
    if kind == "rademacher":
        return rademacher()
    if kind == "sparse":
        return sparse_rademacher(float(prior_cfg["rho"]))
    if kind == "atoms":
        return finite_atoms(prior_cfg["values"], prior_cfg["probs"])
    raise UsageError(f"prior: unknown kind {kind!r}")


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(cell) for cell in row) for row in rows]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        digest.update(fh.read())
    return digest.hexdigest()


def config_digest(cfg: ExperimentConfig) -> str:
    canon = json.dumps(cfg.echo(), sort_keys=True).encode("utf-8")
    return hashlib.sha256(canon).hexdigest()


def _write_manifest(cfg: ExperimentConfig, result_path: str, wall_time: float) -> str:
    manifest = {
        "config": cfg.echo(),
        "config_digest": config_digest(cfg),
        "tool_version": __version__,
        "wall_time_s": wall_time,
        "tolerances": TOLERANCES,
        "outputs": {result_path: _sha256(result_path)},
    }
    path = result_path + ".manifest.json"
    _write_json(path, manifest)
    return path


def _run_roc(cfg: ExperimentConfig) -> str:
    prior = make_prior(cfg.prior)
    run_result = empirical_roc(
        cfg.lam,
        cfg.n,
        cfg.trials,
        cfg.alpha_grid,
        cfg.seed,
        prior=prior,
        calib_trials=cfg.calib_trials,
        workers=cfg.workers,
    )
    path = cfg.out + ".csv"
    _write_csv(
        path,
        ["alpha_target", "alpha_hat", "beta_hat", "se_alpha", "se_beta", "phi_lambda_alpha"],
        [
            [r.alpha_target, r.alpha_hat, r.beta_hat, r.se_alpha, r.se_beta, r.phi_lambda_alpha]
            for r in run_result.points
        ],
    )
    return path


def _run_lowdeg(cfg: ExperimentConfig) -> str:
    prior = make_prior(cfg.prior)
    if cfg.method == "binomial_sum":
        est = ldr_norm_exact_rademacher(cfg.n, cfg.lam, cfg.degree)
    elif cfg.method == "exact_enum":
        est = ldr_norm_enumerate_rademacher(cfg.n, cfg.lam, cfg.degree)
    else:
        est = ldr_norm_mc(prior, cfg.n, cfg.lam, cfg.degree, cfg.trials, cfg.seed, cfg.workers)
    path = cfg.out + ".csv"
    _write_csv(
        path,
        ["n", "lambda", "D", "method", "value", "stderr", "limit_value"],
        [[cfg.n, cfg.lam, _degree_str(cfg.degree), est.method, est.value, est.stderr, ldr_norm_limit(cfg.lam) ** 2]],
    )
    return path


def _run_envelope(cfg: ExperimentConfig) -> str:
    env = upper_concave_envelope(cfg.lam, (cfg.alpha_star, cfg.beta_star))
    val_psi, val_phi, _ = pushout_check(env)
    eps = cfg.eps_budget if cfg.eps_budget is not None else val_psi**2 - val_phi**2
    u = discretize_envelope(env, eps, cfg.gamma_u)
    v = perturb_points(u, cfg.gamma_v)
    path = cfg.out + ".json"
    _write_json(
        path,
        {
            "A1": env.touch_lo,
            "A2": env.touch_hi,
            "val_phi": val_phi,
            "val_psi": val_psi,
            "val_conc_u": val_piecewise(u),
            "val_conc_v": val_piecewise(v),
            "points_u": u.points.tolist(),
            "points_v": v.points.tolist(),
        },
    )
    return path


def witness_polyline(
    lam: float, r: int, gamma_v: float, alpha_lo: float = 0.05, alpha_hi: float = 0.85
) -> RocPolyline:
    """Default witness target: r-1 interior points on the ROC curve, spaced
    uniformly in the parametric coordinate, then lowered strictly below it."""
    if r == 1:
        return RocPolyline(np.array([[0.0, 0.0], [1.0, 1.0]]))
    curve = PhiCurve(lam)
    taus = np.linspace(curve.tau_of_alpha(alpha_lo), curve.tau_of_alpha(alpha_hi), r - 1)
    pts = [(0.0, 0.0)]
    pts += [(float(curve.alpha_of_tau(t)), float(curve.beta_of_tau(t))) for t in taus]
    pts.append((1.0, 1.0))
    return perturb_points(RocPolyline(np.array(pts)), gamma_v)


def _run_witness(cfg: ExperimentConfig) -> str:
    prior = make_prior(cfg.prior)
    v = witness_polyline(cfg.lam, cfg.r, cfg.gamma_v)
    wfn = build_witness(v, cfg.choice)
    calib = calibrate_null(cfg.lam, cfg.n, cfg.calib_trials, cfg.seed, cfg.workers)
    targets = [0.0, *v.alphas[1:-1].tolist(), 1.0]
    tests = [make_test(cfg.lam, cfg.n, a, calib) for a in targets]
    result = evaluate_witness(wfn, tests, cfg.lam, cfg.n, cfg.trials, cfg.seed, prior, cfg.workers)
    path = cfg.out + ".json"
    _write_json(
        path,
        {
            "lambda": cfg.lam,
            "n": cfg.n,
            "r": cfg.r,
            "val_conc_v": result.val_conc_v,
            "R_hat": result.r_hat.value,
            "R_stderr": result.r_hat.stderr,
            "limit": ldr_norm_limit(cfg.lam),
            "monotone_fraction": result.monotone_fraction,
        },
    )
    return path


def _run_diag(cfg: ExperimentConfig) -> str:
    prior = make_prior(cfg.prior)
    mean_top = top_eigenvalue_diag(cfg.lam, cfg.n, cfg.trials, cfg.seed, prior, cfg.workers)
    expected = cfg.lam + 1.0 / cfg.lam if cfg.lam > 1.0 else 2.0
    payload = {
        "lambda": cfg.lam,
        "n": cfg.n,
        "trials": cfg.trials,
        "mean_top_eigenvalue": mean_top,
        "bbp_prediction": expected,
    }
    if cfg.overlap_draws:
        draws = overlap_statistics(prior, cfg.n, cfg.lam, cfg.overlap_draws, cfg.seed, cfg.workers)
        ks = sstats.kstest(draws, lambda a: sstats.chi2(1).cdf(2.0 * a / cfg.lam**2))
        payload["overlap_draws"] = cfg.overlap_draws
        payload["overlap_ks_to_limit"] = float(ks.statistic)
    path = cfg.out + ".json"
    _write_json(path, payload)
    return path


_RUNNERS = {
    "roc": _run_roc,
    "lowdeg-norm": _run_lowdeg,
    "envelope": _run_envelope,
    "witness": _run_witness,
    "diag": _run_diag,
}


def run(cfg: ExperimentConfig) -> int:
    """Dispatch a validated config; write results and manifest."""
    start = time.perf_counter()
    try:
        result_path = _RUNNERS[cfg.subcommand](cfg)
    except (MarginTooSmall, DegenerateDenominator) as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return 2
    _write_manifest(cfg, result_path, time.perf_counter() - start)
    print(result_path)
    return 0


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

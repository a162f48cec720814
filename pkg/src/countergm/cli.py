"""Command-line front end.

Subcommands: ``fit``, ``simulate``, ``test``, ``diagnose``, ``dist``,
``summary``.  Every artifact records the SHA-256 of the config that
produced it and the seed actually used, so any number in an output file
can be regenerated from the artifact alone.  Exit codes: 0 success,
2 usage/config error, 3 non-convergence, 4 degeneracy abort,
5 natural-parameter-space violation.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .distributions import (
    ParameterSpaceError,
    CmpParams,
    cmp_moments,
    cmp_pmf,
    geometric_log_pmf,
    poisson_log_pmf,
    sqrt_model_log_pmf,
    sqrt_model_tune,
    zmp_pmf,
)
from .inference import (
    DegeneracyError,
    DiagnosticsReport,
    FitResult,
    diagnostics,
    fit_diagnostics,
    mcmc_mle,
    mom_fit,
    monte_carlo_test,
)
from .network import NetworkFormatError, read_attributes, read_edge_list, summary, write_edge_list
from .sampler import sample
from .terms import ConstraintError, ModelError, eval_stats

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_DEGENERATE = 4
EXIT_CONSTRAINT = 5


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _meta(cfg_sha: str, seed) -> dict:
    return {"config_sha256": cfg_sha, "seed": None if seed is None else int(seed)}


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path_or_file, header: list[str], rows, meta: dict) -> None:
    own = not hasattr(path_or_file, "write")
    f = open(path_or_file, "w") if own else path_or_file
    try:
        for k, v in meta.items():
            f.write(f"# {k}={v}\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_csv_cell(v) for v in row) + "\n")
    finally:
        if own:
            f.close()


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON-serializable: {type(o)}")


def _write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")


def _outdir(args) -> Path:
    d = Path(args.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _fit_rows(fit: FitResult) -> list[list]:
    rows = []
    for lab, th, se in zip(fit.labels, fit.theta, fit.std_errors):
        sig = "*" if se > 0 and abs(th) / se > 1.959963984540054 else ""
        rows.append([lab, float(th), float(se), sig])
    return rows


def _emit_fit(fit: FitResult, cfg: RunConfig, args) -> None:
    out = _outdir(args)
    meta = _meta(cfg.sha256, fit.seed)
    payload = {
        **meta,
        "labels": list(fit.labels),
        "theta": fit.theta,
        "std_errors": fit.std_errors,
        "vcov": fit.vcov,
        "vcov_mcmc": fit.vcov_mcmc,
        "observed": fit.observed.values,
        "simulated_mean": fit.sample_stats.mean(axis=0),
        "iterations": fit.iterations,
        "converged": fit.converged,
        "status": fit.status,
        "boundary": list(fit.boundary),
        "loglik_ratio": fit.loglik_ratio,
        "max_discrepancy": fit.max_discrepancy,
        "min_ess": fit.min_ess,
        "acceptance_rate": fit.acceptance_rate,
    }
    _write_json(out / "fit.json", payload)
    rows = _fit_rows(fit)
    if args.format == "csv":
        _write_csv(out / "fit_table.csv", ["term", "estimate", "std_error", "sig_0.05"], rows, meta)
    elif args.format == "json":
        pass  # fit.json is the JSON artifact
    else:
        (out / "fit_table.txt").write_text(
            fit.summary_table()
            + f"\nconfig_sha256: {cfg.sha256}\nseed: {fit.seed}\n"
        )
    report = fit_diagnostics(fit)
    (out / "diagnostics.txt").write_text(
        report.summary() + f"\nconfig_sha256: {cfg.sha256}\nseed: {fit.seed}\n"
    )
    print(fit.summary_table())
    if fit.boundary:
        print("boundary constraints active:")
        for b in fit.boundary:
            print(f"  {b}")
    print(f"artifacts written to {out}")


def _diag_payload(report: DiagnosticsReport, meta: dict) -> dict:
    return {
        **meta,
        "labels": list(report.labels),
        "mean": report.mean,
        "sd": report.sd,
        "ess": report.ess,
        "mcse": report.mcse,
        "observed": report.observed,
        "z": report.z,
        "bimodal": list(report.bimodal),
        "any_bimodal": report.any_bimodal,
        "acceptance_rate": report.acceptance_rate,
    }


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_fit(args) -> int:
    cfg = load_config(args.config, seed=args.seed, threads=args.threads)
    fitter = mcmc_mle if cfg.method == "mcmle" else mom_fit
    fit = fitter(cfg.model, cfg.network, cfg.attrs, cfg.theta0, cfg.fit)
    _emit_fit(fit, cfg, args)
    if not fit.converged:
        print(f"fit did not converge: status={fit.status}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _ensure_seed(ctl):
    """A concrete seed for this run, drawn once if the config gave none.

    Outputs must be reproducible from the artifact alone, so the seed that
    is actually used always gets recorded.
    """
    if ctl.seed is not None:
        return ctl
    fresh = int(np.random.SeedSequence().generate_state(1, np.uint64)[0])
    return ctl.with_seed(fresh)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, seed=args.seed, threads=args.threads)
    if args.theta is not None:
        theta = np.asarray([float(v) for v in args.theta.split(",")])
        if theta.shape != (cfg.model.p,):
            raise ConfigError(
                f"--theta has {theta.size} entries but the model has {cfg.model.p} terms"
            )
    elif cfg.theta is not None:
        theta = cfg.theta
    else:
        raise ConfigError("simulate needs 'theta' in the config or --theta")
    ctl = _ensure_seed(cfg.sampler)
    batch = sample(cfg.model, theta, cfg.network, cfg.attrs, ctl)
    out = _outdir(args)
    meta = _meta(cfg.sha256, ctl.seed)
    meta["theta"] = ",".join(repr(float(v)) for v in theta)
    _write_csv(out / "stats.csv", list(batch.labels), batch.stats.tolist(), meta)
    if args.save_network:
        write_edge_list(
            batch.final_network, out / "network.tsv",
            header_comment=f"config_sha256={cfg.sha256} seed={ctl.seed}",
        )
    print(f"{batch.stats.shape[0]} draws of {batch.stats.shape[1]} statistics "
          f"written to {out / 'stats.csv'} (acceptance rate {batch.acceptance_rate:.3f})")
    return EXIT_OK


def cmd_test(args) -> int:
    cfg = load_config(args.config, seed=args.seed, threads=args.threads)
    if cfg.test_term is None:
        raise ConfigError("test needs a 'test: {term: ...}' block in the config")
    fitter = mcmc_mle if cfg.method == "mcmle" else mom_fit
    null_fit = fitter(cfg.model, cfg.network, cfg.attrs, cfg.theta0, cfg.fit)
    if not null_fit.converged:
        print(f"null fit did not converge: status={null_fit.status}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    # the test stage gets its own stream, derived from the fit's master seed
    # so the whole run replays from one recorded number
    test_seed = int(
        np.random.SeedSequence(entropy=null_fit.seed, spawn_key=(2**20,))
        .generate_state(1, np.uint64)[0]
    )
    result = monte_carlo_test(
        cfg.model, null_fit, cfg.test_term, cfg.network, cfg.attrs,
        nsim=cfg.test_nsim, control=cfg.sampler.with_seed(test_seed),
    )
    out = _outdir(args)
    meta = _meta(cfg.sha256, null_fit.seed)
    qs = result.quantiles()
    payload = {
        **meta,
        "term": result.term_label,
        "observed": result.observed,
        "p_value": result.p_value,
        "nsim": result.nsim,
        "simulated_quantiles": {str(q): v for q, v in qs.items()},
        "null_theta": null_fit.theta,
        "null_labels": list(null_fit.labels),
    }
    _write_json(out / "test.json", payload)
    if args.format == "csv":
        _write_csv(
            out / "test.csv",
            ["term", "observed", "p_value", "nsim"],
            [[result.term_label, result.observed, result.p_value, result.nsim]],
            meta,
        )
    lines = [
        f"Monte Carlo test of {result.term_label!r} against the fitted null",
        f"  observed value : {result.observed:.4f}",
        f"  simulated      : " + ", ".join(f"q{int(q*100):02d}={v:.2f}" for q, v in qs.items()),
        f"  one-sided p    : {result.p_value:.4g}  ({result.nsim} draws)",
    ]
    print("\n".join(lines))
    return EXIT_OK


def cmd_diagnose(args) -> int:
    cfg = load_config(args.config, seed=args.seed, threads=args.threads)
    if cfg.theta is None:
        raise ConfigError("diagnose needs 'theta' in the config")
    ctl = _ensure_seed(cfg.sampler)
    batch = sample(cfg.model, cfg.theta, cfg.network, cfg.attrs, ctl)
    observed = eval_stats(cfg.model, cfg.network, cfg.attrs)
    report = diagnostics(batch, observed)
    out = _outdir(args)
    meta = _meta(cfg.sha256, ctl.seed)
    _write_json(out / "diagnostics.json", _diag_payload(report, meta))
    print(report.summary())
    if report.any_bimodal:
        print("warning: bimodal statistic distribution (degeneracy-like behaviour)",
              file=sys.stderr)
    return EXIT_OK


def _dist_table(args) -> tuple[list[str], np.ndarray, np.ndarray, dict]:
    xs = np.arange(0, args.max + 1)
    extra: dict = {}
    fam = args.family
    if fam == "poisson":
        if args.mean is None or args.mean <= 0:
            raise ConfigError("dist --family poisson needs --mean > 0")
        pmf = np.exp(poisson_log_pmf(args.mean, xs))
    elif fam == "geometric":
        if args.mean is None or args.mean <= 0:
            raise ConfigError("dist --family geometric needs --mean > 0")
        p = 1.0 / (1.0 + args.mean)          # mean (1-p)/p
        pmf = np.exp(geometric_log_pmf(p, xs))
    elif fam == "zmp":
        if args.theta1 is None or args.theta2 is None:
            raise ConfigError("dist --family zmp needs --theta1 and --theta2")
        pmf = zmp_pmf(args.theta1, args.theta2, xs)
    elif fam == "cmp":
        if args.theta1 is None or args.theta2 is None:
            raise ConfigError("dist --family cmp needs --theta1 and --theta2")
        params = CmpParams(args.theta1, args.theta2)
        pmf = cmp_pmf(params, xs)
        extra["mean"], extra["variance"] = cmp_moments(params)
    elif fam == "sqrt":
        if args.theta1 is None:
            raise ConfigError("dist --family sqrt needs --theta1")
        if args.theta2 is not None:
            t2 = args.theta2
        elif args.tune_mean is not None:
            t2 = sqrt_model_tune(args.theta1, args.tune_mean)
            extra["tuned_theta2"] = t2
        else:
            raise ConfigError("dist --family sqrt needs --theta2 or --tune-mean")
        pmf = np.exp(sqrt_model_log_pmf(args.theta1, t2, xs))
    else:  # pragma: no cover - argparse choices guard this
        raise ConfigError(f"unknown family {fam!r}")
    return ["x", "pmf"], xs, np.asarray(pmf, dtype=np.float64), extra


def cmd_dist(args) -> int:
    header, xs, pmf, extra = _dist_table(args)
    meta = {"family": args.family, **extra, "tail_mass": 1.0 - float(pmf.sum())}
    rows = [[int(x), float(v)] for x, v in zip(xs, pmf)]
    if args.output_dir is not None:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "dist.csv", header, rows, meta)
        print(f"written to {out / 'dist.csv'}")
    else:
        _write_csv(sys.stdout, header, rows, meta)
    return EXIT_OK


def cmd_summary(args) -> int:
    if args.config is not None:
        cfg = load_config(args.config)
        net = cfg.network
    elif args.network is not None:
        p = Path(args.network)
        if not p.exists():
            raise ConfigError(f"network file does not exist: {p}")
        net = read_edge_list(p, n=args.nodes, directed=args.directed)
        if args.attributes:
            attrs = read_attributes(args.attributes)
            if attrs.n != net.n:
                raise ConfigError(
                    f"attributes cover {attrs.n} actors but the network has {net.n}"
                )
    else:
        raise ConfigError("summary needs --config or --network")
    s = summary(net)
    payload = {
        "nodes": s.n,
        "directed": s.directed,
        "dyads": s.ndyads,
        "total": s.total,
        "mean_value": s.mean_value,
        "nonzero_density": s.nonzero_density,
        "sd_value": s.sd_value,
        "within_actor_sd": s.within_actor_sd,
        "max_value": s.max_value,
    }
    if args.format == "json":
        print(json.dumps(payload, indent=2, default=_json_default))
    elif args.format == "csv":
        _write_csv(sys.stdout, list(payload), [list(payload.values())], {})
    else:
        width = max(len(k) for k in payload)
        for k, v in payload.items():
            vs = f"{v:.4f}" if isinstance(v, float) else str(v)
            print(f"{k.ljust(width)}  {vs}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="countergm",
        description="Count-valued exponential-family network models: "
                    "fit, simulate, test, diagnose.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="override the config's sampler seed")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for parallel chains")
    common.add_argument("--output-dir", default=".",
                        help="directory for artifacts (default: current)")
    common.add_argument("--format", choices=("csv", "json", "table"),
                        default="table", help="table artifact format")

    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", parents=[common],
                           help="fit the configured model to the configured network")
    p_fit.add_argument("--config", required=True)
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="sample networks and emit their statistics")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--theta", default=None,
                       help="comma-separated coefficients (overrides config theta)")
    p_sim.add_argument("--save-network", action="store_true",
                       help="also write the final sampled network")
    p_sim.set_defaults(func=cmd_simulate)

    p_test = sub.add_parser("test", parents=[common],
                            help="Monte Carlo test of a statistic against the fitted null")
    p_test.add_argument("--config", required=True)
    p_test.set_defaults(func=cmd_test)

    p_diag = sub.add_parser("diagnose", parents=[common],
                            help="sample at a fixed theta and report chain diagnostics")
    p_diag.add_argument("--config", required=True)
    p_diag.set_defaults(func=cmd_diagnose)

    p_dist = sub.add_parser("dist", parents=[common],
                            help="tabulate a dyad-level distribution as plot-ready CSV")
    p_dist.add_argument("--family", required=True,
                        choices=("poisson", "geometric", "zmp", "cmp", "sqrt"))
    p_dist.add_argument("--mean", type=float, default=None)
    p_dist.add_argument("--theta1", type=float, default=None)
    p_dist.add_argument("--theta2", type=float, default=None)
    p_dist.add_argument("--tune-mean", type=float, default=None,
                        help="solve for theta2 giving this mean (sqrt family)")
    p_dist.add_argument("--max", type=int, default=30,
                        help="largest value tabulated (default 30)")
    # dist writes to stdout unless an output directory is explicitly given
    p_dist.set_defaults(func=cmd_dist, output_dir=None)

    p_sum = sub.add_parser("summary", parents=[common],
                           help="describe a count network")
    p_sum.add_argument("--config", default=None)
    p_sum.add_argument("--network", default=None)
    p_sum.add_argument("--attributes", default=None)
    p_sum.add_argument("--directed", action="store_true", default=None)
    p_sum.add_argument("--nodes", type=int, default=None)
    p_sum.set_defaults(func=cmd_summary)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConstraintError, ParameterSpaceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except DegeneracyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.report is not None:
            print(exc.report.summary(), file=sys.stderr)
        return EXIT_DEGENERATE
    except (ConfigError, ModelError, NetworkFormatError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

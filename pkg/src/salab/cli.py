"""Command-line orchestration: parse config, dispatch subcommands, persist CSVs.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.  All data
files are CSV (UTF-8, comma delimiter, headers in row 1) and byte-identical
across reruns with the same seed; the JSON manifest additionally records
wall-clock durations, which are the one intentionally non-reproducible item.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    ConfigError,
    NumericalError,
    PowerScaling,
    parse_config_file,
    validate_config,
)
from .drift import check_hurwitz, derivative_at_root
from .figures import FIGURE_SPECS, run_figure
from .lyapunov import predict_stationary
from .scaling import find_scaling_exponent
from .sde import em_vs_sa_compare
from .simulate import default_burn_in, default_thin, moment_summary, run_ensemble
from .stats import cf_residual, estimate_density, gaussian_gof, log_density_fit


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


class _Manifest:
    """Collects emitted files and durations for one subcommand invocation."""

    def __init__(self, command: str, out_dir: Path, seed, config_snapshot):
        self.command = command
        self.out_dir = out_dir
        self.seed = seed
        self.config = config_snapshot
        self.files = []
        self.durations = {}
        self.notes = []
        self._t0 = time.perf_counter()

    def add(self, path: Path) -> None:
        self.files.append(path.name)

    def note(self, text: str) -> None:
        self.notes.append(text)
        print(text)

    def emit(self, header, rows, name: str) -> Path:
        path = self.out_dir / name
        _write_csv(path, header, rows)
        self.add(path)
        return path

    def finish(self) -> Path:
        self.durations["total_s"] = time.perf_counter() - self._t0
        path = self.out_dir / "manifest.json"
        payload = {
            "command": self.command,
            "version": __version__,
            "seed": self.seed,
            "config": self.config,
            "files": sorted(self.files),
            "notes": self.notes,
            "durations": self.durations,
        }
        path.write_text(json.dumps(payload, indent=2, default=str), encoding="utf-8")
        return path


def _alpha_tag(alpha: float) -> str:
    return format(float(alpha), "g")


def _load_config(args):
    if not args.config:
        raise ConfigError("this subcommand requires --config")
    try:
        cfg = parse_config_file(args.config)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    validated = validate_config(cfg)
    return cfg, validated


def _prepare_out(path_str: str) -> Path:
    out = Path(path_str)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve_scaling(validated):
    """Config scaling, or the discovered exponent when set to auto."""
    if isinstance(validated.scaling, PowerScaling):
        return validated.scaling, None
    report = find_scaling_exponent(validated.op)
    return PowerScaling(report.exponent), report


def _matrix_rows(prefix: str, m: np.ndarray):
    m = np.atleast_2d(m)
    for i in range(m.shape[0]):
        for j in range(m.shape[1]):
            yield (f"{prefix}_{i + 1}_{j + 1}", m[i, j])


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    cfg, validated = _load_config(args)
    if args.dry_run:
        print(f"simulate: {len(validated.alphas)} stepsize(s), no files written")
        return 0
    out = _prepare_out(validated.out_dir)
    manifest = _Manifest("simulate", out, validated.seed, dataclasses.asdict(cfg))
    scaling, _ = _resolve_scaling(validated)
    for alpha in validated.alphas:
        t0 = time.perf_counter()
        ens = run_ensemble(validated, alpha, scaling, threads=args.threads)
        tag = _alpha_tag(alpha)
        d = ens.samples.shape[-1]
        burn = default_burn_in(alpha) if validated.burn_in == "auto" else validated.burn_in
        thin = default_thin(alpha) if validated.thin == "auto" else validated.thin
        header = ["chain", "step"] + [f"y_{i + 1}" for i in range(d)]
        rows = []
        for ci, chain in zip(ens.chain_ids, ens.samples):
            for r, y in enumerate(chain):
                rows.append([int(ci), burn + (r + 1) * thin, *y])
        manifest.emit(header, rows, f"samples_{tag}.csv")
        mom = moment_summary(ens)
        mrows = [("alpha", alpha), ("n_samples", mom.count),
                 ("n_diverged", ens.n_diverged),
                 ("second_moment_trace", mom.second_moment_trace)]
        mrows += [(f"mean_{i + 1}", v) for i, v in enumerate(mom.mean)]
        mrows += list(_matrix_rows("cov", mom.covariance))
        manifest.emit(["quantity", "value"], mrows, f"moments_{tag}.csv")
        manifest.durations[f"alpha_{tag}_s"] = time.perf_counter() - t0
    manifest.finish()
    return 0


def _cmd_predict(args) -> int:
    cfg, validated = _load_config(args)
    if args.dry_run:
        print("predict: would write prediction.csv")
        return 0
    out = _prepare_out(validated.out_dir)
    manifest = _Manifest("predict", out, validated.seed, dataclasses.asdict(cfg))
    sol = predict_stationary(validated.op, validated.noise)
    rows = list(_matrix_rows("sigma_y", sol.sigma_y))
    rows += [("residual_norm", sol.residual_norm),
             ("min_eigenvalue", sol.min_eigenvalue),
             ("method", sol.method)]
    manifest.emit(["quantity", "value"], rows, "prediction.csv")
    manifest.finish()
    return 0


def _cmd_find_scaling(args) -> int:
    cfg, validated = _load_config(args)
    if args.dry_run:
        print("find-scaling: would write scaling_report.csv")
        return 0
    out = _prepare_out(validated.out_dir)
    manifest = _Manifest("find-scaling", out, validated.seed, dataclasses.asdict(cfg))
    report = find_scaling_exponent(validated.op)
    rows = [list(r) for r in report.evidence]
    rows.append(["p_star", "", "", report.exponent, "chosen"])
    manifest.emit(["p", "probe", "alpha", "magnitude", "classification"], rows,
                  "scaling_report.csv")
    manifest.finish()
    return 0


def _run_tests_for(validated, manifest, scaling, threads) -> None:
    """Shared verification body for the `test` and `pipeline` subcommands.

    Densities are emitted per stepsize; the distributional checks run at the
    smallest one, where the asymptotic claims are sharpest.
    """
    ens = est = None
    for alpha in validated.alphas:
        ens = run_ensemble(validated, alpha, scaling, threads=threads)
        if validated.op.dim == 1:
            flat = ens.flat[:, 0]
            span = 4.6 * float(flat.std(ddof=1))
            est = estimate_density(flat, np.linspace(-span, span, 513))
            manifest.emit(
                ["y", "p_hat"],
                list(zip(est.grid, est.density)),
                f"density_{_alpha_tag(alpha)}.csv",
            )
    smallest = validated.alphas[-1]

    m = derivative_at_root(validated.op)
    if check_hurwitz(m).hurwitz and abs(scaling.exponent - 0.5) < 1e-9:
        sol = predict_stationary(validated.op, validated.noise)
        rows = list(_matrix_rows("sigma_y", sol.sigma_y))
        rows += [("residual_norm", sol.residual_norm),
                 ("min_eigenvalue", sol.min_eigenvalue)]
        manifest.emit(["quantity", "value"], rows, "prediction.csv")

        gof = gaussian_gof(ens.flat, sol.sigma_y)
        rows = [("alpha", smallest), ("ks_distance", gof.ks_distance),
                ("ks_threshold", gof.ks_threshold),
                ("cov_rel_err", gof.cov_rel_err),
                ("cov_threshold", gof.cov_threshold),
                ("n_eff", gof.n_eff), ("passed", gof.passed)]
        rows += [(f"mean_z_{i + 1}", z) for i, z in enumerate(gof.mean_z)]
        manifest.emit(["quantity", "value"], rows, "gof.csv")

        cf = cf_residual(ens.flat, m, validated.noise.sigma)
        d = validated.op.dim
        header = [f"t_{i + 1}" for i in range(d)] + ["re", "im", "se"]
        rows = [
            [*t, re, im, se]
            for t, re, im, se in zip(cf.t_grid, cf.residual_real,
                                     cf.residual_imag, cf.se)
        ]
        manifest.emit(header, rows, "cf_residual.csv")
    else:
        manifest.note("no Gaussian prediction available for this drift/scaling")

    if validated.op.dim == 1:
        q_main = 4 if abs(scaling.exponent - 0.25) < 1e-9 else 2
        rows = []
        for q in sorted({q_main, 2}):
            fit = log_density_fit(est, q)
            rows.append([q, fit.slope, fit.intercept, fit.r_squared, fit.n_points])
        manifest.emit(["q", "slope", "intercept", "r_squared", "n_points"], rows,
                      "logfit.csv")


def _cmd_test(args) -> int:
    cfg, validated = _load_config(args)
    if args.dry_run:
        print("test: would simulate and write verification CSVs")
        return 0
    out = _prepare_out(validated.out_dir)
    manifest = _Manifest("test", out, validated.seed, dataclasses.asdict(cfg))
    scaling, _ = _resolve_scaling(validated)
    _run_tests_for(validated, manifest, scaling, args.threads)
    manifest.finish()
    return 0


def _cmd_pipeline(args) -> int:
    cfg, validated = _load_config(args)
    if validated.scaling != "auto":
        raise ConfigError("pipeline requires scaling = auto")
    if args.dry_run:
        print("pipeline: would run find-scaling, simulate, predict, test")
        return 0
    out = _prepare_out(validated.out_dir)
    manifest = _Manifest("pipeline", out, validated.seed, dataclasses.asdict(cfg))
    report = find_scaling_exponent(validated.op)
    rows = [list(r) for r in report.evidence]
    rows.append(["p_star", "", "", report.exponent, "chosen"])
    manifest.emit(["p", "probe", "alpha", "magnitude", "classification"], rows,
                  "scaling_report.csv")
    scaling = PowerScaling(report.exponent)
    _run_tests_for(validated, manifest, scaling, args.threads)
    manifest.finish()
    return 0


def _cmd_em_compare(args) -> int:
    cfg, validated = _load_config(args)
    if args.dry_run:
        print("em-compare: would write em_compare.csv")
        return 0
    out = _prepare_out(validated.out_dir)
    manifest = _Manifest("em-compare", out, validated.seed, dataclasses.asdict(cfg))
    alpha = validated.alphas[0]
    exponent = (
        validated.scaling.exponent
        if isinstance(validated.scaling, PowerScaling)
        else None
    )
    burn = 0 if validated.burn_in == "auto" else validated.burn_in
    thin = 0 if validated.thin == "auto" else validated.thin
    result = em_vs_sa_compare(
        validated.op,
        alpha,
        exponent=exponent,
        n_chains=validated.n_chains,
        burn_in=burn,
        thin=thin,
        samples_per_chain=validated.samples_per_chain,
        seed=validated.seed,
        threads=args.threads,
    )
    rows = [("alpha", alpha), ("exponent", result.exponent),
            ("rel_err", result.rel_err)]
    rows += list(_matrix_rows("sa_cov", result.sa_cov))
    rows += list(_matrix_rows("em_cov", result.em_cov))
    manifest.emit(["quantity", "value"], rows, "em_compare.csv")
    manifest.finish()
    return 0


def _cmd_figure(args) -> int:
    if args.figure not in FIGURE_SPECS:
        raise ConfigError(
            f"unknown figure name {args.figure!r}; choose from "
            f"{', '.join(sorted(FIGURE_SPECS))}"
        )
    if args.dry_run:
        print(f"figure {args.figure}: would simulate and write density CSVs")
        return 0
    seed = args.seed if args.seed is not None else 0
    out = _prepare_out(args.out or "out")
    spec = FIGURE_SPECS[args.figure]
    manifest = _Manifest(
        f"figure {args.figure}", out, seed,
        {"figure": args.figure, "drift": spec.drift, "exponent": spec.exponent,
         "alphas": list(spec.alphas)},
    )
    result = run_figure(args.figure, seed=seed, threads=args.threads)
    for alpha in spec.alphas:
        est = result.densities[alpha]
        manifest.emit(["y", "p_hat"], list(zip(est.grid, est.density)),
                      f"density_{_alpha_tag(alpha)}.csv")
    if result.trend is not None:
        t = result.trend
        rows = [("diff_small", t.diff_small), ("diff_large", t.diff_large),
                ("diff_ok", t.diff_ok),
                ("sigma_log10_ratio", t.sigma_log10_ratio),
                ("sigma_ok", t.sigma_ok), ("passed", t.passed)]
        manifest.emit(["quantity", "value"], rows, "trend_check.csv")
        manifest.note(f"{args.figure}: convergence trend "
                      f"{'PASS' if t.passed else 'FAIL'}")
    if result.fits:
        rows = [
            [q, fit.slope, fit.intercept, fit.r_squared, fit.n_points]
            for q, fit in sorted(result.fits.items())
        ]
        manifest.emit(["q", "slope", "intercept", "r_squared", "n_points"], rows,
                      "logfit.csv")
    manifest.finish()
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="salab",
        description="Stationary-distribution laboratory for constant-stepsize "
                    "stochastic approximation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="path to a key = value config file")
        p.add_argument("--seed", type=int, default=None, help="override the seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("--dry-run", action="store_true",
                       help="validate without side effects")

    for name, fn, desc in [
        ("simulate", _cmd_simulate, "run chain ensembles across the alpha list"),
        ("predict", _cmd_predict, "solve the Lyapunov prediction"),
        ("find-scaling", _cmd_find_scaling, "search for the scaling exponent"),
        ("test", _cmd_test, "simulate and statistically verify the prediction"),
        ("em-compare", _cmd_em_compare,
         "compare SA against Euler-Maruyama at dt = alpha"),
        ("pipeline", _cmd_pipeline,
         "find-scaling, simulate, predict and test, chained"),
    ]:
        p = sub.add_parser(name, help=desc)
        common(p)
        p.set_defaults(handler=fn)

    p = sub.add_parser("figure", help="reproduce a named figure's data")
    p.add_argument("figure", help=f"one of {', '.join(sorted(FIGURE_SPECS))}")
    common(p)
    p.set_defaults(handler=_cmd_figure)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

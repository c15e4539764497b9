"""Command-line driver: ``rfppv {coeffs,asymptote,simulate,ratio,fluct}``.

Every run reads one flat INI config (section ``[run]``), writes
``results.csv`` and ``plot.svg`` into ``--out`` and records both in
``manifest.json`` with their SHA-256 digests. Exit codes: 0 success,
1 numerical failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from . import asymptotics as asy
from . import experiments as exp
from .activation import gaussian_coefficients, get_activation
from .errors import ConfigError, RFError, UnknownActivation
from .plotting import Series, line_plot, panel_plot
from .simulator import SimulationConfig

CSV_SCHEMA_VERSION = 1

HEADERS = {
    "coeffs": ["activation", "mu0", "mu1", "mu_star_sq", "zeta"],
    "asymptote": ["axis_value", "psi1", "psi2", "lambda", "S2_limit", "chi",
                  "train_error_limit", "r_limit", "R_wide", "R_lsamp"],
    "simulate": ["row_type", "axis_value", "psi1", "psi2", "lambda", "replication",
                 "seed", "risk", "ppv", "train_error", "mean_risk", "se_risk", "mean_ppv",
                 "se_ppv", "mean_train_error", "se_train_error", "S2_limit",
                 "train_error_limit", "R_limit", "rel_gap", "flag", "error"],
    "ratio": ["axis_value", "psi1", "psi2", "lambda", "lambda_source", "risk",
              "risk_source", "S2_limit", "ratio"],
    "fluct": ["row_type", "panel", "psi1", "psi2", "statistic", "mean", "variance",
              "rescaled_variance", "skewness", "excess_kurtosis", "jb", "overlap",
              "variance_ratio", "ppv_smaller", "same_order", "bin_lo", "bin_hi", "count"],
}

DEFAULTS = {
    "coeffs": {"activation": "relu", "quadrature_order": "200"},
    "asymptote": {
        "activation": "relu", "axis": "psi1", "grid": "geomspace:0.1:10:60",
        "psi1": "3", "psi2": "3", "lambda": "1e-3",
        "f1_sq": "1", "fstar_sq": "0", "tau_sq": "0",
    },
    "simulate": {
        "activation": "relu", "axis": "psi1", "grid": "0.5,1,2,3,4,6,10",
        "d": "100", "n": "300", "n_features": "300", "lambda": "1e-3",
        "f1_sq": "1", "tau_sq": "0", "n_test": "2000", "replications": "20", "seed": "0",
    },
    "ratio": {
        "activation": "relu", "axis": "psi1", "grid": "1,1.5,2,3,4,6,10,15,20,100,1000",
        "fixed_other": "3", "f1_sq": "1", "fstar_sq": "0", "tau_sq": "0.2",
        "d": "100", "replications": "20", "lambda_grid": "geomspace:1e-4:10:41",
        "n_test": "4000", "proxy": "100", "seed": "0",
    },
    "fluct": {
        "activation": "relu", "d": "60", "psi2": "3", "psi1_over_psi2": "0.5,1,2",
        "lambda": "1e-2", "f1_sq": "1", "tau_sq": "0.2", "n_test": "2000",
        "replications": "2000", "bins": "60", "seed": "0",
    },
}


# ----------------------------------------------------------------- config io


def parse_grid(text: str) -> list[float]:
    """``"1,2,3"``, ``"geomspace:a:b:k"`` or ``"linspace:a:b:k"``."""
    text = text.strip()
    try:
        if text.startswith(("geomspace:", "linspace:")):
            kind, a, b, k = text.split(":")
            fn = np.geomspace if kind == "geomspace" else np.linspace
            return [float(v) for v in fn(float(a), float(b), int(k))]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from None


def load_config(command: str, path: str | None, seed: int | None = None) -> dict:
    cfg = dict(DEFAULTS[command])
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from None
        if not parser.has_section("run"):
            raise ConfigError(f"{path!r} has no [run] section")
        unknown = set(parser["run"]) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown keys for {command}: {sorted(unknown)}")
        cfg.update(parser["run"])
    if seed is not None:
        if "seed" not in cfg:
            raise ConfigError(f"{command} takes no seed")
        cfg["seed"] = str(seed)
    return cfg


def format_config(cfg: dict) -> str:
    parser = configparser.ConfigParser()
    parser["run"] = cfg
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def _get(cfg, key, kind=float):
    try:
        return kind(cfg[key])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}") from None


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: str, header: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(row.get(k)) for k in header])


def _digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def write_manifest(out: str, command: str, cfg: dict, files: list[str]) -> dict:
    manifest = {
        "version": __version__,
        "command": command,
        "schema": f"{command}/v{CSV_SCHEMA_VERSION}",
        "config": cfg,
        "seed": int(cfg["seed"]) if "seed" in cfg else None,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "digests": {name: _digest(os.path.join(out, name)) for name in files},
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


# ------------------------------------------------------------------ commands


def cmd_coeffs(cfg: dict, out: str | None, threads: int, stdout=None) -> int:
    stdout = stdout or sys.stdout
    act = get_activation(cfg["activation"])
    c = gaussian_coefficients(act, _get(cfg, "quadrature_order", int))
    row = {"activation": cfg["activation"], "mu0": c.mu0, "mu1": c.mu1,
           "mu_star_sq": c.mu_star_sq, "zeta": c.zeta}
    w = csv.writer(stdout, lineterminator="\n")
    w.writerow(HEADERS["coeffs"])
    w.writerow([_num(row[k]) for k in HEADERS["coeffs"]])
    if out:
        os.makedirs(out, exist_ok=True)
        write_csv(os.path.join(out, "results.csv"), HEADERS["coeffs"], [row])
        write_manifest(out, "coeffs", cfg, ["results.csv"])
    return 0


def _params(cfg) -> asy.ModelParams:
    return asy.ModelParams(f1_sq=_get(cfg, "f1_sq"), fstar_sq=_get(cfg, "fstar_sq"),
                           tau_sq=_get(cfg, "tau_sq"))


def asymptote_rows(cfg: dict) -> list[dict]:
    coeffs = gaussian_coefficients(get_activation(cfg["activation"]))
    params = _params(cfg)
    axis = cfg["axis"]
    if axis not in ("psi1", "psi2", "lambda"):
        raise ConfigError(f"axis must be psi1, psi2 or lambda, not {axis!r}")
    rows = []
    for v in parse_grid(cfg["grid"]):
        psi1 = v if axis == "psi1" else _get(cfg, "psi1")
        psi2 = v if axis == "psi2" else _get(cfg, "psi2")
        lam = v if axis == "lambda" else _get(cfg, "lambda")
        try:
            lim = asy.limits(params, asy.ShapeRatios(psi1, psi2), coeffs, lam)
        except RFError as exc:
            raise type(exc)(f"at {axis}={v!r}: {exc}") from exc
        lb = lam / coeffs.mu_star_sq
        row = {"axis_value": v, "psi1": psi1, "psi2": psi2, "lambda": lam,
               "S2_limit": lim.ppv, "chi": lim.chi, "train_error_limit": lim.train_error,
               "r_limit": lim.resolvent_trace}
        try:
            row["R_wide"] = asy.risk_wide(params.rho, coeffs.zeta, psi2, lb, params)
        except RFError:
            pass
        try:
            row["R_lsamp"] = asy.risk_large_sample(coeffs.zeta, psi1, lb, params)
        except RFError:
            pass
        rows.append(row)
    return rows


def cmd_asymptote(cfg: dict, out: str, threads: int) -> int:
    rows = asymptote_rows(cfg)
    os.makedirs(out, exist_ok=True)
    write_csv(os.path.join(out, "results.csv"), HEADERS["asymptote"], rows)
    x = np.array([r["axis_value"] for r in rows])
    series = [Series("S2 limit", x, np.array([r["S2_limit"] for r in rows])),
              Series("training error limit", x,
                     np.array([r["train_error_limit"] for r in rows]), dashed=True)]
    svg = line_plot(series, xlabel=cfg["axis"], ylabel="value",
                    title="Limiting posterior predictive variance",
                    logx=cfg["axis"] == "lambda" or min(x) > 0 and max(x) / min(x) > 50)
    _write(os.path.join(out, "plot.svg"), svg)
    write_manifest(out, "asymptote", cfg, ["results.csv", "plot.svg"])
    return 0


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def sweep_from_config(cfg: dict) -> exp.SweepSpec:
    act = get_activation(cfg["activation"])
    d = _get(cfg, "d", int)
    base = SimulationConfig(
        d=d, n=_get(cfg, "n", int), n_features=_get(cfg, "n_features", int),
        lam=_get(cfg, "lambda"), activation=act, f1_sq=_get(cfg, "f1_sq"),
        tau_sq=_get(cfg, "tau_sq"), n_test=_get(cfg, "n_test", int),
    )
    axis = cfg["axis"]
    grid = parse_grid(cfg["grid"])
    if axis == "psi1":
        spec_axis, values = "n_features", [int(round(g * d)) for g in grid]
    elif axis == "psi2":
        spec_axis, values = "n", [int(round(g * d)) for g in grid]
    elif axis == "lambda":
        spec_axis, values = "lam", grid
    else:
        raise ConfigError(f"axis must be psi1, psi2 or lambda, not {axis!r}")
    return exp.SweepSpec(base, spec_axis, tuple(values), _get(cfg, "replications", int),
                         _get(cfg, "seed", int))


def simulate_rows(records, axis: str) -> list[dict]:
    rows = []
    for rec in records:
        axis_value = {"psi1": rec.psi1, "psi2": rec.psi2, "lambda": rec.lam}[axis]
        point = {"axis_value": axis_value, "psi1": rec.psi1, "psi2": rec.psi2,
                 "lambda": rec.lam}
        for s in rec.samples:
            rows.append({**point, "row_type": "replication", "replication": s.replication,
                         "seed": s.seed, "risk": s.risk, "ppv": s.ppv,
                         "train_error": s.train_error,
                         "flag": "jitter" if s.jittered else ""})
        for e in rec.errors:
            rows.append({**point, "row_type": "failure", "error": e})
        flags = []
        if rec.boundary:
            flags.append("boundary")
        if rec.ppv[1] > 0.1 * abs(rec.ppv[0]):
            flags.append("inflated_se")
        rows.append({**point, "row_type": "summary",
                     "mean_risk": rec.risk[0], "se_risk": rec.risk[1],
                     "mean_ppv": rec.ppv[0], "se_ppv": rec.ppv[1],
                     "mean_train_error": rec.train_error[0],
                     "se_train_error": rec.train_error[1],
                     "S2_limit": rec.ppv_limit, "train_error_limit": rec.train_error_limit,
                     "R_limit": rec.risk_limit, "rel_gap": rec.relative_gap,
                     "flag": ";".join(flags)})
    return rows


def cmd_simulate(cfg: dict, out: str, threads: int) -> int:
    spec = sweep_from_config(cfg)
    records = exp.run_sweep(spec, threads=threads)
    os.makedirs(out, exist_ok=True)
    rows = simulate_rows(records, cfg["axis"])
    write_csv(os.path.join(out, "results.csv"), HEADERS["simulate"], rows)
    key = {"psi1": "psi1", "psi2": "psi2", "lambda": "lam"}[cfg["axis"]]
    xs = np.array([getattr(r, key) for r in records])
    scatter_x = np.concatenate([[getattr(r, key)] * len(r.samples) for r in records])
    scatter_y = np.concatenate([r.values("ppv") for r in records])
    series = [Series("S2 replications", scatter_x, scatter_y, kind="scatter"),
              Series("S2 limit", xs, np.array([r.ppv_limit for r in records])),
              Series("mean risk", xs, np.array([r.risk[0] for r in records]), dashed=True)]
    top = 1.5 * max(max(r.ppv_limit for r in records), 1e-12)
    svg = line_plot(series, xlabel=cfg["axis"], ylabel="expected PPV",
                    title="Simulated vs limiting PPV", logx=cfg["axis"] == "lambda",
                    ylim=(0.0, top))
    _write(os.path.join(out, "plot.svg"), svg)
    write_manifest(out, "simulate", cfg, ["results.csv", "plot.svg"])
    if all(not r.samples for r in records):
        print("all replications failed", file=sys.stderr)
        return 1
    return 0


def ratio_rows(cfg: dict, threads: int) -> list[dict]:
    act = get_activation(cfg["activation"])
    coeffs = gaussian_coefficients(act)
    settings = exp.RatioSettings(
        d=_get(cfg, "d", int), replications=_get(cfg, "replications", int),
        lambda_grid=tuple(parse_grid(cfg["lambda_grid"])), n_test=_get(cfg, "n_test", int),
        master_seed=_get(cfg, "seed", int), proxy=_get(cfg, "proxy"),
    )
    pts = exp.ratio_curve(coeffs, _params(cfg), cfg["axis"], parse_grid(cfg["grid"]),
                          _get(cfg, "fixed_other"), act, settings, threads)
    return [{"axis_value": p.value, "psi1": p.psi1, "psi2": p.psi2, "lambda": p.lam,
             "lambda_source": p.lambda_source, "risk": p.risk, "risk_source": p.risk_source,
             "S2_limit": p.ppv_limit, "ratio": p.ratio} for p in pts]


def cmd_ratio(cfg: dict, out: str, threads: int) -> int:
    rows = ratio_rows(cfg, threads)
    os.makedirs(out, exist_ok=True)
    write_csv(os.path.join(out, "results.csv"), HEADERS["ratio"], rows)
    x = np.array([r["axis_value"] for r in rows])
    series = [Series("ratio", x, np.array([r["ratio"] for r in rows])),
              Series("1", x, np.ones_like(x), dashed=True)]
    svg = line_plot(series, xlabel=cfg["axis"], ylabel="R(lambda) / (S2(lambda) - tau2)",
                    title=f"tau2 = {cfg['tau_sq']}", logx=True)
    _write(os.path.join(out, "plot.svg"), svg)
    write_manifest(out, "ratio", cfg, ["results.csv", "plot.svg"])
    return 0


def fluct_panels(cfg: dict, threads: int):
    act = get_activation(cfg["activation"])
    d = _get(cfg, "d", int)
    psi2 = _get(cfg, "psi2")
    n = int(round(psi2 * d))
    reps = _get(cfg, "replications", int)
    seed = _get(cfg, "seed", int)
    bins = _get(cfg, "bins", int)
    panels = []
    for k, frac in enumerate(parse_grid(cfg["psi1_over_psi2"])):
        sc = SimulationConfig(d=d, n=n, n_features=max(1, int(round(frac * n))),
                              lam=_get(cfg, "lambda"), activation=act,
                              f1_sq=_get(cfg, "f1_sq"), tau_sq=_get(cfg, "tau_sq"),
                              n_test=_get(cfg, "n_test", int))
        a, b = exp.fluctuation_pair(sc, reps, seed, threads, bins)
        panels.append((k, sc, a, b))
    return panels


def fluct_rows(panels) -> list[dict]:
    rows = []
    for k, sc, a, b in panels:
        ovl = exp.overlap(a, b)
        ratio = b.rescaled_variance / a.rescaled_variance
        base = {"panel": k, "psi1": sc.psi1, "psi2": sc.psi2}
        for rep in (a, b):
            rows.append({**base, "row_type": "summary", "statistic": rep.statistic,
                         "mean": rep.mean, "variance": rep.variance,
                         "rescaled_variance": rep.rescaled_variance,
                         "skewness": rep.skewness, "excess_kurtosis": rep.excess_kurtosis,
                         "jb": rep.jb})
        lo, hi = exp.SAME_ORDER_BOUNDS
        rows.append({**base, "row_type": "comparison", "overlap": ovl,
                     "variance_ratio": ratio, "ppv_smaller": ratio < 1,
                     "same_order": lo <= ratio <= hi})
        for rep in (a, b):
            for i, c in enumerate(rep.counts):
                rows.append({**base, "row_type": "histogram", "statistic": rep.statistic,
                             "bin_lo": rep.bin_edges[i], "bin_hi": rep.bin_edges[i + 1],
                             "count": int(c)})
    return rows


def cmd_fluct(cfg: dict, out: str, threads: int) -> int:
    panels = fluct_panels(cfg, threads)
    os.makedirs(out, exist_ok=True)
    write_csv(os.path.join(out, "results.csv"), HEADERS["fluct"], fluct_rows(panels))
    figs = []
    for k, sc, a, b in panels:
        figs.append((f"psi1/psi2 = {sc.psi1 / sc.psi2:g}  overlap {exp.overlap(a, b):.3f}",
                     [Series("R", a.bin_edges, a.probabilities, kind="step"),
                      Series("S2 - tau2", b.bin_edges, b.probabilities, kind="step")]))
    _write(os.path.join(out, "plot.svg"), panel_plot(figs, xlabel="value",
                                                     ylabel="frequency"))
    write_manifest(out, "fluct", cfg, ["results.csv", "plot.svg"])
    return 0


COMMANDS = {"coeffs": cmd_coeffs, "asymptote": cmd_asymptote, "simulate": cmd_simulate,
            "ratio": cmd_ratio, "fluct": cmd_fluct}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rfppv", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name == "coeffs":
            sp.add_argument("activation", nargs="?", help="relu, tanh, linear, shifted_relu:<c>")
        sp.add_argument("--config", help="INI file with a [run] section")
        sp.add_argument("--out", default=None if name == "coeffs" else "rfppv-out",
                        help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--print-config", action="store_true",
                        help="print the resolved config and exit")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        cfg = load_config(args.command, args.config, args.seed)
        if args.command == "coeffs" and args.activation:
            cfg["activation"] = args.activation
        if args.print_config:
            sys.stdout.write(format_config(cfg))
            return 0
        return COMMANDS[args.command](cfg, args.out, args.threads)
    except (ConfigError, UnknownActivation) as exc:
        print(f"rfppv {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except RFError as exc:
        print(f"rfppv {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"rfppv {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

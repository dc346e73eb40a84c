"""Command-line entry point: ``lpiso <subcommand> [flags]``.

Exit codes: 0 all verdicts pass, 2 a statistical verdict fails, 1 usage or
configuration error, 3 numerical error (truncation, convergence, boundary
hits).  Errors are reported on stderr as one JSON object with ``category``
and ``message``.

Configuration may come from ``--config file.json``; explicit flags override
the file.  Environment: ``LPISO_WORKERS`` (worker threads) and
``LPISO_OUTPUT_DIR`` (base directory for relative output paths).
"""
import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from .. import coeffs as cf
from .. import fbmlab as fb
from .. import innovations as inv
from ..errors import ConfigError, LpisoError, NumericalError
from . import experiments as ex
from . import stats as st

EXIT_OK, EXIT_USAGE, EXIT_STAT, EXIT_NUMERIC = 0, 1, 2, 3

COEFF_KEYS = {"kind": "kind", "d": "d", "alpha": "alpha", "u": "u", "u_power": "p",
              "values": "values"}
INNOV_KEYS = {"innov": "kind", "sigma": "sigma", "nu": "nu", "rho": "rho",
              "theta": "theta", "chain_p": "p"}

DEFAULTS = {
    "normalizers": {"n_grid": "256:65536:dyadic"},
    "cov-limit": {"n": 16384},
    "simulate": {"n": 1024, "reps": 10, "seed": 0, "grid": "0.25,0.5,0.75,1",
                 "normalizer": "v_n"},
    "fclt": {"n": 1024, "reps": 5000, "seed": 0, "grid": "1", "meta_runs": st.META_RUNS},
    "approx": {"n_grid": "256:4096:dyadic", "m_grid": "1,4,16", "reps": 2000, "seed": 0},
    "ineq": {"check": "moment", "n_grid": "64:4096:dyadic", "q": 2.0, "N": 12, "p": 2.0,
             "psi": "x,x2,psi23", "reps": 10000, "seed": 0},
    "chernoff": {"H": 0.5, "M": fb.DEFAULT_M, "delta": fb.DEFAULT_DELTA, "reps": 2000,
                 "seed": 0},
    "iso-fit": {},
    "iso-rate": {"theorem": "4.1", "phi_slope": 2.0, "t": 0.5,
                 "n_grid": "1024:65536:dyadic", "reps": 2000, "seed": 0,
                 "meta_runs": st.META_RUNS},
    "audit-conditions": {"q": 2.0},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add_coeff(p):
    g = p.add_argument_group("coefficients")
    g.add_argument("--kind", choices=[k for k in cf.KINDS if k != "custom"])
    g.add_argument("--d", type=float, help="fractional memory parameter")
    g.add_argument("--alpha", type=float)
    g.add_argument("--u", choices=["power", "sqrt_log"], help="alternating_heyde rule")
    g.add_argument("--u-power", dest="u_power", type=float,
                   help="alternating_heyde exponent p in u_n = n^-p")
    g.add_argument("--values", help="finite_ma coefficients, comma separated")


def _add_innov(p):
    g = p.add_argument_group("innovations")
    g.add_argument("--innov", choices=["gaussian", "student_t", "causal_linear", "markov"])
    g.add_argument("--sigma", type=float)
    g.add_argument("--nu", type=float)
    g.add_argument("--rho", type=float, help="geometric causal_linear theta_j = rho^j")
    g.add_argument("--theta", help="finite causal_linear filter, comma separated")
    g.add_argument("--chain-p", dest="chain_p", type=float,
                   help="two-state chain stay probability")


def _add_mc(p, grid=False):
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    if grid:
        p.add_argument("--grid", help="t values in (0, 1], comma separated")


def build_parser():
    top = _Parser(prog="lpiso", description=__doc__.splitlines()[0],
                  argument_default=argparse.SUPPRESS)
    sub = top.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--output", help="CSV output path (default stdout)")
        p.add_argument("--summary", help="JSON summary path (default stderr)")
        return p

    p = add("normalizers", "v_n^2, s_n^2 and beta_hat on an n grid")
    _add_coeff(p)
    p.add_argument("--n-grid", dest="n_grid")

    p = add("cov-limit", "deterministic covariance ratio against the fBm form")
    _add_coeff(p)
    p.add_argument("--n", type=int)
    p.add_argument("--beta", type=float)

    p = add("simulate", "coupled S/T paths at grid times")
    _add_coeff(p)
    _add_innov(p)
    p.add_argument("--n", type=int)
    p.add_argument("--normalizer", choices=["v_n", "s_n", "sqrt_n"])
    _add_mc(p, grid=True)

    p = add("fclt", "KS of normalized partial sums against the Gaussian limit")
    _add_coeff(p)
    _add_innov(p)
    p.add_argument("--n", type=int)
    p.add_argument("--meta-runs", dest="meta_runs", type=int)
    _add_mc(p, grid=True)

    p = add("approx", "martingale approximation ratios and fitted constants")
    _add_coeff(p)
    _add_innov(p)
    p.add_argument("--n-grid", dest="n_grid")
    p.add_argument("--m-grid", dest="m_grid")
    _add_mc(p)

    p = add("ineq", "inequality audits")
    _add_coeff(p)
    _add_innov(p)
    p.add_argument("--check", choices=["moment", "approx", "dyadic", "coboundary",
                                       "lemma61", "maxsq"])
    p.add_argument("--n-grid", dest="n_grid")
    p.add_argument("--q", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--p-norm", dest="p", type=float)
    p.add_argument("--psi", help="Orlicz functions among x, x2, psi23")
    _add_mc(p)

    p = add("chernoff", "argmin{B_H(s) + s^2} reference draws")
    p.add_argument("--H", type=float)
    p.add_argument("--M", type=float)
    p.add_argument("--delta", type=float)
    _add_mc(p)

    p = add("iso-fit", "isotonic fit of a single-column CSV")
    p.add_argument("--input", help="CSV with one column of observations")
    p.add_argument("--t", help="evaluation points for phi_hat, comma separated")

    p = add("iso-rate", "rate and limit law of the isotonic estimator")
    _add_coeff(p)
    _add_innov(p)
    p.add_argument("--theorem", choices=["4.1", "4.2", "4.3"])
    p.add_argument("--phi-slope", dest="phi_slope", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--n-grid", dest="n_grid")
    p.add_argument("--meta-runs", dest="meta_runs", type=int)
    p.add_argument("--meta-n", dest="meta_n", type=int)
    p.add_argument("--beta", type=float)
    _add_mc(p)

    p = add("audit-conditions", "projective condition series of an innovation model")
    _add_coeff(p)
    _add_innov(p)
    p.add_argument("--q", type=float)
    return top


# -- parsing helpers ------------------------------------------------------------------
def parse_n_grid(spec):
    """"lo:hi:dyadic", a comma list, or a list of ints."""
    if isinstance(spec, (list, tuple)):
        return [int(x) for x in spec]
    spec = str(spec)
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3 or parts[2] != "dyadic":
            raise ConfigError(f"bad n grid {spec!r}; use lo:hi:dyadic")
        return ex.dyadic_grid(int(parts[0]), int(parts[1]))
    return [int(x) for x in spec.split(",") if x.strip()]


def parse_floats(spec):
    if isinstance(spec, (list, tuple)):
        return [float(x) for x in spec]
    if isinstance(spec, (int, float)):
        return [float(spec)]
    return [float(x) for x in str(spec).split(",") if x.strip()]


def _merge(command, args):
    cfg = dict(DEFAULTS[command])
    if "config" in args:
        try:
            with open(args["config"]) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg.update({k.replace("-", "_"): v for k, v in file_cfg.items()})
    cfg.update(args)
    return cfg


def coeff_from(cfg, default=None):
    record = dict(cfg.get("coeff", {}))
    for flag, key in COEFF_KEYS.items():
        if flag in cfg:
            record[key] = cfg[flag]
    if "values" in record:
        record["values"] = parse_floats(record["values"])
    if "kind" not in record:
        if default is None:
            raise ConfigError("missing --kind")
        return default
    return cf.from_config(record)


def innov_from(cfg):
    record = dict(cfg["innov"]) if isinstance(cfg.get("innov"), dict) else {}
    for flag, key in INNOV_KEYS.items():
        if flag in cfg and not isinstance(cfg[flag], dict):
            record[key] = cfg[flag]
    if "theta" in record and not isinstance(record["theta"], (list, tuple)):
        record["theta"] = parse_floats(record["theta"])
    record.setdefault("kind", "gaussian")
    return inv.from_config(record)


def _workers(cfg):
    if "workers" in cfg:
        return max(1, int(cfg["workers"]))
    return max(1, int(os.environ.get("LPISO_WORKERS", "1")))


def read_single_column(path):
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and r[0].strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    vals = []
    for i, row in enumerate(rows):
        if len(row) != 1:
            raise ConfigError("iso-fit input must have exactly one column")
        try:
            vals.append(float(row[0]))
        except ValueError:
            if i == 0:
                continue  # header
            raise ConfigError(f"non-numeric value {row[0]!r}") from None
    return np.asarray(vals)


# -- dispatch -----------------------------------------------------------------------
def dispatch(command, cfg):
    w = _workers(cfg)
    if command == "normalizers":
        return ex.run_normalizers(coeff_from(cfg), parse_n_grid(cfg["n_grid"]))
    if command == "cov-limit":
        coeff = coeff_from(cfg)
        beta = cfg.get("beta", coeff.analytic_beta)
        if beta is None:
            raise ConfigError("--beta required for this model")
        return ex.run_cov_limit(coeff, int(cfg["n"]), float(beta))
    if command == "simulate":
        return ex.run_simulate(coeff_from(cfg), innov_from(cfg), int(cfg["n"]),
                               int(cfg["reps"]), int(cfg["seed"]),
                               parse_floats(cfg["grid"]), cfg["normalizer"], w)
    if command == "fclt":
        return ex.run_fclt(coeff_from(cfg), innov_from(cfg), int(cfg["n"]),
                           int(cfg["reps"]), int(cfg["seed"]), parse_floats(cfg["grid"]),
                           int(cfg["meta_runs"]), w)
    if command == "approx":
        return ex.run_approx(coeff_from(cfg), innov_from(cfg), parse_n_grid(cfg["n_grid"]),
                             parse_n_grid(cfg["m_grid"]), int(cfg["reps"]),
                             int(cfg["seed"]))
    if command == "ineq":
        psi = [s.strip() for s in str(cfg["psi"]).split(",")] \
            if not isinstance(cfg["psi"], list) else cfg["psi"]
        return ex.run_ineq(cfg["check"], coeff_from(cfg, cf.dirac()), innov_from(cfg),
                           parse_n_grid(cfg["n_grid"]), float(cfg["q"]), int(cfg["N"]),
                           float(cfg["p"]), psi, int(cfg["reps"]), int(cfg["seed"]))
    if command == "chernoff":
        return ex.run_chernoff(float(cfg["H"]), int(cfg["reps"]), int(cfg["seed"]),
                               float(cfg["M"]), float(cfg["delta"]))
    if command == "iso-fit":
        if "input" not in cfg:
            raise ConfigError("iso-fit needs --input")
        y = read_single_column(cfg["input"])
        res = ex.run_iso_fit(y)
        if "t" in cfg:
            from ..isotone import fit_phi_hat
            ts = parse_floats(cfg["t"])
            res.summary["phi_hat"] = {str(t): float(fit_phi_hat(y, t)) for t in ts}
        return res
    if command == "iso-rate":
        return ex.run_iso_rate(str(cfg["theorem"]), coeff_from(cfg, cf.dirac()),
                               innov_from(cfg), float(cfg["phi_slope"]), float(cfg["t"]),
                               parse_n_grid(cfg["n_grid"]), int(cfg["reps"]),
                               int(cfg["seed"]), int(cfg["meta_runs"]),
                               cfg.get("meta_n"), cfg.get("beta"), w)
    if command == "audit-conditions":
        coeff = coeff_from(cfg) if "kind" in cfg or "coeff" in cfg else None
        innov = innov_from(cfg)
        return ex.run_audit_conditions(innov, float(cfg["q"]), coeff, innov.kind)
    raise ConfigError(f"unknown command {command!r}")


def _format(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ("nan" if math.isnan(v) else
                                                         ("inf" if v > 0 else "-inf"))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def render_csv(result):
    buf = io.StringIO()
    writer = csv.writer(buf)  # RFC 4180: CRLF line ends, minimal quoting
    writer.writerow(result.header)
    for row in result.rows:
        writer.writerow([_format(v) for v in row])
    return buf.getvalue()


def _resolve(path):
    base = os.environ.get("LPISO_OUTPUT_DIR")
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _report_error(category, message):
    sys.stderr.write(json.dumps({"category": category, "message": message}) + "\n")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        ns = build_parser().parse_args(argv)
        args = {k: v for k, v in vars(ns).items() if k != "command"}
        cfg = _merge(ns.command, args)
        result = dispatch(ns.command, cfg)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except ConfigError as exc:
        _report_error("usage", str(exc))
        return EXIT_USAGE
    except NumericalError as exc:
        _report_error(exc.category, f"{type(exc).__name__}: {exc}")
        return EXIT_NUMERIC
    except LpisoError as exc:
        _report_error(exc.category, str(exc))
        return EXIT_USAGE
    text = render_csv(result)
    if "output" in cfg:
        with open(_resolve(cfg["output"]), "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    payload = {"command": ns.command,
               "status": "pass" if result.passed else "fail",
               "verdicts": {k: bool(v) for k, v in result.verdicts.items()},
               "summary": result.summary}
    blob = json.dumps(payload, default=_json_default, sort_keys=True)
    if "summary" in cfg:
        with open(_resolve(cfg["summary"]), "w") as fh:
            fh.write(blob + "\n")
    else:
        sys.stderr.write(blob + "\n")
    return EXIT_OK if result.passed else EXIT_STAT


if __name__ == "__main__":
    sys.exit(main())

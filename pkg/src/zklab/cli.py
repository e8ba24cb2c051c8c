"""Command line experiment runner.

Every subcommand reads one INI file with a section per subcommand, echoes the resolved
configuration and writes CSV into the output directory.

    zklab --config run.ini --out results simulate
    zklab --config run.ini verify-lemma coro
    zklab --config run.ini counterexample x
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import math
import os
import sys
from pathlib import Path

from . import counterexamples as ce
from . import experiments as ex
from . import measure as ms
from . import norms as nm
from . import randomize as rz
from . import resonance as rs
from . import solver as sv
from .spectrum import FrequencyGrid, SpectralField, read_dump, space_time_transform

REQUIRED = object()
LEMMAS = ("localization", "coro", "sweden", "abounds", "bilinear")
U64 = 2**64


class ConfigError(ValueError):
    pass


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _ints(text):
    return [int(v) for v in text.replace(",", " ").split()]


def _dyadic_list(lo, hi):
    return " ".join(str(2**j) for j in range(lo, hi + 1))


# key, parser, default; REQUIRED marks keys without a default, None marks optional keys
SCHEMA = {
    "general": [("seed", int, 0), ("threads", int, None)],
    "simulate": [
        ("xi_max", float, REQUIRED), ("n_x1", int, REQUIRED), ("k_max", int, REQUIRED),
        ("period_x2", float, 2 * math.pi), ("amplitude", float, 1e-2), ("width", float, 1.0),
        ("T", float, REQUIRED), ("dt", float, REQUIRED), ("max_iter", int, 30), ("tol", float, 1e-12),
        ("store_every", int, 1),
    ],
    "norms": [("dump", str, REQUIRED), ("s", float, REQUIRED), ("b", float, REQUIRED), ("delta", float, 0.0)],
    "classify": [
        ("source", str, "sample"), ("count", int, 1000), ("n_max_exp", int, 10),
        ("nu", float, None), ("k2", int, None), ("zeta", float, None), ("m2", int, None),
        ("beta", float, rs.BETA_DEFAULT), ("C", float, float(rs.C_DEFAULT)), ("C2", float, None),
    ],
    "localization": [("count", int, 10**5)],
    "coro": [("count", int, 10**5), ("C", float, float(rs.C_DEFAULT)), ("k_range", int, 4096)],
    "sweden": [("N_values", _ints, "128 256 512 1024"), ("per_N", int, 5), ("n_lambda", int, 50),
               ("delta", float, 0.1)],
    "abounds": [("count", int, 1000), ("n_points", int, 10**6), ("constant", float, ms.A_CONSTANT)],
    "bilinear": [("N_values", _ints, "128 256 512 1024"), ("variant", str, "general"), ("draws", int, 100),
                 ("c", float, 1 / 64)],
    "counterexample": [
        ("s_values", _floats, REQUIRED), ("N_list", _ints, _dyadic_list(6, 10)), ("b", float, None),
        ("delta", float, ce.DELTA_DEFAULT), ("C_mod", float, float(ce.C_MOD_DEFAULT)),
        ("n_nodes", int, ce.GL_NODES),
    ],
    "random-experiment": [
        ("alpha", float, 0.97), ("K_values", _ints, "8 16 32"), ("seeds", int, 50), ("s", float, 0.55),
        ("T", float, 0.1), ("h_xi", float, 0.5),
    ],
}

TRIPLE_KEYS = ("nu", "k2", "zeta", "m2")


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return " ".join(_fmt(v) for v in value)
    return str(value)


def resolve_section(parser: configparser.ConfigParser, section: str) -> dict:
    raw = parser[section] if parser.has_section(section) else {}
    known = {k for k, _, _ in SCHEMA[section]}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown config key '{section}.{key}'")
    out = {}
    for key, conv, default in SCHEMA[section]:
        if key in raw:
            text = raw[key].strip()
        elif default is REQUIRED:
            raise ConfigError(f"missing config key '{section}.{key}'")
        elif default is None:
            out[key] = None
            continue
        else:
            text = default if isinstance(default, str) else _fmt(default)
        if text.lower() == "none" and default is None:
            out[key] = None
            continue
        try:
            out[key] = conv(text)
        except ValueError as err:
            raise ConfigError(f"bad value for '{section}.{key}': {text!r}") from err
    return out


def _section_for(args) -> str:
    if args.command == "verify-lemma":
        return args.lemma
    return args.command


def load_config(args, environ) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if args.config is None:
        raise ConfigError("missing --config")
    path = Path(args.config)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        parser.read(path)
    except configparser.Error as err:
        raise ConfigError(f"unreadable config: {err}") from err
    general = resolve_section(parser, "general")
    if args.seed is not None:
        general["seed"] = args.seed
    if not 0 <= general["seed"] < U64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if environ.get("ZK_THREADS"):
        try:
            general["threads"] = int(environ["ZK_THREADS"])
        except ValueError as err:
            raise ConfigError(f"bad ZK_THREADS value {environ['ZK_THREADS']!r}") from err
    if general["threads"] is None:
        general["threads"] = os.cpu_count() or 1
    if general["threads"] < 1:
        raise ConfigError("threads must be positive")
    section = _section_for(args)
    return {"general": general, section: resolve_section(parser, section)}


def render_config(cfg: dict) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section, values in cfg.items():
        parser[section] = {k: _fmt(v) for k, v in values.items()}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])


def _summary(path, results):
    _write_rows(path, ["check", "samples", "failures", "worst"],
                [(r.name, r.samples, r.failures, float(r.worst)) for r in results])
    for r in results:
        print(f"{r.name}: samples={r.samples} failures={r.failures} worst={r.worst:.6g}")


# --- subcommands --------------------------------------------------------------------

def cmd_simulate(c, general, out: Path):
    grid = FrequencyGrid(c["xi_max"], c["n_x1"], c["k_max"], c["period_x2"])
    u0 = sv.gaussian_bump(grid, c["amplitude"], c["width"])
    tr = sv.picard_solve(u0, c["T"], c["dt"], c["max_iter"], c["tol"], store_every=c["store_every"])
    rep = sv.conserved_report(tr)
    sv.write_conserved_csv(out / "conserved.csv", tr)
    rows = [(k, float(v)) for k, v in rep.items()] + [("iterations", tr.meta["iterations"])]
    _write_rows(out / "drift.csv", ["quantity", "value"], rows)
    tr.dump(out / "trajectory.zk")
    for k, v in rows:
        print(f"{k} = {v}")


def cmd_norms(c, general, out: Path):
    dump = read_dump(c["dump"])
    rows = []
    s, b = c["s"], c["b"]
    last = SpectralField(dump.grid, dump.coeffs[-1] if dump.times is not None else dump.coeffs)
    rows.append({"norm_name": "H_s", "s": s, "b": 0.0, "gamma": 0.0, "value": nm.sobolev_norm(last, s)})
    if dump.times is not None and len(dump.times) >= 3:
        st = space_time_transform(dump.coeffs, dump.times, dump.grid)
        rows.append({"norm_name": "X_sb", "s": s, "b": b, "gamma": 0.0,
                     "value": nm.xsb_norm(st, nm.NormParams(s, b, c["delta"]))})
        py = nm.NormParams(s, b, c["delta"], 0.5)
        rows.append({"norm_name": "Y_sb", "s": s, "b": b, "gamma": 0.5, "value": nm.ysb_norm(st, py)})
        rows.append({"norm_name": "Z_sb", "s": s, "b": b, "gamma": 0.5, "value": nm.zsb_norm(st, py).value})
    nm.write_norm_report(out / "norms.csv", rows)
    for r in rows:
        print(f"{r['norm_name']} = {r['value']!r}")


def cmd_classify(c, general, out: Path):
    if c["source"] == "triple":
        for key in TRIPLE_KEYS:
            if c[key] is None:
                raise ConfigError(f"missing config key 'classify.{key}'")
        t = rs.FrequencyTriple.from_pairs(c["nu"], c["k2"], c["zeta"], c["m2"])
        verdicts = [rs.classify(t, c["beta"], c["C"], c["C2"])]
    elif c["source"] == "sample":
        res = ex.partition_sweep(c["count"], general["seed"], c["beta"], c["C"], c["C2"], c["n_max_exp"])
        verdicts = res.rows
        print(f"partition: samples={res.samples} violations={res.failures}")
    else:
        raise ConfigError(f"bad value for 'classify.source': {c['source']!r}")
    rs.write_census(out / "census.csv", verdicts)
    for n, m, kind, cnt in rs.census_rows(verdicts):
        print(f"N_min={n} M={m} kind={kind} count={cnt}")


def cmd_lemma(lemma, c, general, out: Path):
    seed, threads = general["seed"], general["threads"]
    if lemma == "localization":
        results = [ex.localization_sweep(c["count"], seed)]
    elif lemma == "coro":
        results = [ex.coro_sweep(c["count"], seed, c["C"], c["k_range"])]
    elif lemma == "sweden":
        results = [ex.level_set_sweep(tuple(c["N_values"]), c["per_N"], c["n_lambda"], c["delta"], seed, threads)]
    elif lemma == "abounds":
        results = [ex.a_bounds_sweep(c["count"], seed, c["n_points"], c["constant"], threads)]
    else:
        results = [ex.bilinear_sweep(tuple(c["N_values"]), c["variant"], c["draws"], c["c"], seed, threads)]
    if results[0].rows:
        ms.write_reports(out / "bounds.csv", results[0].rows)
    _summary(out / "summary.csv", results)


def cmd_counterexample(case, c, general, out: Path):
    scans = ex.counterexample_scans(case.upper(), c["s_values"], c["N_list"], c["b"], c["delta"], c["C_mod"],
                                    c["n_nodes"], general["threads"])
    ce.write_scan(out / "scan.csv", scans)
    for sc in scans:
        print(f"case={sc.case} s={sc.s} slope={sc.slope:.4f} target={sc.target:.4f}")


def cmd_random(c, general, out: Path):
    seeds = [general["seed"] + j for j in range(c["seeds"])]
    rows = rz.smoothing_census(seeds, c["K_values"], c["alpha"], c["s"], c["T"], c["h_xi"])
    rz.write_census(out / "census.csv", rows)
    med = rz.census_medians(rows)
    _write_rows(out / "medians.csv", ["K_trunc", "median_norm_u0", "median_norm_v1"],
                [(K, float(a), float(b)) for K, (a, b) in sorted(med.items())])
    for K, (a, b) in sorted(med.items()):
        print(f"K_trunc={K} median_norm_u0={a:.6g} median_norm_v1={b:.6g}")


# --- entry points ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zklab", description="Numerical experiments for the ZK equation on R x T.")
    p.add_argument("--config", help="INI file with one section per subcommand")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, help="overrides general.seed")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", help="Picard solve of Gaussian data and conservation report")
    sub.add_parser("norms", help="Sobolev and Bourgain-type norms of a field dump")
    sub.add_parser("classify", help="resonance classification census")
    lem = sub.add_parser("verify-lemma", help="sampled checks of resonance and measure bounds")
    lem.add_argument("lemma", choices=LEMMAS)
    cx = sub.add_parser("counterexample", help="growth of the bilinear ratio along the bad families")
    cx.add_argument("case", choices=("x", "y"))
    sub.add_parser("random-experiment", help="smoothing census for randomized data")
    return p


def run(argv=None, environ=None) -> int:
    environ = os.environ if environ is None else environ
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        cfg = load_config(args, environ)
        section = _section_for(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        text = render_config(cfg)
        sys.stdout.write(text)
        (out / "resolved_config.ini").write_text(text)
        general, c = cfg["general"], cfg[section]
        if args.command == "simulate":
            cmd_simulate(c, general, out)
        elif args.command == "norms":
            cmd_norms(c, general, out)
        elif args.command == "classify":
            cmd_classify(c, general, out)
        elif args.command == "verify-lemma":
            cmd_lemma(args.lemma, c, general, out)
        elif args.command == "counterexample":
            cmd_counterexample(args.case, c, general, out)
        else:
            cmd_random(c, general, out)
    except (sv.ConvergenceError, ms.QuadratureError, FloatingPointError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except RuntimeError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2
    return 0


def main(argv=None):
    sys.exit(run(argv))

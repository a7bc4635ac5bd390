"""Command line entry point: ``equiconv {spectrum,deviation,rates,verify,convert}``.

Every subcommand accepts ``--config file.json``; the file uses the same keys
as the long flags (dashes replaced by underscores) and flags given on the
command line take precedence.  The exit code is the number of failed checks.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from .coeffs import Lattice, PotentialSpec, exp_to_sine, make_potential, read_coeffs_csv, sine_to_exp, \
    write_coeffs_csv
from .harness import (WINDOW_RULES, ExperimentConfig, emit_report, run_rate_sweep, table_as_dict,
                      verify_suite)
from .operators import assemble_operator, index_window
from .projections import deviation_for

log = logging.getLogger("equiconv")

SLOPE_SLACK = 0.1


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(t) if not isinstance(t, str) else _floats(t)[0] for t in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    out = []
    for t in str(text).split(","):
        t = t.strip().lower()
        out.append(float("inf") if t in ("inf", "infinity") else float(t))
    return out


def _ints(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(t) for t in text]
    return [int(t) for t in str(text).split(",") if t.strip()]


def _common(p: argparse.ArgumentParser, potential: bool = True) -> None:
    p.add_argument("--config", type=Path, help="JSON file with the same keys as the flags")
    p.add_argument("--out", type=Path, help="output directory")
    if potential:
        p.add_argument("--bc", choices=["per+", "per-", "dir"])
        p.add_argument("--potential", help="family:key=val,... e.g. sobolev_tail:alpha=0.5")
        p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="equiconv", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="eigenvalues of the truncated operator")
    _common(p)
    p.add_argument("--k-max", type=int, help="largest mode index (default 32)")

    p = sub.add_parser("deviation", help="dump S_N, S_N^0 and the T_N + B_N split for one N")
    _common(p)
    p.add_argument("--n", type=int, help="spectral cutoff N")
    p.add_argument("--window-rule", choices=sorted(WINDOW_RULES))

    p = sub.add_parser("rates", help="sweep N and fit decay slopes")
    _common(p)
    p.add_argument("--n-list", help="comma separated, strictly increasing (default 8,16,32,64)")
    p.add_argument("--a", help="source exponent(s), comma separated")
    p.add_argument("--b", help="target exponent(s), comma separated; 'inf' allowed")
    p.add_argument("--grid", type=int, help="kernel grid size G (default 4 K_max)")
    p.add_argument("--window-rule", choices=sorted(WINDOW_RULES))
    p.add_argument("--format", action="append", choices=["csv", "svg"])
    p.add_argument("--gate", choices=["report", "enforce", "off"])
    p.add_argument("--workers", type=int)

    p = sub.add_parser("verify", help="run the identity and bracket checks")
    _common(p, potential=False)
    p.add_argument("--level", choices=["quick", "full"])

    p = sub.add_parser("convert", help="exponential <-> sine coefficients of Q")
    _common(p, potential=False)
    p.add_argument("--input", type=Path, help="CSV with columns index,re,im")
    p.add_argument("--to", choices=["sine", "exp"])
    p.add_argument("--window", type=int)
    return ap


def _merged(args: argparse.Namespace) -> dict:
    cfg: dict = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = {k.replace("-", "_"): v for k, v in json.load(fh).items()}
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command", "verbose"):
            cfg[k] = v
    return cfg


def _potential(cfg: dict) -> PotentialSpec:
    pot = cfg.get("potential", "mathieu")
    seed = int(cfg.get("seed", 0))
    if isinstance(pot, dict):
        spec, _ = PotentialSpec.from_config({"seed": seed, **pot})
        return spec
    return PotentialSpec.parse(pot, seed)


def cmd_spectrum(cfg: dict) -> int:
    bc = Lattice.parse(cfg.get("bc", "per+"))
    K = int(cfg.get("k_max", 32))
    spec = _potential(cfg)
    V, _ = make_potential(spec, bc, 2 * K)
    ev = assemble_operator(V, index_window(bc, K), spec.label).eigenvalues()
    rows = [(i, e.real, e.imag) for i, e in enumerate(ev)]
    if cfg.get("out"):
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "spectrum.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "re", "im"])
            w.writerows((i, repr(r), repr(m)) for i, r, m in rows)
    for i, r, m in rows[:20]:
        print(f"{i:4d} {r: .12f} {m: .3e}")
    return 0


def cmd_deviation(cfg: dict) -> int:
    bc = Lattice.parse(cfg.get("bc", "per+"))
    N = int(cfg.get("n", 8))
    spec = _potential(cfg)
    K = WINDOW_RULES[cfg.get("window_rule", "4N+8")](N)
    V, _ = make_potential(spec, bc, 2 * K)
    ps = deviation_for(V, bc, N, K, label=spec.label)
    meta = ps.metadata()
    print(json.dumps(meta, indent=2, default=str))
    if cfg.get("out"):
        for p in ps.dump(cfg["out"]):
            log.info("wrote %s", p)
    return 0


def rate_failures(table, cfg: ExperimentConfig) -> list[str]:
    """Slope checks where an exponent is predicted, trend checks where only convergence is."""
    bad = []
    mid = (cfg.n_list[0] * cfg.n_list[-1]) ** 0.5 if cfg.n_list else 2.0
    for a, b in table.pairs():
        gamma, why = table.predicted.get((a, b), (None, ""))
        # a log N / N bound has local log-log slope -1 + 1/log N
        slack = SLOPE_SLACK + (1.0 / math.log(mid) if "log N" in why else 0.0)
        fit = table.fits.get((a, b), {})
        if fit.get("zero"):
            continue
        if gamma is not None and fit.get("slope") is not None:
            if fit["slope"] > -gamma + slack:
                bad.append(f"slope {fit['slope']:.3f} at ({a}, {b}) above -{gamma:.3f} + {slack:.3f}")
        elif gamma is None and not table.trend(a, b)["endpoints"]:
            bad.append(f"norm at ({a}, {b}) did not decrease from N={cfg.n_list[0]} to N={cfg.n_list[-1]}")
    return bad


def cmd_rates(cfg: dict) -> int:
    a_list = _floats(cfg.get("a", 1.0))
    b_list = _floats(cfg.get("b", "inf"))
    if len(a_list) == 1 and len(b_list) > 1:
        a_list = a_list * len(b_list)
    if len(b_list) == 1 and len(a_list) > 1:
        b_list = b_list * len(a_list)
    if len(a_list) != len(b_list):
        raise SystemExit("--a and --b must have the same number of entries")
    spec = _potential(cfg)
    ec = ExperimentConfig(
        bc=cfg.get("bc", "per+"), potential=spec,
        n_list=_ints(cfg.get("n_list", "8,16,32,64")),
        pairs=list(zip(a_list, b_list)), grid=cfg.get("grid"),
        window_rule=cfg.get("window_rule", "4N+8"), gate=cfg.get("gate", "report"),
        workers=int(cfg.get("workers", 1)), potential_class=cfg.get("potential_class"),
        out=cfg.get("out"))
    table = run_rate_sweep(ec)
    for r in table.rows:
        print(f"N={r.N:4d} a={r.a:g} b={r.b:g} lower={r.lower:.6e} upper={r.upper:.6e} wiener={r.wiener:.6e}")
    for (a, b), fit in table.fits.items():
        gamma, why = table.predicted.get((a, b), (None, ""))
        s = "suppressed (zero norms)" if fit.get("zero") else (
            "n/a" if fit.get("slope") is None else f"{fit['slope']:.4f}")
        print(f"({a:g}, {b:g}) slope {s}; predicted {'-' if gamma is None else f'{-gamma:.4f}'} ({why})")
    if table.gate:
        g = table.gate
        print(f"convergence gate at N={g['N']}: K_max {g['K_max']} -> {g['K_alt']} moved norms by "
              f"{g['max_change']:.3%}, grid {g['grid']} -> {g['grid_alt']} by {g['max_grid_change']:.3%} "
              f"({'ok' if g['passed'] else 'WARNING: above 1% / 0.5%'})")
    bad = rate_failures(table, ec)
    for msg in bad:
        print(f"FAIL {msg}")
    if ec.out is not None:
        fmts = tuple(cfg.get("format") or ["csv"])
        emit_report(table, ec.out, formats=fmts)
        with open(Path(ec.out) / "rates.json", "w") as fh:
            json.dump(table_as_dict(table), fh, indent=2, default=str)
    return len(bad)


def cmd_verify(cfg: dict) -> int:
    report = verify_suite(cfg.get("level", "quick"), cfg.get("overrides"))
    for line in report.lines():
        print(line)
    if cfg.get("out"):
        emit_report(report, cfg["out"])
    return report.exit_code


def cmd_convert(cfg: dict) -> int:
    if not cfg.get("input"):
        raise SystemExit("convert needs --input")
    to = cfg.get("to", "sine")
    src = Path(cfg["input"])
    window = cfg.get("window")
    if to == "sine":
        res = exp_to_sine(read_coeffs_csv(src, Lattice.PER_PLUS, "Q"), window)
    else:
        res = sine_to_exp(read_coeffs_csv(src, Lattice.DIR, "Q"), window)
    out = Path(cfg.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    dest = out / f"{src.stem}_{to}.csv"
    write_coeffs_csv(res, dest)
    print(f"wrote {dest} ({len(res.entries)} entries, tail {res.tail:.3e})")
    return 0


COMMANDS = {"spectrum": cmd_spectrum, "deviation": cmd_deviation, "rates": cmd_rates,
            "verify": cmd_verify, "convert": cmd_convert}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.command](_merged(args))


if __name__ == "__main__":
    sys.exit(main())

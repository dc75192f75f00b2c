"""
Command line entry point ``aircomp-ia``.

Exit codes: 0 on success, 1 when an invariant check fails (details in the
CSV output and on stderr), 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import alignment as al
from .channel import ScalarMode, draw_channels
from .config import SimConfig, parse_config
from .errors import AircompIAError, ParseError, SizeOverflow, ValidationError
from .oracles import baseline_ia_only, baseline_tdma, lemma_trial_campaign
from .precoding import build_precoders, exponent_rows, precoder_rows
from .topology import Scheme, gamma_single, gamma_two, parity
from .transceiver import run_campaign

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("aircomp_ia")


def workers_from_env() -> int:
    try:
        return max(1, int(os.environ.get("AIRCOMP_IA_THREADS", "1")))
    except ValueError:
        return 1


def _fmt(v) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def write_csv(path: Path, cfg: SimConfig, header, rows) -> None:
    """Comment line with config hash and seed, header row, then ``rows``."""
    buf = io.StringIO()
    buf.write(f"# config_sha256={cfg.digest()} seed={cfg.seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def _value_cols(v, is_exact):
    if is_exact:
        f = Fraction(v)
        return (f.numerator, f.denominator)
    c = complex(v)
    return (repr(c.real), repr(c.imag))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------
def cmd_verify_alignment(cfg: SimConfig, out: Path) -> int:
    topo = cfg.topology
    scheme = cfg.scheme_enum
    T = al.blocklength(topo, cfg.n, scheme)
    sampled = cfg.sample_rows > 0
    if sampled:
        rows = sorted({0, T - 1} | {int(x) for x in _sample_rows(cfg.seed, T, cfg.sample_rows)})
        channels = draw_channels(topo, T, cfg.mode, cfg.params, cfg.seed, rows=rows)
    else:
        al.blocklength(topo, cfg.n, scheme, cap=cfg.max_columns)
        channels = draw_channels(topo, T, cfg.mode, cfg.params, cfg.seed)
    pre = build_precoders(topo, channels, cfg.n, cfg.seed, scheme, cfg.max_columns)
    failures = []
    dof = al.dof_accounting(topo, cfg.n, scheme)

    if sampled:
        cont = al.check_containment(pre, column_sample=cfg.column_sample)
        records = [(ell, T, pre.streams(ell), T - pre.streams(ell) if scheme is Scheme.SINGLE_V else
                    sum(b.w_columns for b in pre.blocks.values()), repr(cont[ell].residual), "NA", "NA",
                    al.RankVerdict.NOT_RUN.value, str(dof.fractions[ell])) for ell in topo.clusters]
        worst = {ell: cont[ell].residual for ell in topo.clusters}
    else:
        report = al.verify_alignment(pre, cfg.svd_tol, exact_max_columns=cfg.exact_max_columns)
        records = list(report.rows())
        worst = {r.ell: r.containment_residual for r in report.receivers}
        for r in report.receivers:
            if r.rank_exact is al.RankVerdict.DEFICIENT:
                failures.append(f"receiver {r.ell}: exact rank deficient")
            elif r.rank_exact is al.RankVerdict.NOT_RUN and not r.full_rank_float:
                failures.append(f"receiver {r.ell}: float rank {r.rank_float} < {r.useful_columns + r.interference_columns}")
        for msg in report.conditioning_events:
            print(f"conditioning event: {msg}", file=sys.stderr)
        for ell in topo.clusters:
            try:
                sigs = al.column_signatures(ell, pre)
            except SizeOverflow:
                continue
            if len(set(sigs)) != len(sigs):
                failures.append(f"receiver {ell}: repeated column signature")
    tol = 0.0 if cfg.mode.is_exact else cfg.containment_tol
    for ell, res in worst.items():
        if res > tol:
            failures.append(f"receiver {ell}: containment residual {res:.3e} > {tol:.1e}")

    write_csv(out / "alignment_report.csv", cfg, al.REPORT_HEADER, records)
    if cfg.dump:
        is_exact = cfg.mode.is_exact
        vh = ("num", "den") if is_exact else ("re", "im")
        write_csv(out / "channel.csv", cfg, ("ell", "q", "t") + vh,
                  ((ell, q, t + 1) + _value_cols(v, is_exact)
                   for ell in topo.clusters for q in topo.transmitters
                   for t, v in zip(channels.rows, channels.gain(ell, q))))
        write_csv(out / "precoders.csv", cfg, ("kind", "cluster", "q", "t") + vh,
                  (row[:4] + _value_cols(row[4], is_exact) for row in precoder_rows(pre)))
        width = max(b.gamma for b in pre.blocks.values())
        write_csv(out / "exponents.csv", cfg, ("matrix", "column") + tuple(f"e{i + 1}" for i in range(width)),
                  exponent_rows(pre))
    print(f"T={T} sum_dof_fraction={dof.sum_fraction} asymptotic_limit={dof.sum_limit}"
          + (" (asymmetric parity split)" if dof.asymmetric else ""))
    return _finish(failures)


def _sample_rows(seed, T, count):
    import numpy as np
    rng = np.random.default_rng([seed, 99])
    return rng.integers(0, T, size=min(count, T))


def cmd_simulate(cfg: SimConfig, out: Path) -> int:
    if cfg.mode.is_exact and not all(math.isinf(s) for s in cfg.snr):
        raise ValidationError("exact mode is noise-free; use snr = inf")
    spec = cfg.trial_spec()
    camp = run_campaign(spec, cfg.trials, cfg.snr, cfg.seed, workers_from_env())
    index = {}
    rows = []
    for r in camp.results:
        k = index.setdefault((r.seed,), len(index))
        if r.failure:
            rows.append((k, r.seed, _snr(r.snr_db), "NA", 0, -1))
            continue
        for ell in sorted(r.errors):
            rows.append((k, r.seed, _snr(r.snr_db), ell, r.streams[ell], r.errors[ell]))
    write_csv(out / "trials.csv", cfg, ("trial", "seed", "snr_db", "ell", "streams", "errors"), rows)
    write_csv(out / "campaign.csv", cfg, ("snr_db", "trials", "sum_error_rate", "ci95"),
              ((_snr(p.snr_db), p.trials, repr(p.sum_error_rate), repr(p.ci95)) for p in camp.points))
    failures = [f"trial seed {s}: {msg}" for s, msg in camp.failures]
    for p in camp.points:
        print(f"snr={_snr(p.snr_db)} trials={p.trials} sum_error_rate={p.sum_error_rate:.6g} ci95={p.ci95:.3g}")
        if math.isinf(p.snr_db) and p.error_events:
            failures.append(f"noise-free point has {p.error_events} erroneous trials")
    return _finish(failures)


def _snr(v):
    return "inf" if v is None or math.isinf(v) else repr(float(v))


def cmd_dof_table(cfg: SimConfig, out: Path) -> int:
    topo = cfg.topology
    scheme = cfg.scheme_enum
    rows = []
    for n in cfg.n_list or [cfg.n]:
        dof = al.dof_accounting(topo, n, scheme)
        if scheme is Scheme.SINGLE_V:
            blocks = [("V", n ** gamma_single(topo), 1)]
        else:
            gs = gamma_two(topo)
            blocks = [(f"V{p}", n ** gs[p], p) for p in (1, 2)]
        for name, useful, p in blocks:
            ell = next((e for e in topo.clusters if scheme is Scheme.SINGLE_V or parity(e) == p), None)
            if ell is None:
                continue
            rows.append((n, name, useful, dof.T, str(Fraction(useful, dof.T)), str(dof.limits[ell]),
                         str(dof.sum_fraction), str(dof.sum_limit)))
            print(f"n={n} {name}: {useful}/{dof.T} = {Fraction(useful, dof.T)} (limit {dof.limits[ell]}); "
                  f"sum {dof.sum_fraction} (limit {dof.sum_limit})")
    write_csv(out / "dof_table.csv", cfg,
              ("n", "block", "useful_cols", "T", "dof_fraction", "limit_per_rx", "sum_dof", "limit_sum"), rows)
    return EXIT_OK


def cmd_rank_oracle(cfg: SimConfig, out: Path) -> int:
    rows, failures = [], []
    for L in cfg.lemma_L:
        for seed in cfg.lemma_seeds:
            c = lemma_trial_campaign(L, cfg.lemma_trials, seed)
            rows.append((L, c.trials, str(c.fraction), seed))
            print(f"L={L} seed={seed} full_rank_fraction={c.fraction}")
            if c.fraction != 1:
                failures.append(f"L={L} seed={seed}: full-rank fraction {c.fraction}")
    write_csv(out / "lemma.csv", cfg, ("L", "trials", "full_rank_fraction", "seed"), rows)
    return _finish(failures)


def cmd_baseline(cfg: SimConfig, out: Path) -> int:
    topo = cfg.topology
    mode = cfg.mode
    reports = [
        baseline_tdma(topo, cfg.baseline_trials, cfg.seed, cfg.p, mode, cfg.params),
        baseline_ia_only(topo, cfg.baseline_trials, cfg.seed, cfg.n, cfg.p, mode, cfg.params),
    ]
    failures = []
    for b in reports:
        print(f"{b.scheme}: sum_dof={b.sum_dof} gain_vs_theorem={b.gain_vs_theorem}"
              + (f" recovered={b.recovered}/{b.simulated}" if b.simulated else ""))
        if b.simulated and b.recovered != b.simulated:
            failures.append(f"{b.scheme}: recovered {b.recovered}/{b.simulated} noise-free sums")
    write_csv(out / "baseline.csv", cfg, ("scheme", "K", "r", "sum_dof", "gain_vs_theorem"),
              ((b.scheme, b.K, b.r, str(b.sum_dof), str(b.gain_vs_theorem)) for b in reports))
    return _finish(failures)


def _finish(failures) -> int:
    for f in failures:
        print(f"FAIL: {f}", file=sys.stderr)
    return EXIT_INVARIANT if failures else EXIT_OK


COMMANDS = {
    "verify-alignment": cmd_verify_alignment,
    "simulate": cmd_simulate,
    "dof-table": cmd_dof_table,
    "rank-oracle": cmd_rank_oracle,
    "baseline": cmd_baseline,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aircomp-ia", description="Interference alignment for multi-cluster "
                                 "over-the-air computation: verification and simulation.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="flat key = value configuration file")
    ap.add_argument("--seed", type=int, help="master seed (overrides the config)")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--mode", choices=["float", "real", "exact"], help="scalar mode (overrides the config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        overrides = {"seed": args.seed, "out": args.out,
                     "mode": ScalarMode.parse(args.mode) if args.mode else None}
        cfg = parse_config(text, overrides)
    except (OSError, UnicodeDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, Path(cfg.out))
    except (SizeOverflow, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AircompIAError as exc:
        print(f"FAIL: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

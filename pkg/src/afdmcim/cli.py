"""Command-line entry point: ``afdmcim simulate|bound|compare|selftest``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .analysis import abep_profile_average
from .config import ConfigError, compare_configs, load_sim_config
from .detectors import SizingError
from .selftest import run_selftest
from .sim import SimConfig, noise_var, run_ber_sweep, write_ber_csv, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_SIZING, EXIT_SELFTEST = 0, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="afdmcim", description="GCIM-AFDM-SS BER simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--config", required=True, help="flat key = value experiment file")
        sp.add_argument("--out", required=True, help=out_help)
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--workers", type=int, help="worker processes for trial chunks")
        sp.add_argument("--quiet", action="store_true", help="no progress on stderr")

    def detection(sp, both=False):
        sp.add_argument("--detector", choices=["ml", "mrc"])
        eqs = ["mmse", "mf", "both"] if both else ["mmse", "mf"]
        sp.add_argument("--equalizer", choices=eqs,
                        help="MRC stage-1 equalizer" + ("; 'both' writes one CSV per choice" if both else ""))

    s = sub.add_parser("simulate", help="BER sweep for one configuration")
    common(s, "CSV path")
    detection(s, both=True)

    b = sub.add_parser("bound", help="union-bound ABEP averaged over delay/Doppler profiles")
    common(b, "CSV path")
    b.add_argument("--profiles", type=int, help="number of random profiles")

    c = sub.add_parser("compare", help="paired sweeps for several schemes at equal SE")
    common(c, "output directory, one CSV per scheme")
    detection(c)

    t = sub.add_parser("selftest", help="run the invariant checks")
    t.add_argument("--config", help="ignored; accepted for a uniform interface")
    t.add_argument("--out", help="optional report path")
    t.add_argument("--seed", type=int, default=0)
    return p


def _overrides(args) -> dict:
    kw = {}
    if args.seed is not None:
        kw["master_seed"] = args.seed
    if args.workers is not None:
        kw["workers"] = args.workers
    if getattr(args, "detector", None):
        kw["detector"] = args.detector
    if getattr(args, "equalizer", None) not in (None, "both"):
        kw["equalizer"] = args.equalizer
    if getattr(args, "profiles", None) is not None:
        kw["profiles"] = args.profiles
    return kw


def _apply(cfg: SimConfig, kw: dict) -> SimConfig:
    try:
        return cfg.with_(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _progress(args, label=""):
    if args.quiet:
        return None

    def report(pt):
        print(f"{label}{pt.snr_db:g} dB: {pt.bit_errors} errors in {pt.trials} trials, "
              f"BER {pt.ber:.3e}", file=sys.stderr)
    return report


def cmd_simulate(args) -> int:
    cfg = _apply(load_sim_config(args.config), _overrides(args))
    if args.equalizer == "both":
        out = Path(args.out)
        for eq in ("mmse", "mf"):
            pts = run_ber_sweep(cfg.with_(equalizer=eq), _progress(args, f"[{eq}] "))
            write_ber_csv(pts, out.with_name(f"{out.stem}_{eq}{out.suffix}"))
    else:
        write_ber_csv(run_ber_sweep(cfg, _progress(args)), args.out)
    return EXIT_OK


def cmd_bound(args) -> int:
    cfg = _apply(load_sim_config(args.config), _overrides(args))
    snr = np.array(cfg.snr_grid_db)
    L = cfg.L if cfg.channel_model == "ltv" else 1
    abep = abep_profile_average(cfg.system, cfg.params, noise_var(snr), L, cfg.delay_max,
                                cfg.alpha_max, cfg.fractional, cfg.profiles, cfg.master_seed)
    write_csv(args.out, ["snr_db", "abep"], zip(snr, abep))
    return EXIT_OK


def scheme_tag(cfg: SimConfig) -> str:
    s = cfg.system
    tag = f"{s.scheme.value}_{s.M}{s.constellation_kind.value}"
    return tag + (f"_{s.im_active}of{s.n}" if s.scheme.value == "IM_AFDM" else "")


def cmd_compare(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    kw = _overrides(args)
    cfgs = [_apply(c, kw) for c in compare_configs(text)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cfg in cfgs:
        tag = scheme_tag(cfg)
        write_ber_csv(run_ber_sweep(cfg, _progress(args, f"[{tag}] ")), out / f"{tag}.csv")
    return EXIT_OK


def cmd_selftest(args) -> int:
    lines = []

    def report(line):
        lines.append(line)
        print(line)
    ok = run_selftest(args.seed, report)
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    return EXIT_OK if ok else EXIT_SELFTEST


COMMANDS = {"simulate": cmd_simulate, "bound": cmd_bound, "compare": cmd_compare,
            "selftest": cmd_selftest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SizingError as exc:
        print(f"sizing error: {exc}", file=sys.stderr)
        return EXIT_SIZING


if __name__ == "__main__":
    sys.exit(main())

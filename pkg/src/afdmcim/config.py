"""Flat ``key = value`` experiment files.

Example::

    # Fig. 2 style run
    scheme = GCIM_AFDM_SS
    N = 4
    n = 2
    M = 4
    constellation = PSK
    L = 3
    fractional = false
    snr_db = 0, 5, 10, 15, 20
    seed = 7

Lines starting with ``#`` or ``;`` are comments.  Unknown keys are errors.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .mapping import GcimConfig, Scheme, spectral_efficiency
from .sim import SimConfig


class ConfigError(ValueError):
    pass


_INT = {"min_trials", "max_trials", "target_bit_errors", "seed", "chunk_size", "workers",
        "profiles", "max_candidates", "L", "tau_max", "alpha_max", "L_cpp"}
_FLOAT = {"c1", "c2", "csi_rho"}
_SYSTEM = {"scheme", "N", "n", "M", "constellation", "im_active"}
_OTHER = {"detector", "equalizer", "fractional", "channel", "snr_db", "compare"}
KNOWN_KEYS = _INT | _FLOAT | _SYSTEM | _OTHER

# Paper benchmarks at 1 bps/Hz for n = 4.
DEFAULT_COMPARE = "GCIM_AFDM_SS/4/PSK, AFDM/2/PSK, AFDM_SS/16/PSK, IM_AFDM/4/PSK/1"


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def parse_grid(v: str) -> tuple[float, ...]:
    """``"0, 5, 10"`` or ``"0:30:5"`` (inclusive stop)."""
    v = v.strip()
    try:
        if ":" in v:
            a, b, step = (float(t) for t in v.split(":"))
            if step <= 0:
                raise ConfigError("grid step must be positive")
            count = int(round((b - a) / step)) + 1
            return tuple(round(a + k * step, 10) for k in range(count))
        return tuple(float(t) for t in v.replace(";", ",").split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"bad SNR grid {v!r}: {exc}") from None


def read_pairs(text: str) -> dict[str, str]:
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",), delimiters=("=",))
    cp.optionxform = str  # keep key case: N and n differ
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    pairs = dict(cp["run"])
    unknown = sorted(set(pairs) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    return pairs


def system_from_pairs(pairs: dict[str, str]) -> GcimConfig:
    try:
        return GcimConfig(
            N=int(pairs.get("N", 8)),
            n=int(pairs.get("n", 4)),
            M=int(pairs.get("M", 4)),
            constellation_kind=pairs.get("constellation", "PSK").upper(),
            scheme=pairs.get("scheme", "GCIM_AFDM_SS").upper(),
            im_active=int(pairs.get("im_active", 1)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def sim_from_pairs(pairs: dict[str, str]) -> SimConfig:
    system = system_from_pairs(pairs)
    kw = {}
    try:
        for k in _INT & pairs.keys():
            kw[k] = int(pairs[k])
        for k in _FLOAT & pairs.keys():
            kw[k] = float(pairs[k])
        if "seed" in kw:
            kw["master_seed"] = kw.pop("seed")
        if "fractional" in pairs:
            kw["fractional"] = _bool(pairs["fractional"])
        if "channel" in pairs:
            kw["channel_model"] = pairs["channel"].strip().lower()
        if "detector" in pairs:
            kw["detector"] = pairs["detector"].strip().lower()
        if "equalizer" in pairs:
            kw["equalizer"] = pairs["equalizer"].strip().lower()
        if "snr_db" in pairs:
            kw["snr_grid_db"] = parse_grid(pairs["snr_db"])
        return SimConfig(system, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_sim_config(text: str) -> SimConfig:
    return sim_from_pairs(read_pairs(text))


def load_sim_config(path) -> SimConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_sim_config(text)


def parse_scheme_entry(entry: str, N: int, n: int) -> GcimConfig:
    """``SCHEME/M/KIND[/n_active]`` -> configuration sharing ``N`` and ``n``."""
    parts = [p.strip() for p in entry.split("/")]
    if len(parts) < 3:
        raise ConfigError(f"scheme entry {entry!r} needs SCHEME/M/KIND")
    try:
        scheme = Scheme(parts[0].upper())
        return GcimConfig(N=N, n=n, M=int(parts[1]), constellation_kind=parts[2].upper(),
                          scheme=scheme, im_active=int(parts[3]) if len(parts) > 3 else 1)
    except ValueError as exc:
        raise ConfigError(f"bad scheme entry {entry!r}: {exc}") from None


def compare_configs(text: str) -> list[SimConfig]:
    """One :class:`SimConfig` per compared scheme; all must share the SE."""
    pairs = read_pairs(text)
    base = sim_from_pairs(pairs)
    spec = pairs.get("compare", DEFAULT_COMPARE)
    systems = [parse_scheme_entry(e, base.system.N, base.system.n) for e in spec.split(",") if e.strip()]
    if not systems:
        raise ConfigError("compare list is empty")
    se = [spectral_efficiency(s) for s in systems]
    if max(se) - min(se) > 1e-12:
        listing = ", ".join(f"{s.scheme.value}: {v:g}" for s, v in zip(systems, se))
        raise ConfigError(f"compared schemes differ in spectral efficiency ({listing})")
    try:
        return [base.with_(system=s) for s in systems]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

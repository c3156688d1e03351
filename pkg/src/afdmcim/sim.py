"""Monte Carlo BER engine.

Every trial owns a generator seeded from ``(master_seed, snr_index,
trial_index)`` and draws, in this order: path gains/delays/Dopplers, the
time-domain noise, the CSI error, and finally the payload bits.  Channel and
noise therefore coincide across schemes, detectors and CSI settings that share
``N``, ``L`` and the prefix length, which makes comparisons paired.

Trials are processed in fixed-size chunks.  The chunk size does not depend on
the worker count, so serial and parallel sweeps give identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import paths_from_draws, resolve_duplicates, time_path_matrices
from .daft import DaftParams, build_daft_matrix, cpp_phase, default_c1, default_c2
from .detectors import ML_MAX_CANDIDATES, Detector, EqualizerKind, detect_batch
from .mapping import GcimConfig

Z95 = 1.959963984540054


@dataclass(frozen=True)
class SimConfig:
    system: GcimConfig
    detector: Detector = Detector.ML
    equalizer: EqualizerKind = EqualizerKind.MMSE
    L: int = 3
    tau_max: int = 1
    alpha_max: int = 1
    fractional: bool = True
    channel_model: str = "ltv"  # "ltv" or "awgn" (single unit-gain path)
    c1: float | None = None
    c2: float | None = None
    L_cpp: int | None = None
    csi_rho: float = 0.0
    snr_grid_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    min_trials: int = 1000
    max_trials: int = 10_000_000
    target_bit_errors: int = 200
    master_seed: int = 0
    chunk_size: int = 256
    workers: int = 1
    profiles: int = 50
    max_candidates: int = ML_MAX_CANDIDATES

    def __post_init__(self):
        object.__setattr__(self, "detector", Detector(self.detector))
        object.__setattr__(self, "equalizer", EqualizerKind(self.equalizer))
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        if self.channel_model not in ("ltv", "awgn"):
            raise ValueError(f"unknown channel model {self.channel_model!r}")
        if not self.snr_grid_db:
            raise ValueError("SNR grid is empty")
        if any(b <= a for a, b in zip(self.snr_grid_db, self.snr_grid_db[1:])):
            raise ValueError("SNR grid must be strictly increasing")
        if not 1 <= self.min_trials <= self.max_trials:
            raise ValueError("need 1 <= min_trials <= max_trials")
        if self.target_bit_errors < 1 or self.chunk_size < 1 or self.workers < 1:
            raise ValueError("target_bit_errors, chunk_size and workers must be positive")
        if not 0.0 <= self.csi_rho <= 1.0:
            raise ValueError("csi_rho must lie in [0, 1]")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.L < 1 or self.tau_max < 0 or self.alpha_max < 0:
            raise ValueError("invalid channel dimensions")
        if self.prefix_len <= self.delay_max or self.prefix_len >= self.system.N:
            raise ValueError("prefix length must exceed tau_max and be smaller than N")
        self.params  # validates the chirp rates

    @property
    def delay_max(self) -> int:
        return 0 if self.channel_model == "awgn" else self.tau_max

    @property
    def prefix_len(self) -> int:
        return self.delay_max + 1 if self.L_cpp is None else self.L_cpp

    @property
    def params(self) -> DaftParams:
        c1 = default_c1(self.alpha_max, self.system.N) if self.c1 is None else self.c1
        c2 = default_c2() if self.c2 is None else self.c2
        return DaftParams(self.system.N, c1, c2)

    @property
    def bits_per_frame(self) -> int:
        return self.system.bits_per_frame

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    trials: int
    bit_errors: int
    ber: float
    ci_half_width: float

    @classmethod
    def from_counts(cls, snr_db: float, trials: int, bit_errors: int, bits_per_trial: int) -> "BerPoint":
        nbits = trials * bits_per_trial
        ber = bit_errors / nbits
        return cls(snr_db, trials, bit_errors, ber, Z95 * math.sqrt(ber * (1 - ber) / nbits))

    @property
    def lo(self) -> float:
        return max(0.0, self.ber - self.ci_half_width)

    @property
    def hi(self) -> float:
        return self.ber + self.ci_half_width


@dataclass
class TrialDraws:
    gains: np.ndarray  # (B, L)
    delays: np.ndarray
    dopplers: np.ndarray
    noise: np.ndarray  # (B, N + L_cpp), unit variance
    csi_error: np.ndarray  # (B, L), variance 1/L
    bits: np.ndarray  # (B, b)
    extra: dict = field(default_factory=dict)


class TrialStreams:
    """Per-trial random streams for one ``(master_seed, snr_index)`` pair.

    A Philox key is derived once from the pair; trial ``t`` uses counter
    ``(0, 0, 0, t)``, so each trial has its own stream and trials can be
    generated in any order.  The returned generator is shared and reset on
    every call.
    """

    def __init__(self, master_seed: int, snr_index: int):
        key = np.random.SeedSequence([master_seed, snr_index]).generate_state(2, np.uint64)
        self._bitgen = np.random.Philox(key=key)
        self._state = self._bitgen.state
        self._gen = np.random.Generator(self._bitgen)

    def rng(self, trial_index: int) -> np.random.Generator:
        st = self._state
        st["state"]["counter"] = np.array([0, 0, 0, trial_index], dtype=np.uint64)
        self._bitgen.state = st
        return self._gen


def trial_rng(master_seed: int, snr_index: int, trial_index: int) -> np.random.Generator:
    return TrialStreams(master_seed, snr_index).rng(trial_index)


def draw_trials(cfg: SimConfig, snr_index: int, trials) -> TrialDraws:
    """Raw per-trial draws: ``2L`` path normals, then ``2(N + L_cpp)`` noise
    normals and ``2L`` CSI-error normals in one call; ``2L - 1`` path
    uniforms and ``b`` bit uniforms in a second call.
    """
    N, Lc, b = cfg.system.N, cfg.prefix_len, cfg.bits_per_frame
    ltv = cfg.channel_model == "ltv"
    L = cfg.L if ltv else 1
    B = len(trials)
    k = N + Lc
    nz = 2 * L + 2 * k + 2 * L
    nu = 2 * L - 1 + b
    z = np.empty((B, nz))
    u = np.empty((B, nu))
    streams = TrialStreams(cfg.master_seed, snr_index)
    for r, t in enumerate(trials):
        rng = streams.rng(int(t))
        z[r] = rng.standard_normal(nz)
        u[r] = rng.random(nu)
    if ltv:
        gains, delays, dopplers = paths_from_draws(
            z[:, :2 * L], u[:, :2 * L - 1], cfg.tau_max, cfg.alpha_max, cfg.fractional
        )
        if not cfg.fractional or cfg.alpha_max == 0:
            for r, t in enumerate(trials):
                key = set(zip(delays[r], dopplers[r]))
                if len(key) < L:
                    rng = streams.rng(int(t))
                    rng.standard_normal(nz)
                    rng.random(nu)
                    resolve_duplicates(delays[r], dopplers[r], rng, cfg.tau_max, cfg.alpha_max)
    else:
        gains = np.ones((B, 1), dtype=complex)
        delays = np.zeros((B, 1), dtype=np.int64)
        dopplers = np.zeros((B, 1))
    o = 2 * L
    noise = np.sqrt(0.5) * (z[:, o:o + k] + 1j * z[:, o + k:o + 2 * k])
    o += 2 * k
    eps = np.sqrt(0.5 / L) * (z[:, o:o + L] + 1j * z[:, o + L:o + 2 * L])
    bits = (u[:, 2 * L - 1:] < 0.5).astype(np.int8)
    return TrialDraws(gains, delays, dopplers, noise, eps, bits)


def noise_var(snr_db: float) -> float:
    """``N0`` for unit per-element symbol energy (SNR = Es/N0)."""
    return 10.0 ** (-snr_db / 10.0)


def transmit_receive(cfg: SimConfig, draws: TrialDraws, N0: float):
    """Modulate, pass through the channel and demodulate a batch of frames.

    Returns ``(y, H_rx)``: received DAFT-domain frames and the effective
    channel matrices available to the receiver.
    """
    params = cfg.params
    N, Lc = params.N, cfg.prefix_len
    A = build_daft_matrix(params).A
    layout = cfg.system.layout
    X = layout.map_bits(draws.bits)
    S = X @ A.conj()  # rows are A^H x
    S_cpp = np.concatenate([S[:, N - Lc:] * cpp_phase(Lc, params), S], axis=1)
    m = np.arange(-Lc, N)
    B = X.shape[0]
    R = np.zeros_like(S_cpp)
    rows = np.arange(B)[:, None]
    for l in range(draws.gains.shape[1]):
        src = np.arange(N + Lc)[None, :] - draws.delays[:, l:l + 1]
        vals = np.where(src >= 0, S_cpp[rows, np.maximum(src, 0)], 0.0)
        dop = np.exp(-2j * np.pi * draws.dopplers[:, l:l + 1] * m[None, :] / N)
        R += draws.gains[:, l:l + 1] * vals * dop
    R += np.sqrt(N0) * draws.noise
    Y = R[:, Lc:] @ A.T  # rows are A r

    if cfg.csi_rho > 0:
        rho = cfg.csi_rho
        g_rx = np.sqrt(1 - rho) * draws.gains + np.sqrt(rho) * draws.csi_error
    else:
        g_rx = draws.gains
    T = time_path_matrices(draws.delays, draws.dopplers, params)  # (B, L, N, N)
    H_time = np.einsum("bl,blij->bij", g_rx, T)
    H_rx = A @ H_time @ A.conj().T
    return Y, H_rx


def simulate_trials(cfg: SimConfig, snr_index: int, snr_db: float, trials):
    """Run a batch of trials; returns ``(tx_bits, rx_bits)`` each ``(B, b)``."""
    draws = draw_trials(cfg, snr_index, trials)
    N0 = noise_var(snr_db)
    Y, H_rx = transmit_receive(cfg, draws, N0)
    rx = detect_batch(Y, H_rx, cfg.system.layout, cfg.detector, cfg.equalizer, N0, cfg.max_candidates)
    return draws.bits, rx


def run_trial(cfg: SimConfig, snr_db: float, trial_index: int, snr_index: int | None = None):
    """One end-to-end frame; returns ``(tx_bits, rx_bits, bit_errors)``."""
    if snr_index is None:
        if snr_db not in cfg.snr_grid_db:
            raise ValueError("snr_db is not on the grid; pass snr_index explicitly")
        snr_index = cfg.snr_grid_db.index(snr_db)
    tx, rx = simulate_trials(cfg, snr_index, snr_db, [trial_index])
    return tx[0], rx[0], int(np.sum(tx[0] != rx[0]))


def chunk_errors(cfg: SimConfig, snr_index: int, snr_db: float, start: int, stop: int) -> np.ndarray:
    tx, rx = simulate_trials(cfg, snr_index, snr_db, range(start, stop))
    return np.sum(tx != rx, axis=1).astype(np.int64)


def _stop_point(errors: np.ndarray, done: int, cum: int, cfg: SimConfig) -> int | None:
    """Trial count at which the stopping rule fires inside this chunk, if any."""
    c = cum + np.cumsum(errors)
    n = done + 1 + np.arange(errors.size)
    hit = np.nonzero(((c >= cfg.target_bit_errors) & (n >= cfg.min_trials)) | (n >= cfg.max_trials))[0]
    return None if hit.size == 0 else int(hit[0]) + 1


def _sweep_point(cfg: SimConfig, snr_index: int, snr_db: float, pool) -> BerPoint:
    done, cum = 0, 0
    cs = cfg.chunk_size
    while True:
        starts = [done + k * cs for k in range(cfg.workers if pool else 1)]
        starts = [s for s in starts if s < cfg.max_trials]
        spans = [(s, min(s + cs, cfg.max_trials)) for s in starts]
        if pool is None:
            results = [chunk_errors(cfg, snr_index, snr_db, a, b) for a, b in spans]
        else:
            futs = [pool.submit(chunk_errors, cfg, snr_index, snr_db, a, b) for a, b in spans]
            results = [f.result() for f in futs]
        for errs in results:
            k = _stop_point(errs, done, cum, cfg)
            if k is not None:
                return BerPoint.from_counts(
                    snr_db, done + k, cum + int(errs[:k].sum()), cfg.bits_per_frame
                )
            done += errs.size
            cum += int(errs.sum())


def run_ber_sweep(cfg: SimConfig, progress=None) -> list[BerPoint]:
    """BER at every grid point, stopping each point per the trial/error targets."""
    points = []
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for i, snr in enumerate(cfg.snr_grid_db):
            pt = _sweep_point(cfg, i, snr, pool)
            points.append(pt)
            if progress is not None:
                progress(pt)
    finally:
        if pool is not None:
            pool.shutdown()
    return points


def paired_error_counts(cfgs: list[SimConfig], snr_index: int, snr_db: float, trials: int) -> np.ndarray:
    """Per-trial bit errors for several configurations on the same trial seeds.

    Returns ``(len(cfgs), trials)``.
    """
    out = np.zeros((len(cfgs), trials), dtype=np.int64)
    for j, c in enumerate(cfgs):
        for s in range(0, trials, c.chunk_size):
            e = min(s + c.chunk_size, trials)
            out[j, s:e] = chunk_errors(c, snr_index, snr_db, s, e)
    return out


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6g}"


def write_csv(path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def write_ber_csv(points: list[BerPoint], path) -> None:
    write_csv(
        path,
        ["snr_db", "trials", "bit_errors", "ber", "ci"],
        [(p.snr_db, p.trials, p.bit_errors, p.ber, p.ci_half_width) for p in points],
    )

"""Doubly dispersive (delay + Doppler) channel for AFDM frames.

Each path has a complex gain, an integer delay in samples and a Doppler shift
normalised to the subcarrier spacing.  The time-domain model is::

    r[n] = sum_l h_l * s[n - tau_l] * exp(-j*2*pi*nu_l*n/N) + w[n]

applied to the CPP-extended block; after the prefix is stripped this equals
``H s`` with ``H = sum_l h_l * Gamma_l @ Delta_l @ Pi**tau_l``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .daft import DaftParams, TimeSignal, build_daft_matrix


@dataclass(frozen=True)
class PathSpec:
    gain: complex
    delay: int
    doppler: float

    @property
    def integer_doppler(self) -> int:
        return int(np.ceil(self.doppler - 0.5))

    @property
    def fractional_doppler(self) -> float:
        return self.doppler - self.integer_doppler


@dataclass(frozen=True)
class ChannelRealization:
    paths: tuple[PathSpec, ...]
    N: int
    L_cpp: int

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        if not self.paths:
            raise ValueError("channel needs at least one path")
        if any(p.delay < 0 for p in self.paths):
            raise ValueError("delays must be nonnegative")
        if self.L_cpp <= self.tau_max or self.L_cpp >= self.N:
            raise ValueError(
                f"prefix length {self.L_cpp} must exceed the maximum delay {self.tau_max} and be < N"
            )
        keys = [(p.delay, p.doppler) for p in self.paths]
        if len(set(keys)) != len(keys):
            raise ValueError("paths sharing a delay must have distinct Doppler shifts")

    @property
    def L(self) -> int:
        return len(self.paths)

    @property
    def tau_max(self) -> int:
        return max(p.delay for p in self.paths)

    @property
    def gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.paths], dtype=complex)

    @property
    def delays(self) -> np.ndarray:
        return np.array([p.delay for p in self.paths], dtype=np.int64)

    @property
    def dopplers(self) -> np.ndarray:
        return np.array([p.doppler for p in self.paths], dtype=float)

    def with_gains(self, gains) -> "ChannelRealization":
        paths = tuple(
            PathSpec(complex(g), p.delay, p.doppler) for g, p in zip(gains, self.paths)
        )
        return ChannelRealization(paths, self.N, self.L_cpp)


@dataclass(frozen=True, eq=False)
class EffectiveChannel:
    H_eff: np.ndarray  # (N, N)
    per_path: np.ndarray  # (L, N, N), H_l = A Gamma_l Delta_l Pi^tau_l A^H


@dataclass(frozen=True)
class CsiModel:
    rho: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    z = rng.standard_normal((2,) + tuple(np.atleast_1d(shape)))
    return np.sqrt(var / 2.0) * (z[0] + 1j * z[1])


def paths_from_draws(z: np.ndarray, u: np.ndarray, tau_max: int, alpha_max: int,
                     fractional: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map raw draws to path parameters; works on a leading batch axis.

    ``z`` holds ``2L`` standard normals and ``u`` holds ``2L - 1`` uniforms per
    realization.  Gains are CN(0, 1/L); the first path sits at delay 0 and the
    others are uniform on ``0..tau_max``.  Fractional Dopplers follow the
    Jakes draw ``alpha_max * cos(theta)``; integer Dopplers are uniform on
    ``-alpha_max..alpha_max``.
    """
    L = z.shape[-1] // 2
    gains = np.sqrt(0.5 / L) * (z[..., :L] + 1j * z[..., L:])
    delays = np.zeros(z.shape[:-1] + (L,), dtype=np.int64)
    delays[..., 1:] = np.floor(u[..., :L - 1] * (tau_max + 1))
    v = u[..., L - 1:]
    if fractional:
        dopplers = alpha_max * np.cos(np.pi * (2 * v - 1))
    else:
        dopplers = np.floor(v * (2 * alpha_max + 1)) - alpha_max
    return gains, delays, dopplers


def resolve_duplicates(delays: np.ndarray, dopplers: np.ndarray, rng: np.random.Generator,
                       tau_max: int, alpha_max: int) -> None:
    """Redraw, in place, integer paths that repeat an earlier (delay, Doppler) pair."""
    L = delays.size
    if (tau_max + 1) * (2 * alpha_max + 1) < L:
        raise ValueError("not enough distinct integer delay/Doppler pairs for L paths")
    seen = set()
    for l in range(L):
        while (delays[l], dopplers[l]) in seen:
            w = rng.random(2)
            if l > 0:
                delays[l] = np.floor(w[0] * (tau_max + 1))
            dopplers[l] = np.floor(w[1] * (2 * alpha_max + 1)) - alpha_max
        seen.add((delays[l], dopplers[l]))


def draw_paths(rng: np.random.Generator, L: int, tau_max: int, alpha_max: int,
               fractional: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw gains, delays and Dopplers for one realization (see :func:`paths_from_draws`).

    Whenever the Dopplers are integers (integer mode, or ``alpha_max = 0``)
    repeated (delay, Doppler) pairs are redrawn.
    """
    z = rng.standard_normal(2 * L)
    u = rng.random(2 * L - 1)
    gains, delays, dopplers = paths_from_draws(z, u, tau_max, alpha_max, fractional)
    if not fractional or alpha_max == 0:
        resolve_duplicates(delays, dopplers, rng, tau_max, alpha_max)
    return gains, delays, dopplers


def sample_channel(L: int, tau_max: int, alpha_max: int, fractional: bool = True,
                   rng_seed=None, N: int = 8, L_cpp: int | None = None) -> ChannelRealization:
    """Random realization with CN(0, 1/L) gains and Jakes-distributed Dopplers.

    ``rng_seed`` may be an int, a seed sequence or a ``Generator``.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if tau_max < 0 or tau_max >= N:
        raise ValueError(f"tau_max must lie in [0, N), got {tau_max}")
    if L_cpp is None:
        L_cpp = tau_max + 1
    rng = np.random.default_rng(rng_seed)
    gains, delays, dopplers = draw_paths(rng, L, tau_max, alpha_max, fractional)
    paths = tuple(PathSpec(complex(g), int(t), float(v)) for g, t, v in zip(gains, delays, dopplers))
    return ChannelRealization(paths, N, L_cpp)


def cpp_gamma(delays, params: DaftParams) -> np.ndarray:
    """Diagonals of the CPP matrices, shape ``delays.shape + (N,)``."""
    N = params.N
    tau = np.asarray(delays)[..., None]
    n = np.arange(N)
    phase = np.exp(-2j * np.pi * np.mod(params.c1 * (N * N - 2 * N * (tau - n)), 1.0))
    return np.where(n < tau, phase, 1.0 + 0j)


def time_path_matrices(delays, dopplers, params: DaftParams) -> np.ndarray:
    """``Gamma_l Delta_l Pi^tau_l`` for every path, shape ``delays.shape + (N, N)``."""
    N = params.N
    delays = np.asarray(delays, dtype=np.int64)
    dopplers = np.asarray(dopplers, dtype=float)
    n = np.arange(N)
    diag = cpp_gamma(delays, params) * np.exp(-2j * np.pi * dopplers[..., None] * n / N)
    out = np.zeros(delays.shape + (N, N), dtype=complex)
    cols = (n - delays[..., None]) % N
    np.put_along_axis(out, cols[..., None], diag[..., None], axis=-1)
    return out


def build_time_matrix(ch: ChannelRealization, params: DaftParams) -> np.ndarray:
    if ch.N != params.N:
        raise ValueError("channel and DAFT sizes differ")
    T = time_path_matrices(ch.delays, ch.dopplers, params)
    return np.einsum("l,lij->ij", ch.gains, T)


def daft_path_matrices(delays, dopplers, params: DaftParams) -> np.ndarray:
    A = build_daft_matrix(params).A
    T = time_path_matrices(delays, dopplers, params)
    return A @ T @ A.conj().T


def build_effective_matrix(ch: ChannelRealization, params: DaftParams) -> EffectiveChannel:
    if ch.N != params.N:
        raise ValueError("channel and DAFT sizes differ")
    per_path = daft_path_matrices(ch.delays, ch.dopplers, params)
    H_eff = np.einsum("l,lij->ij", ch.gains, per_path)
    per_path.setflags(write=False)
    H_eff.setflags(write=False)
    return EffectiveChannel(H_eff, per_path)


def apply_channel_time(s_cpp: TimeSignal, ch: ChannelRealization, noise_var: float = 0.0,
                       rng=None) -> TimeSignal:
    """Per-sample convolution with Doppler phase plus AWGN over the prefixed block.

    Sample index 0 is the first sample after the prefix; prefix samples have
    negative indices.  Samples needed from before the prefix are taken as
    zero and only affect outputs that are discarded with the prefix.
    """
    if not s_cpp.prefixed:
        raise ValueError("channel expects a CPP-extended signal")
    N, L_cpp = ch.N, ch.L_cpp
    if len(s_cpp) != N + L_cpp:
        raise ValueError(f"expected {N + L_cpp} samples, got {len(s_cpp)}")
    s = s_cpp.samples
    m = np.arange(-L_cpp, N)
    r = np.zeros(N + L_cpp, dtype=complex)
    for p in ch.paths:
        shifted = np.zeros_like(s)
        shifted[p.delay:] = s[:s.size - p.delay]
        r += p.gain * shifted * np.exp(-2j * np.pi * p.doppler * m / N)
    if noise_var > 0:
        r = r + complex_normal(np.random.default_rng(rng), N + L_cpp, noise_var)
    return TimeSignal(r, prefixed=True)


def corrupt_csi(H_true: EffectiveChannel, ch: ChannelRealization, rho: float,
                rng=None) -> EffectiveChannel:
    """Receiver-side channel with gains ``sqrt(1-rho) h + sqrt(rho) e``, e ~ CN(0, 1/L)."""
    CsiModel(rho)
    if rho == 0:
        return H_true
    eps = complex_normal(np.random.default_rng(rng), ch.L, 1.0 / ch.L)
    g_hat = np.sqrt(1 - rho) * ch.gains + np.sqrt(rho) * eps
    H_eff = np.einsum("l,lij->ij", g_hat, H_true.per_path)
    return EffectiveChannel(H_eff, H_true.per_path)


def save_channel(ch: ChannelRealization, path) -> None:
    lines = [f"# N={ch.N} L_cpp={ch.L_cpp}", "# gain_re gain_im delay doppler"]
    for p in ch.paths:
        lines.append(f"{p.gain.real!r} {p.gain.imag!r} {p.delay} {p.doppler!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_channel(path) -> ChannelRealization:
    header = {}
    paths = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    header[k] = int(v)
            continue
        re_, im_, tau, nu = line.split()
        paths.append(PathSpec(complex(float(re_), float(im_)), int(tau), float(nu)))
    if "N" not in header or "L_cpp" not in header:
        raise ValueError("channel file lacks the N / L_cpp header")
    return ChannelRealization(tuple(paths), header["N"], header["L_cpp"])

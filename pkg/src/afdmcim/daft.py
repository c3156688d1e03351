"""Discrete affine Fourier transform (DAFT) and chirp-periodic prefix.

The DAFT matrix factors as ``A = L2 @ F @ L1`` where ``F`` is the unitary DFT
and ``Li = diag(exp(-j*2*pi*ci*n**2))``.  Modulation is ``s = A^H x`` and
demodulation ``y = A r``.  Everything is dense; sizes here are small.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

GOLDEN_C2 = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class DaftParams:
    """Chirp subcarrier count and the two chirp rates."""

    N: int
    c1: float
    c2: float = GOLDEN_C2

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 2 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 2, got {self.N!r}")
        if not (self.c1 >= 0 and self.c2 >= 0):
            raise ValueError(f"chirp rates must be nonnegative, got c1={self.c1}, c2={self.c2}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "c1", float(self.c1))
        object.__setattr__(self, "c2", float(self.c2))


@dataclass(frozen=True, eq=False)
class DaftMatrix:
    A: np.ndarray
    lam2: np.ndarray  # diagonal entries of L2
    F: np.ndarray
    lam1: np.ndarray  # diagonal entries of L1

    @property
    def AH(self) -> np.ndarray:
        return self.A.conj().T


@dataclass(frozen=True, eq=False)
class TimeSignal:
    samples: np.ndarray
    prefixed: bool = False

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 1:
            raise ValueError("time signal must be one-dimensional")
        if not np.all(np.isfinite(s)):
            raise ValueError("time signal has non-finite samples")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True, eq=False)
class DaftFrame:
    values: np.ndarray = field()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 1:
            raise ValueError("DAFT frame must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise ValueError("DAFT frame has non-finite entries")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


def default_c1(alpha_max: int, N: int) -> float:
    """Chirp rate ``(2*(alpha_max + 1) + 1) / (2N)``.

    The ``+1`` guards against fractional Doppler spreading into a neighbouring
    path's DAFT-domain support.
    """
    if N <= 0:
        raise ValueError(f"N must be positive, got {N}")
    if alpha_max < 0:
        raise ValueError(f"alpha_max must be nonnegative, got {alpha_max}")
    return (2 * (alpha_max + 1) + 1) / (2 * N)


def default_c2() -> float:
    return GOLDEN_C2


def chirp_diag(c: float, N: int) -> np.ndarray:
    n = np.arange(N, dtype=float)
    # n**2 * c reduced mod 1 before exponentiating keeps phases accurate for large N
    return np.exp(-2j * np.pi * np.mod(c * n * n, 1.0))


def dft_matrix(N: int) -> np.ndarray:
    mn = np.outer(np.arange(N), np.arange(N)) % N
    return np.exp(-2j * np.pi * mn / N) / np.sqrt(N)


@lru_cache(maxsize=64)
def build_daft_matrix(params: DaftParams) -> DaftMatrix:
    N = params.N
    lam1 = chirp_diag(params.c1, N)
    lam2 = chirp_diag(params.c2, N)
    F = dft_matrix(N)
    A = lam2[:, None] * F * lam1[None, :]
    for arr in (A, lam1, lam2, F):
        arr.setflags(write=False)
    return DaftMatrix(A=A, lam2=lam2, F=F, lam1=lam1)


def idaft(x: DaftFrame | np.ndarray, params: DaftParams) -> TimeSignal:
    """Map DAFT-domain symbols onto chirps: ``s = A^H x``."""
    xv = x.values if isinstance(x, DaftFrame) else np.asarray(x, dtype=complex)
    if xv.shape != (params.N,):
        raise ValueError(f"expected length-{params.N} frame, got shape {xv.shape}")
    return TimeSignal(build_daft_matrix(params).AH @ xv)


def daft(r: TimeSignal | np.ndarray, params: DaftParams) -> DaftFrame:
    if isinstance(r, TimeSignal):
        if r.prefixed:
            raise ValueError("strip the chirp-periodic prefix before the DAFT")
        rv = r.samples
    else:
        rv = np.asarray(r, dtype=complex)
    if rv.shape != (params.N,):
        raise ValueError(f"expected length-{params.N} signal, got shape {rv.shape}")
    return DaftFrame(build_daft_matrix(params).A @ rv)


def cpp_phase(L_cpp: int, params: DaftParams) -> np.ndarray:
    """Phase factors applied to ``s[N+n]`` for prefix positions ``n = -L_cpp..-1``."""
    N = params.N
    n = np.arange(-L_cpp, 0)
    return np.exp(-2j * np.pi * np.mod(params.c1 * (N * N + 2 * N * n), 1.0))


def add_cpp(s: TimeSignal | np.ndarray, L_cpp: int, params: DaftParams) -> TimeSignal:
    sv = s.samples if isinstance(s, TimeSignal) else np.asarray(s, dtype=complex)
    if isinstance(s, TimeSignal) and s.prefixed:
        raise ValueError("signal already carries a prefix")
    N = params.N
    if sv.shape != (N,):
        raise ValueError(f"expected length-{N} signal, got shape {sv.shape}")
    if not 0 <= L_cpp < N:
        raise ValueError(f"prefix length must satisfy 0 <= L_cpp < N, got {L_cpp}")
    prefix = sv[N - L_cpp:] * cpp_phase(L_cpp, params)
    return TimeSignal(np.concatenate([prefix, sv]), prefixed=True)


def remove_cpp(r: TimeSignal, L_cpp: int, N: int | None = None) -> TimeSignal:
    if not r.prefixed:
        raise ValueError("signal is not prefixed")
    body = len(r) - L_cpp
    if L_cpp < 0 or body < 2 or body & (body - 1):
        raise ValueError(f"length {len(r)} inconsistent with prefix length {L_cpp}")
    if N is not None and len(r) != N + L_cpp:
        raise ValueError(f"expected length {N + L_cpp}, got {len(r)}")
    return TimeSignal(r.samples[L_cpp:].copy(), prefixed=False)

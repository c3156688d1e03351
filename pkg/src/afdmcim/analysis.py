"""Pairwise error probability and union-bound BER for ML detection.

With ``y = Upsilon(x) h + w`` and ``Upsilon(x) = [H_1 x | ... | H_L x]`` the
conditional PEP is ``Q(sqrt(Theta / (2 N0)))`` where
``Theta = h^H Gamma h`` and ``Gamma = D^H D``, ``D = Upsilon(x) - Upsilon(x_hat)``.
Averaging the two-exponential Q approximation over i.i.d. CN(0, 1/L) gains
gives a product over the eigenvalues of ``Gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .channel import daft_path_matrices, draw_paths
from .daft import DaftParams
from .detectors import SizingError
from .mapping import FrameLayout, GcimConfig, int_to_bits

RANK_TOL = 1e-10
MAX_ABEP_BITS = 12


@dataclass(frozen=True, eq=False)
class PepInputs:
    x: np.ndarray
    x_hat: np.ndarray
    per_path: np.ndarray  # (L, N, N)
    N0: float

    def __post_init__(self):
        x = np.asarray(getattr(self.x, "values", self.x), dtype=complex)
        xh = np.asarray(getattr(self.x_hat, "values", self.x_hat), dtype=complex)
        H = np.asarray(self.per_path, dtype=complex)
        if H.ndim != 3 or H.shape[1:] != (x.size, x.size) or x.shape != xh.shape:
            raise ValueError("dimension mismatch between frames and per-path matrices")
        if np.array_equal(x, xh):
            raise ValueError("x and x_hat must differ")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_hat", xh)
        object.__setattr__(self, "per_path", H)

    @property
    def L(self) -> int:
        return self.per_path.shape[0]

    @property
    def gamma(self) -> np.ndarray:
        D = upsilon_matrix(self.x - self.x_hat, self.per_path)
        return D.conj().T @ D


@dataclass(frozen=True, eq=False)
class PepResult:
    eigenvalues: np.ndarray  # nonzero eigenvalues of Gamma, with multiplicity
    rank: int
    pep: float


def upsilon_matrix(x, per_path_H) -> np.ndarray:
    """``N x L`` matrix whose column ``l`` is ``H_l @ x``."""
    x = np.asarray(getattr(x, "values", x), dtype=complex)
    H = np.asarray(per_path_H)
    if H.ndim != 3 or H.shape[1:] != (x.size, x.size):
        raise ValueError(f"per-path matrices of shape {H.shape} do not match frame length {x.size}")
    return (H @ x).T


def q_function(v):
    return 0.5 * erfc(np.asarray(v, dtype=float) / np.sqrt(2.0))


def q_approx(v):
    """``Q(v) ~ exp(-v^2/2)/12 + exp(-2 v^2/3)/4``."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("q_approx is defined for nonnegative arguments")
    out = np.exp(-v * v / 2) / 12 + np.exp(-2 * v * v / 3) / 4
    return float(out) if out.ndim == 0 else out


def theta(inputs: PepInputs, h) -> float:
    D = upsilon_matrix(inputs.x - inputs.x_hat, inputs.per_path)
    return float(np.sum(np.abs(D @ np.asarray(h, dtype=complex)) ** 2))


def pep_conditional(inputs: PepInputs, h, approx: bool = False) -> float:
    if inputs.N0 <= 0:
        raise ValueError("N0 must be positive")
    arg = np.sqrt(theta(inputs, h) / (2 * inputs.N0))
    return float(q_approx(arg) if approx else q_function(arg))


def gamma_eigenvalues(gamma: np.ndarray) -> np.ndarray:
    """Eigenvalues with those below ``RANK_TOL * max`` set to zero (last axis)."""
    w = np.linalg.eigvalsh(gamma)
    top = np.max(w, axis=-1, keepdims=True)
    return np.where(w > RANK_TOL * top, w, 0.0)


def _pep_from_eigs(zeta: np.ndarray, N0, L: int) -> np.ndarray:
    """Averaged two-term PEP; ``zeta`` is ``(..., L)``, ``N0`` broadcasts against ``...``."""
    N0 = np.asarray(N0, dtype=float)[..., None]
    lam1 = 1.0 / (4 * N0)
    lam2 = 1.0 / (3 * N0)
    t1 = np.prod(1.0 / (1.0 + lam1 * zeta / L), axis=-1)
    t2 = np.prod(1.0 / (1.0 + lam2 * zeta / L), axis=-1)
    return t1 / 12 + t2 / 4


def pep_unconditional(inputs: PepInputs) -> PepResult:
    if inputs.N0 <= 0:
        raise ValueError("N0 must be positive")
    w = gamma_eigenvalues(inputs.gamma)
    nz = np.sort(w[w > 0])[::-1]
    pep = float(_pep_from_eigs(nz, inputs.N0, inputs.L))
    return PepResult(nz, int(nz.size), pep)


def pep_high_snr(inputs: PepInputs) -> float:
    """High-SNR form ``(L N0)^R (4^R/12 + 3^R/4) / prod(zeta)``."""
    res = pep_unconditional(inputs)
    R = res.rank
    if R == 0:
        raise ValueError("Gamma has no nonzero eigenvalue")
    L = inputs.L
    return float((L * inputs.N0) ** R * (4.0 ** R / 12 + 3.0 ** R / 4) / np.prod(res.eigenvalues))


def enumerate_frames(layout: FrameLayout) -> tuple[np.ndarray, np.ndarray]:
    """Every frame the layout can emit, indexed by its bit word: ``(X (2^b, N), bits)``."""
    b = layout.bits_per_frame
    if b > MAX_ABEP_BITS:
        raise SizingError(f"union bound over 2^{b} frames exceeds the 2^{MAX_ABEP_BITS} limit")
    words = np.arange(1 << b, dtype=np.int64)
    bits = int_to_bits(words, b)
    return layout.map_bits(bits), bits


def abep_upper_bound(cfg: GcimConfig, per_path_H, N0, chunk: int = 1 << 16):
    """Union bound on the ML bit error rate for fixed per-path matrices.

    ``N0`` may be a scalar or an array; the result has the same shape.
    The expectation is over the path gains only.
    """
    layout = cfg.layout
    X, bits = enumerate_frames(layout)
    H = np.asarray(per_path_H, dtype=complex)
    L = H.shape[0]
    N0 = np.asarray(N0, dtype=float)
    if np.any(N0 <= 0):
        raise ValueError("N0 must be positive")
    K, b = X.shape[0], layout.bits_per_frame
    U = np.einsum("lij,kj->kil", H, X)  # Upsilon for every frame, (K, N, L)
    iu, ju = np.triu_indices(K, k=1)
    n0 = N0.reshape(-1)
    partial = [[] for _ in n0]
    for s in range(0, iu.size, chunk):
        i, j = iu[s:s + chunk], ju[s:s + chunk]
        D = U[i] - U[j]
        zeta = gamma_eigenvalues(np.conj(np.swapaxes(D, 1, 2)) @ D)
        ham = np.sum(bits[i] != bits[j], axis=1)
        for t, v in enumerate(n0):
            partial[t].append(_pep_from_eigs(zeta, v, L) * ham)
    # ordered pairs: PEP and Hamming distance are symmetric
    total = np.array([2.0 * math.fsum(np.concatenate(p)) for p in partial])
    out = total / (b * 2.0 ** b)
    return float(out[0]) if N0.ndim == 0 else out.reshape(N0.shape)


def abep_profile_average(cfg: GcimConfig, params: DaftParams, N0, L: int, tau_max: int,
                         alpha_max: int, fractional: bool = True, profiles: int = 50,
                         seed: int = 0) -> np.ndarray:
    """Bound averaged over random delay/Doppler profiles.

    Profiles are drawn like the simulated channels; only their delays and
    Dopplers matter because the gains are averaged analytically.
    """
    N0 = np.asarray(N0, dtype=float)
    acc = np.zeros(N0.shape)
    for p in range(profiles):
        rng = np.random.default_rng([seed, p])
        _, delays, dopplers = draw_paths(rng, L, tau_max, alpha_max, fractional)
        H = daft_path_matrices(delays, dopplers, params)
        acc += abep_upper_bound(cfg, H, N0)
    return acc / profiles

"""Fast invariant checks run by ``afdmcim selftest``."""

from __future__ import annotations

import numpy as np

from .analysis import PepInputs, gamma_eigenvalues, upsilon_matrix
from .channel import apply_channel_time, build_effective_matrix, build_time_matrix, sample_channel
from .daft import DaftParams, add_cpp, build_daft_matrix, daft, default_c1, idaft, remove_cpp
from .detectors import ml_detect, mrc_detect
from .mapping import GcimConfig, demap_gcim, int_to_bits, map_bits_gcim, walsh_codebook


def _unitarity(rng) -> float:
    worst = 0.0
    for N in (2, 4, 8, 16, 64):
        for _ in range(10):
            p = DaftParams(N, rng.uniform(0, 1), rng.uniform(0, 1))
            A = build_daft_matrix(p).A
            x = rng.standard_normal(N) + 1j * rng.standard_normal(N)
            worst = max(worst, np.linalg.norm(A @ A.conj().T - np.eye(N)),
                        np.max(np.abs(daft(idaft(x, p), p).values - x)))
    return worst


def _pipeline(rng) -> float:
    worst = 0.0
    for _ in range(20):
        ch = sample_channel(int(rng.integers(1, 5)), 2, 1, True, rng, N=8)
        p = DaftParams(8, default_c1(1, 8))
        x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        r = apply_channel_time(add_cpp(idaft(x, p), ch.L_cpp, p), ch)
        y = daft(remove_cpp(r, ch.L_cpp), p).values
        eff = build_effective_matrix(ch, p)
        worst = max(worst, np.max(np.abs(y - eff.H_eff @ x)),
                    np.max(np.abs(build_time_matrix(ch, p) @ idaft(x, p).samples - remove_cpp(r, ch.L_cpp).samples)))
    return worst


def _quadratic_form(rng) -> float:
    worst = 0.0
    p = DaftParams(8, default_c1(1, 8))
    for _ in range(100):
        ch = sample_channel(3, 2, 1, True, rng, N=8)
        H = build_effective_matrix(ch, p).per_path
        x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        xh = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        G = PepInputs(x, xh, H, 1.0).gamma
        w, V = np.linalg.eigh(G)
        lhs = np.real(h.conj() @ G @ h)
        rhs = np.sum(w * np.abs(V.conj().T @ h) ** 2)
        D = upsilon_matrix(x - xh, H)
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)),
                    abs(np.sum(np.abs(D @ h) ** 2) - lhs) / max(1.0, abs(lhs)))
        if gamma_eigenvalues(G).min() < 0:
            return np.inf
    return worst


def _mapping() -> float:
    for n in (2, 4, 8):
        C = walsh_codebook(n).codes.astype(np.int64)
        if not np.array_equal(C @ C.T, n * np.eye(n, dtype=np.int64)):
            return 1.0
    for n, M in ((2, 2), (4, 4), (8, 2)):
        cfg = GcimConfig(n, n, M)
        b = cfg.bits_per_frame
        for w in range(1 << b):
            bits = int_to_bits(w, b)
            _, sel = map_bits_gcim(bits, cfg)
            if not np.array_equal(demap_gcim(sel, cfg), bits):
                return 1.0
    return 0.0


def _ml_brute_force(rng) -> float:
    cfg = GcimConfig(4, 2, 2)
    p = DaftParams(4, default_c1(1, 4))
    b = cfg.bits_per_frame
    cands = np.array([cfg.layout.map_bits(int_to_bits(w, b)) for w in range(1 << b)])
    words = [int_to_bits(w, b) for w in range(1 << b)]
    mism = 0
    for _ in range(30):
        H = build_effective_matrix(sample_channel(2, 1, 1, True, rng, N=4, L_cpp=2), p).H_eff
        y = H @ cands[rng.integers(len(cands))] + 0.5 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
        best = int(np.argmin(np.sum(np.abs(y - cands @ H.T) ** 2, axis=1)))
        mism += not np.array_equal(ml_detect(y, H, cfg).bits, words[best])
    return float(mism)


def _noiseless(rng) -> float:
    cfg = GcimConfig(8, 4, 4)
    p = DaftParams(8, default_c1(1, 8))
    errs = 0
    for _ in range(20):
        H = build_effective_matrix(sample_channel(3, 1, 1, True, rng, N=8), p).H_eff
        bits = rng.integers(0, 2, cfg.bits_per_frame)
        y = H @ map_bits_gcim(bits, cfg)[0].values
        errs += np.sum(ml_detect(y, H, cfg).bits != bits)
        errs += np.sum(mrc_detect(y, H, cfg, noise_var=1e-12).bits != bits)
    return float(errs)


CHECKS = (
    ("daft unitarity and round trip", lambda r: _unitarity(r), 1e-10),
    ("time/DAFT pipeline equivalence", lambda r: _pipeline(r), 1e-10),
    ("quadratic form equals eigen sum", lambda r: _quadratic_form(r), 1e-10),
    ("codebook and mapper bijectivity", lambda r: _mapping(), 0.0),
    ("ML matches brute force", lambda r: _ml_brute_force(r), 0.0),
    ("noiseless ML and MRC recovery", lambda r: _noiseless(r), 0.0),
)


def run_selftest(seed: int = 0, report=print) -> bool:
    """Run every check; returns ``True`` when all pass."""
    ok = True
    for name, fn, tol in CHECKS:
        val = fn(np.random.default_rng(seed))
        passed = bool(val <= tol)
        ok &= passed
        report(f"{'PASS' if passed else 'FAIL'} {name}: {val:.3g} (tol {tol:g})")
    return ok

"""ML and two-stage (despread, then restricted ML) detectors.

Batch functions work on stacks of frames ``Y (B, N)`` and channels
``H (B, N, N)`` and return per-block decisions ``(pattern, symbols)`` in the
:class:`~afdmcim.mapping.FrameLayout` convention.  The single-frame functions
wrap them.  All argmin/argmax reductions keep the lowest index on ties.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .daft import DaftFrame
from .mapping import (
    Codebook,
    Constellation,
    FrameLayout,
    GcimConfig,
    Scheme,
    SubblockSelection,
)

ML_MAX_CANDIDATES = 1 << 24
_CHUNK_ELEMS = 1 << 21


class SizingError(ValueError):
    """Raised when an exhaustive search exceeds the configured limit."""


class EqualizerKind(str, enum.Enum):
    MATCHED_FILTER = "mf"
    MMSE = "mmse"


class Detector(str, enum.Enum):
    ML = "ml"
    MRC = "mrc"


@dataclass
class DetectionResult:
    selections: list[SubblockSelection]
    bits: np.ndarray
    metric: float
    ops: dict = field(default_factory=dict)


def _digits(k: np.ndarray, base: int, width: int) -> np.ndarray:
    """Base-``base`` digits of ``k``, most significant first."""
    out = np.empty(k.shape + (width,), dtype=np.int64)
    for j in range(width - 1, -1, -1):
        out[..., j] = k % base
        k = k // base
    return out


def ml_candidate_count(layout: FrameLayout) -> int:
    return layout.block_candidates ** layout.n_blocks


def _block_images(H: np.ndarray, layout: FrameLayout) -> np.ndarray:
    """``H`` applied to every block candidate in every block position: ``(B, G, T, N)``."""
    vec = layout.block_table[0]  # (T, bs)
    B, N, _ = H.shape
    G, bs = layout.n_blocks, layout.block_size
    Hb = np.swapaxes(H.reshape(B, N, G, bs), 1, 2)  # (B, G, N, bs)
    return np.swapaxes(np.matmul(Hb, vec.T), 2, 3)


def _ml_metrics(Y: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``||y - sum_g W[g, t_g]||^2 - ||y||^2`` for every block combination.

    Expanded into per-block terms and pairwise cross terms so that only
    ``(B, T, T)`` products are formed; result is ``(B, T**G)`` in
    lexicographic order (first block most significant).
    """
    B, G, T, _ = W.shape
    WH = np.conj(np.swapaxes(W, 2, 3))  # (B, G, N, T)
    lin = (np.abs(W) ** 2).sum(axis=-1)
    lin -= 2 * np.real(np.matmul(Y.conj()[:, None, None, :], np.swapaxes(W, 2, 3)))[:, :, 0, :]
    total = np.zeros((B,) + (T,) * G)
    for g in range(G):
        idx = [1] * G
        idx[g] = T
        total += lin[:, g].reshape((B,) + tuple(idx))
        for h in range(g + 1, G):
            cross = 2 * np.real(np.matmul(W[:, g], WH[:, h]))
            idx2 = [1] * G
            idx2[g] = T
            idx2[h] = T
            total += cross.reshape((B,) + tuple(idx2))
    return total.reshape(B, -1)


def ml_detect_batch(Y: np.ndarray, H: np.ndarray, layout: FrameLayout,
                    max_candidates: int = ML_MAX_CANDIDATES):
    """Exhaustive search of ``||y - H x||^2`` over every frame the layout can emit.

    Candidates are ordered lexicographically by per-block candidate index,
    first block most significant.  Returns ``(pattern (B, G), symbols
    (B, G, n_sym), metric (B,))``.
    """
    K = ml_candidate_count(layout)
    if K > max_candidates:
        raise SizingError(f"ML search over {K} candidates exceeds the limit {max_candidates}")
    B = Y.shape[0]
    W = _block_images(H, layout)
    sub = max(1, _CHUNK_ELEMS // K)
    best_k = np.empty(B, dtype=np.int64)
    best = np.empty(B)
    for a in range(0, B, sub):
        m = _ml_metrics(Y[a:a + sub], W[a:a + sub])
        j = np.argmin(m, axis=1)
        best_k[a:a + sub] = j
        best[a:a + sub] = m[np.arange(j.size), j]
    best += np.sum(np.abs(Y) ** 2, axis=1)
    dig = _digits(best_k, layout.block_candidates, layout.n_blocks)
    _, pat, sym, _ = layout.block_table
    return pat[dig], sym[dig], np.maximum(best, 0.0)


def equalize(Y: np.ndarray, H: np.ndarray, kind: EqualizerKind | str, noise_var: float) -> np.ndarray:
    """Matched filter ``H^H y`` or MMSE ``(H^H H + N0 I)^-1 H^H y``."""
    kind = EqualizerKind(kind)
    HH = np.conj(np.swapaxes(H, 1, 2))
    z = np.matmul(HH, Y[..., None])
    if kind is EqualizerKind.MATCHED_FILTER:
        return z[..., 0]
    if noise_var is None:
        raise ValueError("MMSE equalization needs the noise variance")
    N = H.shape[-1]
    R = np.matmul(HH, H) + noise_var * np.eye(N)
    try:
        return np.linalg.solve(R, z)[..., 0]
    except np.linalg.LinAlgError:
        return np.stack([np.linalg.lstsq(r, zz, rcond=None)[0][:, 0] for r, zz in zip(R, z)])


def despread_metrics(Ybar: np.ndarray, layout: FrameLayout) -> np.ndarray:
    """Branch energies ``||P_k^H ybar_g||^2``, shape ``(B, G, P)``.

    For Walsh patterns this is ``|sum_k c_{i,k}^* ybar_k|^2`` per code ``i``.
    """
    B = Ybar.shape[0]
    blocks = Ybar.reshape(B, layout.n_blocks, layout.block_size)
    corr = np.einsum("pbs,ugb->ugps", layout.patterns.conj(), blocks)
    return np.sum(np.abs(corr) ** 2, axis=-1)


def restricted_ml_batch(Y: np.ndarray, H: np.ndarray, layout: FrameLayout, pat: np.ndarray,
                        noise_var: float | None, max_candidates: int = ML_MAX_CANDIDATES):
    """Symbol search with the per-block patterns held fixed.

    Falls back to MMSE-equalized per-symbol slicing when ``M**(G*n_sym)``
    exceeds ``max_candidates``.
    """
    B, N = Y.shape
    G, bs, ns = layout.n_blocks, layout.block_size, layout.n_sym
    pts = layout.constellation.points
    M = pts.size
    # basis (B, N, G*ns): column (g, s) is pattern column s of block g, embedded in the frame
    basis = np.zeros((B, G, bs, G, ns), dtype=complex)
    P = layout.patterns[pat]  # (B, G, bs, ns)
    for g in range(G):
        basis[:, g, :, g, :] = P[:, g]
    basis = basis.reshape(B, N, G * ns)
    HB = np.matmul(H, basis)
    S = G * ns
    K = M ** S
    if K > max_candidates:
        HBH = np.conj(np.swapaxes(HB, 1, 2))
        R = np.matmul(HBH, HB)
        if noise_var:
            R = R + noise_var * np.eye(S)
        est = np.linalg.solve(R, np.matmul(HBH, Y[..., None]))[..., 0]
        sym = np.argmin(np.abs(est[..., None] - pts) ** 2, axis=-1)
        x = np.matmul(basis, pts[sym][..., None])[..., 0]
        r = Y - np.matmul(H, x[..., None])[..., 0]
        return sym.reshape(B, G, ns), np.sum(np.abs(r) ** 2, axis=1), K
    chunk = max(1, min(K, _CHUNK_ELEMS // max(1, B * N)))
    best = np.full(B, np.inf)
    best_k = np.zeros(B, dtype=np.int64)
    for start in range(0, K, chunk):
        k = np.arange(start, min(start + chunk, K), dtype=np.int64)
        D = pts[_digits(k, M, S)]  # (Kc, S)
        cand = np.matmul(HB, D.T[None])  # (B, N, Kc)
        d = Y[:, :, None] - cand
        m = np.sum(d.real ** 2 + d.imag ** 2, axis=1)
        j = np.argmin(m, axis=1)
        mj = m[np.arange(B), j]
        better = mj < best
        best[better] = mj[better]
        best_k[better] = start + j[better]
    return _digits(best_k, M, S).reshape(B, G, ns), best, K


def mrc_detect_batch(Y: np.ndarray, H: np.ndarray, layout: FrameLayout,
                     equalizer: EqualizerKind | str = EqualizerKind.MMSE,
                     noise_var: float | None = None,
                     max_candidates: int = ML_MAX_CANDIDATES):
    """Stage 1: equalize and pick each block's pattern by largest despread energy.
    Stage 2: exhaustive symbol search with those patterns fixed.
    """
    Ybar = equalize(Y, H, equalizer, noise_var)
    branch = despread_metrics(Ybar, layout)
    pat = np.argmax(branch, axis=-1)
    sym, metric, _ = restricted_ml_batch(Y, H, layout, pat, noise_var, max_candidates)
    return pat, sym, metric


def _selections(layout: FrameLayout, pat, sym) -> list[SubblockSelection]:
    pts = layout.constellation.points
    return [SubblockSelection(int(p), complex(pts[s[0]]), int(s[0])) for p, s in zip(pat, sym)]


def _prepare(y, H_eff, cfg: GcimConfig, codebook, constellation):
    if cfg.scheme is not Scheme.GCIM_AFDM_SS:
        raise ValueError("GCIM detectors need a GCIM_AFDM_SS configuration; use detect_baseline")
    if codebook is not None and codebook.n != cfg.n:
        raise ValueError("codebook size does not match n")
    if constellation is not None and constellation.M != cfg.M:
        raise ValueError("constellation order does not match M")
    yv = y.values if isinstance(y, DaftFrame) else np.asarray(y, dtype=complex)
    H = np.asarray(H_eff, dtype=complex)
    if yv.shape != (cfg.N,) or H.shape != (cfg.N, cfg.N):
        raise ValueError("frame / channel dimensions do not match N")
    return yv[None], H[None]


def ml_detect(y, H_eff, cfg: GcimConfig, codebook: Codebook | None = None,
              constellation: Constellation | None = None,
              max_candidates: int = ML_MAX_CANDIDATES) -> DetectionResult:
    """Joint search over all ``(n*M)**G`` code-index / symbol combinations."""
    Y, H = _prepare(y, H_eff, cfg, codebook, constellation)
    layout = cfg.layout
    pat, sym, metric = ml_detect_batch(Y, H, layout, max_candidates)
    return DetectionResult(
        _selections(layout, pat[0], sym[0]),
        layout.decisions_to_bits(pat[0], sym[0]),
        float(metric[0]),
        {"candidates": ml_candidate_count(layout)},
    )


def mrc_detect(y, H_eff, cfg: GcimConfig, codebook: Codebook | None = None,
               constellation: Constellation | None = None,
               eq: EqualizerKind | str = EqualizerKind.MMSE, noise_var: float | None = None,
               max_candidates: int = ML_MAX_CANDIDATES) -> DetectionResult:
    Y, H = _prepare(y, H_eff, cfg, codebook, constellation)
    layout = cfg.layout
    M, G = layout.constellation.M, layout.n_blocks
    if M ** G > max_candidates:
        raise SizingError(f"stage-2 search over {M ** G} candidates exceeds the limit {max_candidates}")
    pat, sym, metric = mrc_detect_batch(Y, H, layout, eq, noise_var, max_candidates)
    ops = {
        # one correlator branch per (subblock, code), i.e. N in total
        "stage1_branches": G * layout.n_patterns,
        "stage1_compares": G * (layout.n_patterns - 1),
        "stage2_candidates": M ** G,
    }
    return DetectionResult(
        _selections(layout, pat[0], sym[0]),
        layout.decisions_to_bits(pat[0], sym[0]),
        float(metric[0]),
        ops,
    )


def detect_batch(Y, H, layout: FrameLayout, detector: Detector | str = Detector.ML,
                 equalizer: EqualizerKind | str = EqualizerKind.MMSE,
                 noise_var: float | None = None,
                 max_candidates: int = ML_MAX_CANDIDATES) -> np.ndarray:
    """Detect a batch of frames of any scheme; returns bits ``(B, b)``.

    For ML, layouts whose full search exceeds ``max_candidates`` but which
    have a single pattern (plain AFDM, AFDM-SS) fall back to the restricted
    search, which itself degrades to MMSE per-symbol slicing when needed.
    """
    detector = Detector(detector)
    if detector is Detector.ML:
        if ml_candidate_count(layout) <= max_candidates:
            pat, sym, _ = ml_detect_batch(Y, H, layout, max_candidates)
            return layout.decisions_to_bits(pat, sym)
        if layout.n_patterns > 1:
            raise SizingError(
                f"ML search over {ml_candidate_count(layout)} candidates exceeds the limit {max_candidates}"
            )
        pat = np.zeros((Y.shape[0], layout.n_blocks), dtype=np.int64)
        sym, _, _ = restricted_ml_batch(Y, H, layout, pat, noise_var, max_candidates)
        return layout.decisions_to_bits(pat, sym)
    pat, sym, _ = mrc_detect_batch(Y, H, layout, equalizer, noise_var, max_candidates)
    return layout.decisions_to_bits(pat, sym)


def detect_baseline(y, H_eff, cfg: GcimConfig, constellation: Constellation | None = None,
                    method: Detector | str = Detector.ML, noise_var: float | None = None,
                    equalizer: EqualizerKind | str = EqualizerKind.MMSE,
                    max_candidates: int = ML_MAX_CANDIDATES) -> np.ndarray:
    if cfg.scheme is Scheme.GCIM_AFDM_SS:
        raise ValueError("detect_baseline handles AFDM, AFDM_SS and IM_AFDM only")
    if constellation is not None and constellation.M != cfg.M:
        raise ValueError("constellation order does not match M")
    yv = y.values if isinstance(y, DaftFrame) else np.asarray(y, dtype=complex)
    H = np.asarray(H_eff, dtype=complex)
    bits = detect_batch(yv[None], H[None], cfg.layout, method, equalizer, noise_var, max_candidates)
    return bits[0]

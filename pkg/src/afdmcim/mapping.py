"""Bit mapping for GCIM-AFDM-SS and the baseline AFDM schemes.

Every scheme is described by a :class:`FrameLayout`: the frame is split into
equal blocks, and each block carries ``x_block = P[k] @ d`` where ``P[k]`` is
one of a small set of dispersion patterns chosen by index bits and ``d`` is a
vector of constellation symbols.  For GCIM-AFDM-SS the patterns are the
Walsh-Hadamard codes, for IM-AFDM they are scaled selections of active
subcarriers, and for plain AFDM / AFDM-SS there is a single pattern.

Bit order inside a block is index bits first, then symbol labels, all
MSB-first.  Indices are 0-based throughout.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .daft import DaftFrame


class Scheme(str, enum.Enum):
    GCIM_AFDM_SS = "GCIM_AFDM_SS"
    AFDM = "AFDM"
    AFDM_SS = "AFDM_SS"
    IM_AFDM = "IM_AFDM"


class ConstellationKind(str, enum.Enum):
    PSK = "PSK"
    QAM = "QAM"


def _is_pow2(v: int) -> bool:
    return v >= 1 and not v & (v - 1)


@dataclass(frozen=True)
class GcimConfig:
    """System dimensions for one scheme.

    ``n`` is the subblock length (spreading length for the spread schemes,
    IM group size for IM-AFDM) and ``G = N // n``.  ``im_active`` is the
    number of active subcarriers per group and only matters for IM-AFDM.
    """

    N: int
    n: int
    M: int
    constellation_kind: ConstellationKind = ConstellationKind.PSK
    scheme: Scheme = Scheme.GCIM_AFDM_SS
    im_active: int = 1
    G: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "constellation_kind", ConstellationKind(self.constellation_kind))
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not _is_pow2(self.N) or self.N < 2:
            raise ValueError(f"N must be a power of two >= 2, got {self.N}")
        if not _is_pow2(self.n) or self.n > self.N:
            raise ValueError(f"n must be a power of two not exceeding N, got {self.n}")
        if not _is_pow2(self.M):
            raise ValueError(f"M must be a power of two, got {self.M}")
        G = self.N // self.n
        if self.G is not None and self.G != G:
            raise ValueError(f"N = n*G violated: N={self.N}, n={self.n}, G={self.G}")
        object.__setattr__(self, "G", G)
        if self.scheme is Scheme.IM_AFDM:
            if not 1 <= self.im_active <= self.n:
                raise ValueError(f"IM-AFDM needs 1 <= n' <= n, got n'={self.im_active}")
        if spectral_efficiency(self) <= 0:
            raise ValueError("configuration carries no bits")

    @property
    def bits_per_frame(self) -> int:
        return self.layout.bits_per_frame

    @cached_property
    def layout(self) -> "FrameLayout":
        return build_layout(self)


@dataclass(frozen=True, eq=False)
class Codebook:
    codes: np.ndarray  # (n, n) of +-1, row i is code i

    @property
    def n(self) -> int:
        return self.codes.shape[0]


@dataclass(frozen=True, eq=False)
class Constellation:
    points: np.ndarray  # (M,) complex, unit average energy
    labels: np.ndarray  # (M,) int, Gray label of each point

    @property
    def M(self) -> int:
        return self.points.size

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.M))

    @cached_property
    def index_of_label(self) -> np.ndarray:
        inv = np.empty(self.M, dtype=np.int64)
        inv[self.labels] = np.arange(self.M)
        return inv

    def min_distance(self) -> float:
        if self.M < 2:
            return np.inf
        d = np.abs(self.points[:, None] - self.points[None, :])
        return float(d[~np.eye(self.M, dtype=bool)].min())


@dataclass(frozen=True)
class SubblockSelection:
    code_index: int
    symbol: complex
    symbol_index: int


@lru_cache(maxsize=None)
def walsh_codebook(n: int) -> Codebook:
    """Sylvester-ordered Walsh-Hadamard codes of length ``n``."""
    if not _is_pow2(n):
        raise ValueError(f"codebook size must be a power of two, got {n}")
    H = np.ones((1, 1), dtype=np.int64)
    while H.shape[0] < n:
        H = np.block([[H, H], [H, -H]])
    H.setflags(write=False)
    return Codebook(H)


def gray(v):
    return v ^ (v >> 1)


@lru_cache(maxsize=None)
def build_constellation(M: int, kind: ConstellationKind | str = ConstellationKind.PSK) -> Constellation:
    """Gray-labelled unit-energy PSK or square QAM.

    QPSK is rotated by pi/4; other PSK orders start at angle 0.
    """
    kind = ConstellationKind(kind)
    if not _is_pow2(M):
        raise ValueError(f"constellation order must be a power of two, got {M}")
    if kind is ConstellationKind.PSK:
        t = np.arange(M)
        rot = np.pi / 4 if M == 4 else 0.0
        points = np.exp(1j * (2 * np.pi * t / M + rot))
        labels = gray(t)
    else:
        k = int(np.log2(M))
        if M < 4 or k % 2:
            raise ValueError(f"square QAM needs M = 4**k, got {M}")
        side = 1 << (k // 2)
        levels = 2 * np.arange(side) - (side - 1)
        ii, qq = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
        ii, qq = ii.ravel(), qq.ravel()
        points = levels[ii] + 1j * levels[qq]
        points = points / np.sqrt(np.mean(np.abs(points) ** 2))
        labels = (gray(ii) << (k // 2)) | gray(qq)
    points = points.astype(complex)
    labels = np.asarray(labels, dtype=np.int64)
    points.setflags(write=False)
    labels.setflags(write=False)
    return Constellation(points, labels)


def bits_to_int(bits) -> np.ndarray:
    """MSB-first conversion along the last axis."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape[-1] == 0:
        return np.zeros(bits.shape[:-1], dtype=np.int64)
    w = 1 << np.arange(bits.shape[-1] - 1, -1, -1, dtype=np.int64)
    return bits @ w


def int_to_bits(v, width: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((v[..., None] >> shifts) & 1).astype(np.int8)


@dataclass(frozen=True, eq=False)
class FrameLayout:
    """Block structure shared by all schemes (see module docstring)."""

    scheme: Scheme
    block_size: int
    n_blocks: int
    patterns: np.ndarray  # (P, block_size, n_sym)
    index_bits: int
    constellation: Constellation

    @property
    def n_patterns(self) -> int:
        return self.patterns.shape[0]

    @property
    def n_sym(self) -> int:
        return self.patterns.shape[2]

    @property
    def N(self) -> int:
        return self.block_size * self.n_blocks

    @property
    def bits_per_block(self) -> int:
        return self.index_bits + self.n_sym * self.constellation.bits_per_symbol

    @property
    def bits_per_frame(self) -> int:
        return self.bits_per_block * self.n_blocks

    @property
    def block_candidates(self) -> int:
        return self.n_patterns * self.constellation.M ** self.n_sym

    @cached_property
    def block_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """All candidates for one block in lexicographic (pattern, symbols) order.

        Returns ``(vectors, pattern_idx, symbol_idx, bit_words)`` where
        ``vectors`` is ``(K, block_size)``.
        """
        M = self.constellation.M
        combos = np.array(
            list(itertools.product(range(self.n_patterns), *[range(M)] * self.n_sym)),
            dtype=np.int64,
        ).reshape(-1, 1 + self.n_sym)
        pat, sym = combos[:, 0], combos[:, 1:]
        vec = np.einsum("kbs,ks->kb", self.patterns[pat], self.constellation.points[sym])
        words = self.block_words(pat, sym)
        return vec, pat, sym, words

    def block_words(self, pat, sym) -> np.ndarray:
        """Bit word (as an integer) of each block decision."""
        bps = self.constellation.bits_per_symbol
        w = np.asarray(pat, dtype=np.int64)
        labels = self.constellation.labels[np.asarray(sym)]
        for s in range(self.n_sym):
            w = (w << bps) | labels[..., s]
        return w

    def split_words(self, words) -> tuple[np.ndarray, np.ndarray]:
        """Inverse of :meth:`block_words`: pattern and symbol indices."""
        bps = self.constellation.bits_per_symbol
        words = np.asarray(words, dtype=np.int64)
        sym = np.empty(words.shape + (self.n_sym,), dtype=np.int64)
        mask = (1 << bps) - 1
        for s in range(self.n_sym - 1, -1, -1):
            sym[..., s] = self.constellation.index_of_label[words & mask]
            words = words >> bps
        return words, sym

    def bits_to_decisions(self, bits) -> tuple[np.ndarray, np.ndarray]:
        bits = np.asarray(bits)
        if bits.shape[-1] != self.bits_per_frame:
            raise ValueError(f"expected {self.bits_per_frame} bits, got {bits.shape[-1]}")
        blocks = bits.reshape(bits.shape[:-1] + (self.n_blocks, self.bits_per_block))
        return self.split_words(bits_to_int(blocks))

    def decisions_to_bits(self, pat, sym) -> np.ndarray:
        pat = np.asarray(pat, dtype=np.int64)
        sym = np.asarray(sym, dtype=np.int64)
        if pat.min(initial=0) < 0 or pat.max(initial=0) >= self.n_patterns:
            raise ValueError("pattern index out of range")
        if sym.min(initial=0) < 0 or sym.max(initial=0) >= self.constellation.M:
            raise ValueError("symbol index out of range")
        words = self.block_words(pat, sym)
        b = int_to_bits(words, self.bits_per_block)
        return b.reshape(b.shape[:-2] + (self.bits_per_frame,))

    def frames(self, pat, sym) -> np.ndarray:
        """DAFT-domain frames ``(..., N)`` from per-block decisions."""
        pat = np.asarray(pat, dtype=np.int64)
        d = self.constellation.points[np.asarray(sym, dtype=np.int64)]
        blocks = np.einsum("...gbs,...gs->...gb", self.patterns[pat], d)
        return blocks.reshape(blocks.shape[:-2] + (self.N,))

    def map_bits(self, bits) -> np.ndarray:
        return self.frames(*self.bits_to_decisions(bits))


def _im_patterns(n: int, active: int, index_bits: int) -> np.ndarray:
    combos = list(itertools.combinations(range(n), active))[: 1 << index_bits]
    P = np.zeros((len(combos), n, active))
    scale = np.sqrt(n / active)
    for k, c in enumerate(combos):
        for s, pos in enumerate(c):
            P[k, pos, s] = scale
    return P


def build_layout(cfg: GcimConfig) -> FrameLayout:
    const = build_constellation(cfg.M, cfg.constellation_kind)
    n, G = cfg.n, cfg.G
    if cfg.scheme is Scheme.GCIM_AFDM_SS:
        patterns = walsh_codebook(n).codes[:, :, None].astype(float)
        index_bits = int(np.log2(n))
    elif cfg.scheme is Scheme.AFDM_SS:
        patterns = np.ones((1, n, 1))
        index_bits = 0
    elif cfg.scheme is Scheme.IM_AFDM:
        index_bits = int(np.floor(np.log2(math.comb(n, cfg.im_active))))
        patterns = _im_patterns(n, cfg.im_active, index_bits)
    else:
        patterns = np.ones((1, 1, 1))
        index_bits = 0
        n, G = 1, cfg.N
    patterns.setflags(write=False)
    return FrameLayout(cfg.scheme, n, G, patterns, index_bits, const)


def spectral_efficiency(cfg: GcimConfig) -> float:
    """Bits per chirp subcarrier (bps/Hz)."""
    m = np.log2(cfg.M)
    if cfg.scheme is Scheme.GCIM_AFDM_SS:
        return float((np.log2(cfg.n) + m) * cfg.G / cfg.N)
    if cfg.scheme is Scheme.AFDM:
        return float(m)
    if cfg.scheme is Scheme.AFDM_SS:
        return float(m / cfg.n)
    idx = np.floor(np.log2(math.comb(cfg.n, cfg.im_active)))
    return float((idx + cfg.im_active * m) * cfg.G / cfg.N)


def _require(cfg: GcimConfig, scheme: Scheme, codebook, constellation):
    if cfg.scheme is not scheme:
        raise ValueError(f"expected a {scheme.value} configuration, got {cfg.scheme.value}")
    if codebook is not None and codebook.n != cfg.n:
        raise ValueError("codebook size does not match n")
    if constellation is not None and constellation.M != cfg.M:
        raise ValueError("constellation order does not match M")


def map_bits_gcim(bits, cfg: GcimConfig, codebook: Codebook | None = None,
                  constellation: Constellation | None = None
                  ) -> tuple[DaftFrame, list[SubblockSelection]]:
    """Spread one symbol per subblock with the code picked by its index bits."""
    _require(cfg, Scheme.GCIM_AFDM_SS, codebook, constellation)
    bits = np.asarray(bits)
    if bits.ndim != 1:
        raise ValueError("map_bits_gcim takes a single bit vector")
    layout = cfg.layout
    pat, sym = layout.bits_to_decisions(bits)
    pts = layout.constellation.points
    selections = [SubblockSelection(int(p), complex(pts[s[0]]), int(s[0])) for p, s in zip(pat, sym)]
    return DaftFrame(layout.frames(pat, sym)), selections


def demap_gcim(selections: list[SubblockSelection], cfg: GcimConfig) -> np.ndarray:
    layout = cfg.layout
    if len(selections) != cfg.G:
        raise ValueError(f"expected {cfg.G} subblock selections, got {len(selections)}")
    pat = np.array([s.code_index for s in selections], dtype=np.int64)
    sym = np.array([[s.symbol_index] for s in selections], dtype=np.int64)
    return layout.decisions_to_bits(pat, sym)


def map_bits_baseline(bits, cfg: GcimConfig, constellation: Constellation | None = None) -> DaftFrame:
    if cfg.scheme is Scheme.GCIM_AFDM_SS:
        raise ValueError("use map_bits_gcim for GCIM-AFDM-SS")
    if constellation is not None and constellation.M != cfg.M:
        raise ValueError("constellation order does not match M")
    bits = np.asarray(bits)
    if bits.ndim != 1:
        raise ValueError("map_bits_baseline takes a single bit vector")
    return DaftFrame(cfg.layout.map_bits(bits))

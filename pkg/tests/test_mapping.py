import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afdmcim.mapping import (ConstellationKind, GcimConfig, SubblockSelection, bits_to_int,
                             build_constellation, demap_gcim, int_to_bits, map_bits_baseline,
                             map_bits_gcim, spectral_efficiency, walsh_codebook)


def test_walsh_n2():
    np.testing.assert_array_equal(walsh_codebook(2).codes, [[1, 1], [1, -1]])


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16, 32])
def test_walsh_orthogonal(n):
    C = walsh_codebook(n).codes
    assert set(np.unique(C)) <= {-1, 1}
    np.testing.assert_array_equal(C @ C.T, n * np.eye(n, dtype=np.int64))
    assert np.all(C[0] == 1)


def test_walsh_n8_pairwise_dot_products():
    C = walsh_codebook(8).codes
    for i, j in itertools.combinations(range(8), 2):
        assert int(np.dot(C[i], C[j])) == 0
    # Sylvester row 1 alternates sign
    np.testing.assert_array_equal(walsh_codebook(4).codes[1], [1, -1, 1, -1])


def test_walsh_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        walsh_codebook(6)


def test_bpsk_and_qpsk_points():
    np.testing.assert_allclose(build_constellation(2, "PSK").points, [1, -1], atol=1e-15)
    q = build_constellation(4, "PSK").points
    np.testing.assert_allclose(q, np.exp(1j * np.pi * np.array([1, 3, 5, 7]) / 4), atol=1e-15)


@pytest.mark.parametrize("M, kind", [(1, "PSK"), (2, "PSK"), (4, "PSK"), (8, "PSK"), (16, "PSK"),
                                     (4, "QAM"), (16, "QAM"), (64, "QAM")])
def test_unit_average_energy(M, kind):
    c = build_constellation(M, kind)
    assert abs(np.mean(np.abs(c.points) ** 2) - 1) < 1e-12
    assert sorted(c.labels.tolist()) == list(range(M))


def test_16qam_min_distance():
    # enumeration oracle: 2 / sqrt(10)
    assert build_constellation(16, "QAM").min_distance() == pytest.approx(0.6324555320336759, abs=1e-12)


@pytest.mark.parametrize("M, kind", [(4, "PSK"), (8, "PSK"), (16, "PSK"), (16, "QAM"), (64, "QAM")])
def test_gray_neighbours_differ_in_one_bit(M, kind):
    c = build_constellation(M, kind)
    d = np.abs(c.points[:, None] - c.points[None, :])
    dmin = c.min_distance()
    for i, j in zip(*np.nonzero(np.isclose(d, dmin))):
        assert bin(int(c.labels[i] ^ c.labels[j])).count("1") == 1


@pytest.mark.parametrize("M, kind", [(3, "PSK"), (8, "QAM"), (2, "QAM")])
def test_unsupported_constellations(M, kind):
    with pytest.raises(ValueError):
        build_constellation(M, kind)


def test_bit_int_round_trip():
    v = np.arange(64)
    np.testing.assert_array_equal(bits_to_int(int_to_bits(v, 6)), v)
    np.testing.assert_array_equal(int_to_bits(6, 3), [1, 1, 0])


@pytest.mark.parametrize("kw", [dict(N=8, n=3, M=4), dict(N=8, n=16, M=4), dict(N=8, n=4, M=3),
                                dict(N=12, n=4, M=4), dict(N=8, n=4, M=4, G=3),
                                dict(N=8, n=4, M=4, scheme="IM_AFDM", im_active=5),
                                dict(N=8, n=1, M=1)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        GcimConfig(**kw)


def test_config_derives_g():
    cfg = GcimConfig(8, 4, 4)
    assert cfg.G == 2 and cfg.bits_per_frame == 8


def test_gcim_all_zero_bits():
    cfg = GcimConfig(8, 4, 4)
    frame, sel = map_bits_gcim(np.zeros(8, dtype=int), cfg)
    a0 = build_constellation(4, "PSK").points[0]
    np.testing.assert_allclose(frame.values, a0 * np.ones(8), atol=1e-15)
    assert [(s.code_index, s.symbol_index) for s in sel] == [(0, 0), (0, 0)]


def test_gcim_code_index_bits_come_first():
    cfg = GcimConfig(8, 4, 4)
    bits = np.array([0, 1, 0, 0, 0, 0, 0, 0])
    frame, sel = map_bits_gcim(bits, cfg)
    assert sel[0].code_index == 1 and sel[1].code_index == 0
    a0 = build_constellation(4, "PSK").points[0]
    np.testing.assert_allclose(frame.values[:4], a0 * np.array([1, -1, 1, -1]), atol=1e-15)


def test_single_subblock_demap():
    cfg = GcimConfig(2, 2, 2)
    pts = build_constellation(2, "PSK").points
    bits = demap_gcim([SubblockSelection(1, complex(pts[1]), 1)], cfg)
    np.testing.assert_array_equal(bits, [1, 1])


def test_demap_all_zero():
    cfg = GcimConfig(8, 4, 4)
    a0 = complex(build_constellation(4, "PSK").points[0])
    np.testing.assert_array_equal(demap_gcim([SubblockSelection(0, a0, 0)] * 2, cfg), np.zeros(8))


@pytest.mark.parametrize("sel", [[SubblockSelection(4, 1, 0)] * 2, [SubblockSelection(0, 1, 4)] * 2,
                                 [SubblockSelection(0, 1, 0)]])
def test_demap_rejects_bad_selections(sel):
    with pytest.raises(ValueError):
        demap_gcim(sel, GcimConfig(8, 4, 4))


@pytest.mark.parametrize("n, M", [(2, 2), (4, 4), (8, 2)])
def test_subblock_bijection_exhaustive(n, M):
    cfg = GcimConfig(n, n, M)
    b = cfg.bits_per_frame
    seen = set()
    for w in range(1 << b):
        bits = int_to_bits(w, b)
        frame, sel = map_bits_gcim(bits, cfg)
        np.testing.assert_array_equal(demap_gcim(sel, cfg), bits)
        seen.add(tuple(np.round(frame.values, 12)))
        for s in sel:
            assert s.symbol == cfg.layout.constellation.points[s.symbol_index]
    assert len(seen) == 1 << b  # distinct frames


def test_gcim_round_trip_random_seeds():
    cfg = GcimConfig(16, 4, 4)
    for seed in range(1000):
        bits = np.random.default_rng(seed).integers(0, 2, cfg.bits_per_frame)
        _, sel = map_bits_gcim(bits, cfg)
        np.testing.assert_array_equal(demap_gcim(sel, cfg), bits)


def test_wrong_bit_count():
    with pytest.raises(ValueError):
        map_bits_gcim(np.zeros(7, dtype=int), GcimConfig(8, 4, 4))
    with pytest.raises(ValueError):
        map_bits_baseline(np.zeros(3, dtype=int), GcimConfig(4, 1, 2, scheme="AFDM"))


def test_scheme_dispatch():
    with pytest.raises(ValueError):
        map_bits_gcim(np.zeros(4, dtype=int), GcimConfig(4, 1, 2, scheme="AFDM"))
    with pytest.raises(ValueError):
        map_bits_baseline(np.zeros(8, dtype=int), GcimConfig(8, 4, 4))


@pytest.mark.parametrize("cfg, se", [
    (GcimConfig(8, 4, 4), 1.0),
    (GcimConfig(8, 4, 16, scheme="AFDM_SS"), 1.0),
    (GcimConfig(8, 4, 4, scheme="IM_AFDM", im_active=1), 1.0),
    (GcimConfig(8, 4, 2, scheme="AFDM"), 1.0),
    (GcimConfig(16, 8, 2), 0.5),
    (GcimConfig(16, 4, 1), 0.5),
    (GcimConfig(8, 4, 4, scheme="IM_AFDM", im_active=2), 1.5),
])
def test_spectral_efficiency(cfg, se):
    assert spectral_efficiency(cfg) == pytest.approx(se, abs=1e-15)
    assert cfg.bits_per_frame == round(se * cfg.N)


def test_afdm_bpsk_example():
    x = map_bits_baseline([0, 1, 1, 0], GcimConfig(4, 1, 2, scheme="AFDM")).values
    np.testing.assert_allclose(x, [1, -1, -1, 1], atol=1e-15)


def test_afdm_ss_fixed_code():
    cfg = GcimConfig(4, 4, 16, scheme="AFDM_SS")
    x = map_bits_baseline([0, 0, 0, 0], cfg).values
    np.testing.assert_allclose(x, build_constellation(16).points[0] * np.ones(4), atol=1e-15)


def test_im_afdm_first_pattern():
    cfg = GcimConfig(4, 4, 4, scheme="IM_AFDM", im_active=1)
    x = map_bits_baseline([0, 0, 0, 0], cfg).values
    a0 = build_constellation(4).points[0]
    np.testing.assert_allclose(x, [2 * a0, 0, 0, 0], atol=1e-15)
    x = map_bits_baseline([1, 1, 0, 0], cfg).values
    np.testing.assert_allclose(x, [0, 0, 0, 2 * a0], atol=1e-15)


def test_im_afdm_combinadic_order():
    cfg = GcimConfig(4, 4, 2, scheme="IM_AFDM", im_active=2)
    # floor(log2 C(4,2)) = 2 index bits select the first 4 combinations
    P = cfg.layout.patterns
    active = [tuple(np.nonzero(np.abs(P[k]).sum(1))[0]) for k in range(P.shape[0])]
    assert active == list(itertools.combinations(range(4), 2))[:4]
    assert cfg.layout.index_bits == int(math.floor(math.log2(math.comb(4, 2))))


ALL_SCHEMES = [
    GcimConfig(8, 4, 4), GcimConfig(8, 4, 16, "QAM"), GcimConfig(8, 4, 2, scheme="AFDM"),
    GcimConfig(8, 4, 16, scheme="AFDM_SS"), GcimConfig(8, 4, 4, scheme="IM_AFDM", im_active=1),
    GcimConfig(8, 4, 4, scheme="IM_AFDM", im_active=3), GcimConfig(16, 4, 16, "QAM", scheme="AFDM"),
]


@pytest.mark.parametrize("cfg", ALL_SCHEMES, ids=lambda c: f"{c.scheme.value}-{c.M}{c.constellation_kind.value}")
def test_unit_energy_exact(cfg):
    # average over every block candidate, i.e. over uniform bits
    vec = cfg.layout.block_table[0]
    assert np.mean(np.sum(np.abs(vec) ** 2, axis=1)) / cfg.layout.block_size == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("cfg", [c for c in ALL_SCHEMES if c.constellation_kind is ConstellationKind.PSK],
                         ids=lambda c: f"{c.scheme.value}-{c.M}PSK")
def test_unit_energy_empirical(cfg):
    rng = np.random.default_rng(0)
    X = cfg.layout.map_bits(rng.integers(0, 2, (10_000, cfg.bits_per_frame)))
    assert abs(np.mean(np.abs(X) ** 2) - 1) < 1e-3


@pytest.mark.parametrize("cfg", ALL_SCHEMES[:5], ids=lambda c: c.scheme.value)
def test_emitted_bits_match_se(cfg):
    assert cfg.bits_per_frame == spectral_efficiency(cfg) * cfg.N


@settings(max_examples=50, deadline=None)
@given(k=st.integers(1, 4), logn=st.integers(0, 4), logm=st.integers(0, 4), seed=st.integers(0, 2**31))
def test_layout_round_trip_property(k, logn, logm, seed):
    N = 1 << (k + 1)
    n = min(1 << logn, N)
    if n == 1 and logm == 0:
        return
    cfg = GcimConfig(N, n, 1 << logm)
    lay = cfg.layout
    bits = np.random.default_rng(seed).integers(0, 2, (5, cfg.bits_per_frame))
    pat, sym = lay.bits_to_decisions(bits)
    np.testing.assert_array_equal(lay.decisions_to_bits(pat, sym), bits)

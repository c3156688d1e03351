import math

import numpy as np
import pytest

from afdmcim.mapping import GcimConfig
from afdmcim.sim import (BerPoint, SimConfig, TrialStreams, Z95, chunk_errors, draw_trials, fmt, noise_var,
                         paired_error_counts, run_ber_sweep, run_trial, simulate_trials, transmit_receive,
                         trial_rng, write_ber_csv)

BASE = SimConfig(GcimConfig(8, 4, 4), L=3, snr_grid_db=(0.0, 10.0, 20.0), min_trials=200,
                 target_bit_errors=50, max_trials=5000, chunk_size=128)


def test_config_validation():
    g = GcimConfig(8, 4, 4)
    for kw in [dict(snr_grid_db=()), dict(snr_grid_db=(5.0, 5.0)), dict(snr_grid_db=(10.0, 0.0)),
               dict(min_trials=10, max_trials=5), dict(csi_rho=1.5), dict(master_seed=-1),
               dict(master_seed=2**64), dict(tau_max=8), dict(L_cpp=1, tau_max=1), dict(detector="zf"),
               dict(channel_model="rician"), dict(c1=-1.0)]:
        with pytest.raises(ValueError):
            SimConfig(g, **kw)
    assert SimConfig(g, master_seed=2**64 - 1).master_seed == 2**64 - 1


def test_noise_var():
    assert noise_var(0) == 1.0
    assert noise_var(20) == pytest.approx(0.01)


def test_berpoint_from_counts():
    p = BerPoint.from_counts(10.0, 1000, 80, 8)
    assert p.ber == 0.01
    assert p.ci_half_width == pytest.approx(Z95 * math.sqrt(0.01 * 0.99 / 8000))
    assert p.lo < p.ber < p.hi
    assert BerPoint.from_counts(0, 10, 0, 4).lo == 0.0


def test_trial_streams_are_order_independent():
    s = TrialStreams(7, 2)
    a = s.rng(5).random(4)
    s.rng(3).random(10)
    np.testing.assert_array_equal(s.rng(5).random(4), a)
    np.testing.assert_array_equal(trial_rng(7, 2, 5).random(4), a)
    assert not np.array_equal(trial_rng(7, 3, 5).random(4), a)
    assert not np.array_equal(trial_rng(8, 2, 5).random(4), a)


def test_draws_independent_of_batching():
    d1 = draw_trials(BASE, 1, range(10))
    d2 = draw_trials(BASE, 1, [7, 3])
    np.testing.assert_array_equal(d1.bits[[7, 3]], d2.bits)
    np.testing.assert_array_equal(d1.noise[[7, 3]], d2.noise)
    np.testing.assert_array_equal(d1.gains[[7, 3]], d2.gains)


def test_integer_mode_draws_distinct_pairs():
    cfg = BASE.with_(fractional=False, L=4)
    d = draw_trials(cfg, 0, range(300))
    for t, nu in zip(d.delays, d.dopplers):
        assert len(set(zip(t, nu))) == 4


def test_transmit_receive_noiseless_matches_matrix():
    d = draw_trials(BASE, 0, range(20))
    Y, H = transmit_receive(BASE, d, 0.0)
    X = BASE.system.layout.map_bits(d.bits)
    np.testing.assert_allclose(Y, np.einsum("bij,bj->bi", H, X), atol=1e-10)


def test_transmit_energy_calibration():
    for sys in [GcimConfig(8, 4, 4), GcimConfig(8, 4, 16, scheme="AFDM_SS"), GcimConfig(8, 1, 2, scheme="AFDM"),
                GcimConfig(8, 4, 4, scheme="IM_AFDM")]:
        cfg = BASE.with_(system=sys)
        X = sys.layout.map_bits(draw_trials(cfg, 0, range(10_000)).bits)
        assert abs(np.mean(np.abs(X) ** 2) - 1) < 1e-3


def test_noiseless_trial_has_no_errors():
    for det in ("ml", "mrc"):
        cfg = BASE.with_(detector=det, snr_grid_db=(200.0,))
        for t in range(50):
            _, _, e = run_trial(cfg, 200.0, t)
            assert e == 0


def test_run_trial_deterministic():
    a = run_trial(BASE, 10.0, 17)
    b = run_trial(BASE, 10.0, 17)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    assert a[2] == b[2] == int(np.sum(a[0] != a[1]))
    with pytest.raises(ValueError):
        run_trial(BASE, 12.0, 0)
    tx, rx = simulate_trials(BASE, 1, 10.0, [17])
    np.testing.assert_array_equal(tx[0], a[0])


def test_csi_error_non_decreasing():
    rhos = (0.0, 0.1, 0.3)
    cfgs = [BASE.with_(csi_rho=r, chunk_size=1000) for r in rhos]
    e = paired_error_counts(cfgs, 0, 20.0, 10_000).sum(axis=1)
    assert e[0] <= e[1] <= e[2]


def test_stopping_rule_exact():
    pts = run_ber_sweep(BASE)
    for i, p in enumerate(pts):
        errs = chunk_errors(BASE, i, p.snr_db, 0, p.trials)
        assert errs.sum() == p.bit_errors
        c = np.cumsum(errs)
        n = np.arange(1, p.trials + 1)
        stop = ((c >= BASE.target_bit_errors) & (n >= BASE.min_trials)) | (n >= BASE.max_trials)
        assert stop[-1] and not stop[:-1].any()
        assert p.ber == p.bit_errors / (p.trials * 8)


def test_sweep_independent_of_chunking_and_workers():
    ref = run_ber_sweep(BASE)
    assert run_ber_sweep(BASE.with_(chunk_size=37)) == ref
    assert run_ber_sweep(BASE.with_(workers=2)) == ref
    assert run_ber_sweep(BASE.with_(master_seed=1)) != ref


def test_sweep_shape_and_chance_level():
    cfg = BASE.with_(snr_grid_db=(-10.0, 0.0, 10.0, 20.0), target_bit_errors=200, max_trials=20_000)
    pts = run_ber_sweep(cfg)
    assert [p.snr_db for p in pts] == [-10.0, 0.0, 10.0, 20.0]
    assert 0.3 <= pts[0].ber <= 0.5
    for a, b in zip(pts, pts[1:]):
        assert b.ber <= a.ber or b.lo <= a.hi
    seen = []
    run_ber_sweep(cfg.with_(snr_grid_db=(0.0,)), progress=seen.append)
    assert len(seen) == 1


def test_fmt_and_csv(tmp_path):
    assert fmt(3) == "3"
    assert fmt(np.int64(3)) == "3"
    assert fmt(0.123456789) == "0.123457"
    assert fmt(1.5e-7) == "1.5e-07"
    pts = [BerPoint.from_counts(0.0, 100, 7, 8), BerPoint.from_counts(5.0, 200, 3, 8)]
    write_ber_csv(pts, tmp_path / "o.csv")
    raw = (tmp_path / "o.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "snr_db,trials,bit_errors,ber,ci"
    assert lines[1].startswith("0,100,7,0.00875,")


def test_awgn_model_single_path():
    cfg = BASE.with_(system=GcimConfig(8, 1, 2, scheme="AFDM"), channel_model="awgn")
    d = draw_trials(cfg, 0, range(5))
    assert d.gains.shape == (5, 1) and np.all(d.gains == 1) and np.all(d.delays == 0)
    _, H = transmit_receive(cfg, d, 0.1)
    np.testing.assert_allclose(H, np.broadcast_to(np.eye(8), H.shape), atol=1e-12)

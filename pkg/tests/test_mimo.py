import math

import numpy as np
import pytest
from scipy import special

from grassq.codebook import Codebook, quantize, random_codebook
from grassq.core import ArgumentError, ShapeError, Subspace
from grassq.mimo import (
    MimoConfig,
    beamforming_codebook,
    eta_sup,
    feedback_index,
    log_det_rate,
    log_det_rate_receive_side,
    mimo_sweep,
    rate_finite_feedback,
    rate_perfect_csi,
    rate_predicted,
    sample_channel,
)

CFG = MimoConfig(4, 2, 10.0, 0, 2)


def test_config_defaults_and_validation():
    cfg = MimoConfig(4, 2, 10.0)
    assert cfg.s == 2 and cfg.P_on == 5.0 and cfg.m == 2 and cfg.K == 1
    for bad in [dict(L_T=0, L_R=1, rho=1), dict(L_T=2, L_R=2, rho=-1), dict(L_T=2, L_R=2, rho=1, s=3)]:
        with pytest.raises(ArgumentError):
            MimoConfig(**bad)


def test_channel_statistics():
    gen = np.random.default_rng(0)
    energy = [np.linalg.norm(sample_channel(CFG, gen).H) ** 2 for _ in range(4000)]
    assert np.mean(energy) == pytest.approx(8.0, rel=0.03)


def test_channel_sample_consistency():
    sample = sample_channel(CFG, 3)
    assert np.all(np.diff(sample.eigenvalues) <= 0)
    assert sample.eigenvalues.sum() == pytest.approx(np.linalg.norm(sample.H) ** 2)
    gram = sample.V_s.conj().T @ sample.V_s
    assert np.allclose(gram, np.eye(2), atol=1e-12)


def test_zero_snr_gives_zero_rate():
    assert rate_perfect_csi(MimoConfig(4, 2, 0.0), samples=2000, rng=0).value == 0.0


def test_siso_ergodic_rate():
    # E ln(1 + |h|^2) with |h|^2 ~ Exp(1) equals e * E1(1).
    r = rate_perfect_csi(MimoConfig(1, 1, 1.0), samples=10**5, rng=1)
    assert abs(r.value - math.e * special.exp1(1.0)) < 4 * r.std_error


def test_sylvester_identity():
    gen = np.random.default_rng(2)
    for _ in range(20):
        sample = sample_channel(CFG, gen)
        P = random_codebook(4, 2, "C", 1, rng=gen).bases[0]
        a = log_det_rate(sample.H, P, 5.0)
        b = log_det_rate_receive_side(sample.H, P, 5.0)
        assert a == pytest.approx(b, abs=1e-9)


def test_exact_beamformer_attains_perfect_csi():
    sample = sample_channel(CFG, 4)
    rate = log_det_rate(sample.H, sample.V_s, CFG.P_on)
    assert rate == pytest.approx(np.log1p(CFG.P_on * sample.eigenvalues).sum(), abs=1e-10)


def test_feedback_index_is_chordal_nearest():
    C = random_codebook(4, 2, "C", 32, rng=5)
    gen = np.random.default_rng(6)
    for _ in range(20):
        sample = sample_channel(CFG, gen)
        k = feedback_index(C, sample)
        target = Subspace(sample.V_s, "C")
        assert k == quantize(C, target)[0]
    with pytest.raises(ShapeError):
        feedback_index(random_codebook(4, 1, "C", 4), sample)


def test_eta_range():
    assert eta_sup(0.0, 2) == 1.0
    assert eta_sup(2.0, 2) == 0.0
    with pytest.raises(ArgumentError):
        eta_sup(2.5, 2)


def test_prediction_endpoints():
    opt = rate_perfect_csi(CFG, samples=5000, rng=7)
    assert rate_predicted(CFG, 0.0, samples=5000, rng=7).value == pytest.approx(opt.value)
    assert rate_predicted(CFG, 2.0, samples=5000, rng=7).value == 0.0


def test_finite_feedback_below_perfect():
    cfg = MimoConfig(4, 2, 10.0, 4, 2)
    C = random_codebook(4, 2, "C", 16, rng=8)
    fin = rate_finite_feedback(cfg, C, samples=5000, rng=9)
    opt = rate_perfect_csi(cfg, samples=5000, rng=9)
    assert fin.value <= opt.value + 3 * math.hypot(fin.std_error, opt.std_error)
    with pytest.raises(ShapeError):
        rate_finite_feedback(cfg, random_codebook(4, 1, "C", 16), samples=5000)


def test_sweep_rows_and_skipping(tmp_path):
    sweep = mimo_sweep(4, 2, 10.0, [0, 2, 4, 30], samples=3000, seed=1, iterations=100, restarts=2,
                       cache=tmp_path)
    assert sweep.skipped == [30] and sweep.partial
    assert [r.R_fb for r in sweep.rows] == [0, 2, 4]
    for r in sweep.rows:
        assert r.rate_pred_lo >= r.rate_pred_hi
        assert r.rate_sim <= r.rate_opt + 3 * math.hypot(r.se_sim, r.se_opt)
    assert sweep.rows[0].K == 1
    assert any(p.suffix == ".gqcb" for p in tmp_path.iterdir())


def test_codebook_cache_reused(tmp_path):
    a = beamforming_codebook(4, 2, 8, 3, iterations=50, restarts=2, cache=tmp_path)
    files = list(tmp_path.iterdir())
    assert len(files) == 1
    mtime = files[0].stat().st_mtime_ns
    b = beamforming_codebook(4, 2, 8, 3, iterations=50, restarts=2, cache=tmp_path)
    assert np.array_equal(a.bases, b.bases)
    assert files[0].stat().st_mtime_ns == mtime


def test_full_dimension_streams_ignore_feedback():
    sweep = mimo_sweep(2, 2, 5.0, [0, 2], s=2, samples=2000, seed=0, iterations=20, restarts=1)
    for r in sweep.rows:
        assert r.rate_sim == pytest.approx(r.rate_opt, abs=1e-9)
        assert r.eta_lower_bound == r.eta_upper_bound == 1.0


def test_sweep_worker_independent():
    kw = dict(samples=25000, seed=2, iterations=30, restarts=1)
    a = mimo_sweep(3, 2, 4.0, [2], s=1, workers=1, **kw)
    b = mimo_sweep(3, 2, 4.0, [2], s=1, workers=3, **kw)
    assert a.rows == b.rows

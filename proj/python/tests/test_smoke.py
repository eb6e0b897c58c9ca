import math

import numpy as np
import pytest

import perk


def test_signal_shape_and_determinism():
    s = perk.signal(0.77, 832.0, 79.6, 1.0)
    assert s.shape == (4,)
    assert np.all(s > 0)
    assert np.array_equal(s, perk.signal(0.77, 832.0, 79.6, 1.0))
    assert perk.rician_mean(3.0, 4.0) == pytest.approx(5.0, abs=1e-15)


def test_phantom_synthesis():
    scene = perk.brain_phantom(32, 32)
    assert scene.rows == scene.cols == 32
    tissue = np.asarray(scene.tissue, dtype=bool)
    assert tissue.sum() > 100
    sigmas = np.full(4, 1e-3)
    data = perk.synthesize(scene, sigmas, seed=1)
    assert data.shape == (4, 32 * 32)
    assert np.array_equal(data, perk.synthesize(scene, sigmas, seed=1))
    assert not np.array_equal(data, perk.synthesize(scene, sigmas, seed=2))
    # background voxels carry pure noise, far below tissue signal
    assert data[0][~tissue].mean() < data[0][tissue].mean()


def test_train_predict_save_load(tmp_path):
    ts = perk.training_set(perk.uniform_priors(), np.full(4, 2e-3), n=3000, seed=7)
    assert ts.n == 3000 and ts.regressors.shape == (5, 3000)
    est = perk.train(ts, z=64, rho=2.0**-20, seed=8)
    p = np.concatenate([perk.signal(0.8, 700.0, 80.0, 1.0), [1.0]])
    x = est.predict(p)
    assert x.shape == (3,) and np.isfinite(x).all()
    path = str(tmp_path / "est.bin")
    est.save(path)
    back = perk.load_estimator(path)
    assert back.z == est.z and back.rho == est.rho
    assert np.array_equal(back.predict(p), x)


def test_end_to_end_map():
    scene = perk.brain_phantom(32, 32)
    sigmas = np.full(4, 5e-4)
    data = perk.synthesize(scene, sigmas, seed=3)
    tissue = np.asarray(scene.tissue, dtype=np.uint8)
    kappa = np.asarray(scene.kappa_map)
    priors = perk.default_priors(data[:, tissue > 0].ravel(), kappa[tissue > 0])
    ts = perk.training_set(priors, sigmas, n=20000, seed=4)
    est = perk.train(ts, z=256, rho=2.0**-30, seed=5)
    xhat = est.predict_map(data, kappa, tissue)
    assert xhat.shape == (3, 32 * 32)
    assert np.all(xhat[:, tissue == 0] == 0.0)
    wm = np.asarray(scene.roi("WM"), dtype=bool)
    stats = perk.roi_stats(xhat[2], 79.6, np.asarray(scene.roi("WM"), dtype=np.uint8))
    assert abs(stats.mean - 79.6) / 79.6 < 0.15
    assert xhat[2][wm].std() == pytest.approx(stats.std, rel=0.1)


def test_vpm_recovers_grid_atom():
    d = perk.build_dictionary(kappa=1.0, t1_count=20, t2_count=20,
                              t1_support=(400.0, 2000.0), t2_support=(40.0, 200.0))
    y = 0.9 * np.asarray(d.atoms[:, 7 * 20 + 3])
    x = perk.vpm_estimate(y, d)
    assert x[1] == d.t1_grid[7] and x[2] == d.t2_grid[3]
    assert x[0] == pytest.approx(0.9, rel=1e-12)


def test_fisher_and_bias():
    sigmas = np.full(4, 0.004)
    fr = perk.fisher(0.77, 832.0, 79.6, 1.0, sigmas)
    assert fr.f.shape == (3, 3) and fr.cond > 1.0
    assert np.all(np.asarray(fr.crlb_diag) > 0)

    ts = perk.training_set(perk.uniform_priors(), sigmas, n=200, seed=11)
    est = perk.train_exact(ts, rho=np.full(3, 2.0**-10))
    rep = perk.conditional_bias(est, 0.77, 832.0, 79.6, 1.0, sigmas)
    assert rep.bias.shape == (3,) and not rep.monte_carlo
    cov = perk.conditional_cov(est, 0.77, 832.0, 79.6, 1.0, sigmas).cov
    assert np.allclose(cov, cov.T)


def test_errors_are_typed():
    with pytest.raises(perk.PerkError):
        perk.training_set(perk.uniform_priors(), np.full(4, 1e-3), n=0, seed=1)
    with pytest.raises(Exception):
        perk.load_estimator("/nonexistent/estimator.bin")


def test_estimate_sigma_and_snr():
    assert perk.estimate_sigma(np.array([1.0, 1.0])) == pytest.approx(math.sqrt(0.5), abs=1e-15)
    assert perk.snr(10.0 * np.ones(5), np.ones(5)) == pytest.approx(10.0, abs=1e-12)

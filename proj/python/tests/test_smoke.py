import math

import numpy as np
import pytest

import patk

SMALL = {"grid.n": 32, "ring.n_total": 32, "ring.n_active": 32}


def test_adjoint_dot_product():
    op = patk.Operator(SMALL)
    rng = np.random.default_rng(0)
    f = rng.standard_normal(op.image_shape)
    g = rng.standard_normal(op.data_shape)
    af, atg = op.forward(f), op.adjoint(g)
    assert af.shape == op.data_shape
    lhs, rhs = float(np.vdot(af, g)), float(np.vdot(f, atg))
    scale = np.linalg.norm(af) * np.linalg.norm(g) + np.linalg.norm(f) * np.linalg.norm(atg)
    assert abs(lhs - rhs) <= 1e-12 * scale


def test_simulation_and_noise_level():
    p = patk.simulate({**SMALL, "noise.eta": 0.2})
    assert p["gt"].shape == (32, 32)
    assert p["phantom_fine"].shape == (64, 64)
    rel = np.linalg.norm(p["noisy"] - p["clean"]) / np.linalg.norm(p["clean"])
    assert abs(rel - 0.2) <= 1e-12
    assert abs(p["eta_measured"] - 0.2) <= 1e-12
    again = patk.simulate({**SMALL, "noise.eta": 0.2})
    assert np.array_equal(again["noisy"], p["noisy"])


def test_metrics_identities():
    rng = np.random.default_rng(1)
    gt = rng.uniform(0.0, 1.0, (40, 40))
    gt[0, 0], gt[0, 1] = 0.0, 1.0
    assert patk.psnr(gt, gt) == math.inf
    assert patk.psnr(gt + 0.1, gt) == pytest.approx(20.0, abs=1e-10)
    m = patk.evaluate(gt, gt)
    assert m["ssim"] == pytest.approx(1.0)
    assert m["cc"] == pytest.approx(1.0)
    assert m["haarpsi"] == pytest.approx(1.0)
    assert patk.pearson_cc(2 * gt + 3, gt) == pytest.approx(1.0, abs=1e-12)


def test_reconstructions():
    cfg = {**SMALL, "noise.eta": 0.1, "unet.channels": [4, 8], "dip.max_iter": 3, "dip.burn_in": 1,
           "dip.selection": "fixed_cutoff", "tv.max_iter": 20}
    p = patk.simulate(cfg)
    op = patk.Operator(cfg)
    z = patk.approximate_inverse(p["noisy"], op)
    rec, hist = patk.tv_reconstruct(p["noisy"], op, cfg, gt=p["gt"])
    assert rec.shape == (32, 32) and rec.min() >= 0.0
    assert len(hist["objective"]) == hist["iterations_run"] == 20
    assert len(hist["psnr"]) == 20
    rec_dip, h = patk.dip_reconstruct(p["noisy"], z, op, cfg)
    assert rec_dip.shape == (32, 32)
    assert h["selected"] == 3 and len(h["objective"]) == 4


def test_run_experiment(tmp_path):
    cfg = {**SMALL, "method": "tv", "tv.max_iter": 10, "output.dir": str(tmp_path / "out")}
    rows = patk.run_experiment(cfg)
    assert [r["method"] for r in rows] == ["initial", "tv"]
    gt = patk.read_raw(tmp_path / "out" / "gt.raw")
    assert gt.shape == (32, 32) and gt.dtype == np.float32
    assert (tmp_path / "out" / "metrics.csv").read_text().startswith("method,selection,psnr_db")


def test_raw_round_trip(tmp_path):
    a = np.arange(6, dtype=np.float32).reshape(3, 2)
    patk.write_raw(tmp_path / "a.raw", a)
    assert (tmp_path / "a.raw").stat().st_size == 20 + 24
    assert np.array_equal(patk.read_raw(tmp_path / "a.raw"), a)
    (tmp_path / "b.raw").write_bytes((tmp_path / "a.raw").read_bytes()[:-1])
    with pytest.raises(patk.FormatError):
        patk.read_raw(tmp_path / "b.raw")
    with pytest.raises(patk.IoError):
        patk.read_raw(tmp_path / "missing.raw")


def test_configuration_errors():
    with pytest.raises(patk.ConfigError):
        patk.resolve_config({"grid.nn": 3})
    with pytest.raises(ValueError):
        patk.Operator({"grid.n": 30})
    resolved = patk.resolve_config({"unet.channels": [4, 8], "noise.eta": 0.2})
    assert resolved["unet.channels"] == "4,8"
    assert set(resolved) <= set(patk.config_keys())
    assert patk.cosine_lr(0, 400, 5e-4) == 5e-4

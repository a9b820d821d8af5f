import numpy as np
import pytest

import lfsep


def test_camera_presets():
    cam = lfsep.desk_camera(8, 8)
    assert cam.sensor_size == (96, 96)
    assert cam.texture_size == (24, 24)
    assert cam.focal_conjugate_depth == pytest.approx(0.5)
    assert lfsep.reference_camera().unit_cell == (28, 16)
    with pytest.raises(ValueError):
        lfsep.camera_preset("lytro")


def test_depth_levels():
    d = lfsep.depth_levels(0.2, 2.5, 15)
    assert len(d) == 15
    assert d[0] == pytest.approx(0.2)
    assert d[-1] == pytest.approx(2.5)
    assert np.allclose(np.diff(1.0 / np.array(d)), -4.6 / 14)


def test_adjoint_dot_product():
    cam = lfsep.desk_camera(6, 6)
    bank = lfsep.build_psf_bank(cam, 0.8)
    rng = np.random.default_rng(0)
    f = rng.standard_normal(cam.texture_size)
    l = rng.standard_normal(cam.sensor_size)
    lhs = float(np.sum(bank.apply(f) * l))
    rhs = float(np.sum(f * bank.adjoint(l)))
    assert abs(lhs - rhs) <= 1e-10 * abs(lhs)
    with pytest.raises(ValueError):
        bank.apply(np.zeros((5, 5)))


def test_simulate_and_reconstruct():
    cam = lfsep.desk_camera(10, 10)
    t, r = lfsep.texture_corpus(*cam.texture_size, 2, 7)
    obs = lfsep.simulate_observation(t, r, 0.35, 1.7, cam)
    assert obs.shape == cam.sensor_size
    assert obs.min() >= 0.0
    est_t, est_r = lfsep.reconstruct_layers(obs, cam, 0.35, 1.7, max_iters=200)
    assert lfsep.ncc(est_t, t) > 0.9
    assert lfsep.ncc(est_r, r) > 0.9


def test_project_simplex():
    p = np.array(lfsep.project_simplex([0.3, -1.0, 2.0]))
    assert p.sum() == pytest.approx(1.0)
    assert (p >= 0).all()
    assert lfsep.project_simplex(list(p)) == list(p)


def test_pfm_round_trip(tmp_path):
    a = np.arange(12, dtype=np.float64).reshape(3, 4) / 7
    lfsep.write_pfm(tmp_path / "a.pfm", a)
    (b,) = lfsep.read_pfm(tmp_path / "a.pfm")
    assert np.array_equal(b, a.astype(np.float32))


def test_run_command(tmp_path):
    manifest = tmp_path / "m.yaml"
    manifest.write_text("schema: 1\ncamera: {preset: desk, units: [8, 8]}\noutput: {dir: out}\n")
    assert lfsep.run_command(["simulate", "-m", str(manifest)]) == 0
    assert (tmp_path / "out" / "observation.pfm").exists()
    assert lfsep.run_command(["verify", "-m", str(manifest)]) == 0
    assert lfsep.run_command(["nonsense"]) == 2
    assert "schema: 1" in lfsep.manifest_yaml(manifest)

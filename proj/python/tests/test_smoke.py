import math

import numpy as np
import pytest

import skytomo


def test_phase_functions_normalize():
    mu = np.linspace(-1.0, 1.0, 20001)
    for g in (0.0, 0.5, 0.775):
        p = np.array([skytomo.phase_hg(m, g) for m in mu])
        assert 2 * math.pi * np.trapezoid(p, mu) == pytest.approx(1.0, abs=1e-4)
    p = np.array([skytomo.phase_rayleigh(m) for m in mu])
    assert 2 * math.pi * np.trapezoid(p, mu) == pytest.approx(1.0, abs=1e-6)


def test_samplers_stay_in_range():
    for u in np.linspace(0.0, 1.0, 11):
        assert -1.0 <= skytomo.hg_cos_from_uniform(0.775, u) <= 1.0
        assert -1.0 <= skytomo.rayleigh_cos_from_uniform(u) <= 1.0


def test_presets():
    assert "atm1" in skytomo.preset_names()
    s = skytomo.make_preset("atm2", grid=(4, 4, 8), pixels=8)
    assert s.shape == [4, 4, 8]
    assert s.aerosol_g == pytest.approx([0.763, 0.775, 0.786])
    assert len(s.cameras) == 36
    assert s.beta_aerosol.shape == (8, 4, 4)
    with pytest.raises(ValueError):
        skytomo.make_preset("nope")


def test_scene_round_trip(tmp_path):
    s = skytomo.make_preset("atm1", grid=(3, 3, 3), pixels=4)
    path = tmp_path / "scene.json"
    s.save(path)
    t = skytomo.load_scene(path)
    assert np.array_equal(t.beta_aerosol, s.beta_aerosol)
    assert t.sun_zenith_deg == 45.0


def test_renderers_agree_roughly():
    s = skytomo.make_preset("atm1", grid=(8, 8, 8), pixels=12).select_cameras([14])
    vfmc = skytomo.render_vfmc(s, 1, 200000, seed=3, threads=1)[0]
    bmc, err = skytomo.render_bmc(s, 1, 0, 200, seed=4, threads=1)
    mask = skytomo.sun_mask(s, 0)
    assert vfmc.shape == (12, 12)
    assert np.all(err[mask] >= 0.0)
    scale = skytomo.fit_scale(bmc, vfmc, mask)
    assert 0.7 < scale < 1.4


def test_clear_air_single_scatter():
    s = skytomo.make_preset("atm1", grid=(4, 4, 4), pixels=8).select_cameras([0])
    s.beta_aerosol = np.zeros_like(s.beta_aerosol)
    img = skytomo.render_single_scatter(s, 1, 0)
    assert np.all(img >= 0.0)
    # Air alone still scatters.
    assert img.max() > 0.0


def test_determinism():
    s = skytomo.make_preset("atm1", grid=(6, 6, 6), pixels=8).select_cameras([0, 1])
    a = skytomo.render_fmc(s, 1, 5000, seed=11, threads=1)
    b = skytomo.render_fmc(s, 1, 5000, seed=11, threads=1)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_error_metrics():
    truth = np.array([1.0, 2.0, 3.0])
    assert skytomo.error_metrics(np.zeros(3), truth) == {"delta_mass": -1.0, "epsilon": 1.0}
    with pytest.raises(ValueError):
        skytomo.error_metrics(truth, np.zeros(3))

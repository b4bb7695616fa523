import math

import numpy as np
import pytest

import stsim


def test_flat_gel_renders_uniformly():
    img = stsim.render_flat(6, 4)
    assert img.shape == (4, 6, 3)
    assert img.dtype == np.float32
    assert np.all(img == img[0, 0])


def test_indentation_darkens_and_stays_in_range():
    depth = np.zeros((21, 21))
    yy, xx = np.mgrid[-10:11, -10:11]
    depth[xx**2 + yy**2 < 25] = 0.004
    img = stsim.render_tactile(depth, 2e-4)
    flat = stsim.render_flat(21, 21)
    assert img.min() >= 0.0 and img.max() <= 1.0
    assert img[10, 10].sum() < flat[10, 10].sum()


def test_clip_depth_and_normals():
    clipped = stsim.clip_depth(np.array([[-1e-3, 2e-3, 9e-3]] * 3), 1e-4, 5e-3)
    assert clipped[0].tolist() == [0.0, 2e-3, 5e-3]
    n = stsim.normals(np.zeros((5, 5)), 1e-4)
    assert np.allclose(n, [0, 0, 1])
    with pytest.raises(ValueError):
        stsim.clip_depth(np.full((3, 3), np.nan), 1e-4)


def test_flat_indenter_shares_load():
    clearance = np.full((8, 8), np.inf)
    clearance[2:6, 2:6] = 0.0
    sol = stsim.solve_equilibrium(clearance, 0.5, stiffness=1000.0)
    assert sol["force"].sum() == pytest.approx(0.5, rel=1e-6)
    assert sol["depth"][3, 3] == pytest.approx(0.5 / (16 * 1000.0), rel=1e-6)
    assert sol["contact"].sum() == 16


def test_overload_reports_capacity():
    with pytest.raises(stsim.SaturationError) as info:
        stsim.solve_equilibrium(np.zeros((3, 3)), 100.0, stiffness=10.0, gel_thickness=0.005)
    assert info.value.max_supportable_load == pytest.approx(9 * 10.0 * 0.005)


def test_poe_examples():
    mean, var = stsim.poe_fuse([np.array([2.0])], [np.array([1.0])], 1)
    assert mean[0] == pytest.approx(1.0) and var[0] == pytest.approx(0.5)
    mean, var = stsim.poe_fuse([np.array([2.0]), np.array([4.0])], [np.array([1.0]), np.array([1.0])], 1)
    assert mean[0] == pytest.approx(2.0) and var[0] == pytest.approx(1 / 3)
    assert stsim.gaussian_kl(np.array([1.0]), np.array([1.0])) == pytest.approx(0.5)
    assert stsim.bce_logits(np.zeros((1, 1)), np.full((1, 1), 0.5)) == pytest.approx(math.log(2))


def test_incline_threshold():
    theta = math.radians(20)
    assert stsim.incline_outcome(0.6, theta) == "stick"
    assert stsim.incline_outcome(0.3, theta) == "slide"


def test_simulated_episode_is_deterministic():
    a = stsim.simulate_episode("freefall", 3, resolution=16)
    b = stsim.simulate_episode("freefall", 3, resolution=16)
    assert a["visual"].shape[1:] == (16, 16, 3)
    assert a["pose"].shape[1] == 7
    assert np.array_equal(a["tactile"], b["tactile"])
    assert a["resting"]
    assert len(stsim.simulate_episode("perturb", 0, resolution=16)["condition"]) == 3
    with pytest.raises(ValueError):
        stsim.simulate_episode("sideways", 0)

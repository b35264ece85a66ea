"""End-to-end smoke checks of the compiled extension."""

import numpy as np
import pytest

import kslab


def make_scene(h=32, w=32, coils=2, noise=0.0, seed=7):
    src = kslab.perturbed_shepp_logan(h, w, seed)
    sens = kslab.simulate_sensitivities(h, w, coils)
    kspace = kslab.simulate_acquisition(src, sens, noise, seed + 1)
    return src, sens, kspace


def test_fft_roundtrip_and_energy():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(24, 18)) + 1j * rng.normal(size=(24, 18))
    back = kslab.ifft2c(kslab.fft2c(x))
    assert np.max(np.abs(back - x)) < 1e-12
    f = kslab.fft2c(x)
    assert abs((np.abs(x) ** 2).sum() - (np.abs(f) ** 2).sum()) < 1e-10 * (np.abs(x) ** 2).sum()


def test_masks_report_achieved_acceleration():
    m = kslab.mask_rectilinear(64, 64, 4.0, 1)
    assert m.array.shape == (64, 64)
    assert abs(m.achieved - 4.0) / 4.0 < 0.05
    cols = m.array.any(axis=0)
    assert (m.array == cols[None, :]).all()  # whole columns only
    with pytest.raises(ValueError):
        kslab.mask_radial(16, 16, 10.0, 1)


def test_adjoint_recovers_clean_scene():
    src, sens, kspace = make_scene(noise=0.0)
    x = kslab.adjoint(kspace, sens)
    assert np.max(np.abs(x - src)) < 1e-10


def test_forward_adjoint_pairing():
    rng = np.random.default_rng(1)
    _, sens, _ = make_scene()
    x = rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32))
    y = rng.normal(size=(2, 32, 32)) + 1j * rng.normal(size=(2, 32, 32))
    mask = kslab.mask_rectilinear(32, 32, 2.0, 3)
    ax = kslab.apply_mask(kslab.forward(x, sens), mask)
    aty = kslab.adjoint(kslab.apply_mask(y, mask), sens)
    lhs = np.vdot(ax, y)
    rhs = np.vdot(x, aty)
    assert abs(lhs - rhs) < 1e-10 * max(abs(lhs), abs(rhs))


def test_map_solve_beats_zero_filled():
    src, sens, kspace = make_scene(noise=0.0)
    mask = kslab.mask_rectilinear(32, 32, 2.0, 5)
    masked = kslab.apply_mask(kspace, mask)
    zf = np.abs(kslab.zero_filled_sense(masked, sens))
    x, iters, converged = kslab.solve_map_cg(masked, sens, mask, reg_lambda=1e-3, max_iters=60)
    assert iters > 0
    assert kslab.ssim(np.abs(x), src) > kslab.ssim(zf, src)


def test_metrics_closed_forms():
    t = kslab.shepp_logan(64, 64)
    assert kslab.ssim(t, t) == pytest.approx(1.0, abs=1e-12)
    assert kslab.vif(t, t) == pytest.approx(1.0, abs=1e-10)
    assert kslab.psnr(t + 0.1, t) == pytest.approx(20.0, rel=1e-12)


def test_silent_model_is_identity():
    src, sens, kspace = make_scene(noise=0.005)
    mask = kslab.mask_rectilinear(32, 32, 2.0, 9)
    masked = kslab.apply_mask(kspace, mask)
    model = kslab.make_model(time_steps=3, hidden_channels=2, seed=4)
    model.zero_()
    traj = kslab.rim_infer(model, masked, sens, mask)
    assert traj.shape == (3, 32, 32)
    x0 = kslab.zero_filled_sense(masked, sens)
    for t in range(3):
        assert (np.abs(traj[t]) == np.abs(x0)).all()


def test_checkpoint_roundtrip(tmp_path):
    model = kslab.make_model(time_steps=2, hidden_channels=2, seed=11)
    path = str(tmp_path / "model.rimckpt")
    model.save(path)
    back = kslab.load_model(path)
    assert back.time_steps == 2 and back.hidden_channels == 2
    src, sens, kspace = make_scene(noise=0.005)
    mask = kslab.mask_rectilinear(32, 32, 2.0, 9)
    masked = kslab.apply_mask(kspace, mask)
    a = kslab.rim_infer(model, masked, sens, mask)
    b = kslab.rim_infer(back, masked, sens, mask)
    assert (a == b).all()


def test_tensor_file_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    for arr in (
        rng.normal(size=(3, 4, 5)),
        rng.normal(size=(2, 6)) + 1j * rng.normal(size=(2, 6)),
        (rng.random(size=(4, 4)) > 0.5).astype(np.uint8),
    ):
        path = str(tmp_path / "t.kt")
        kslab.write_tensor(path, arr)
        back = kslab.read_tensor(path)
        assert back.dtype == arr.dtype
        assert (back == arr).all()
    bad = np.array([[1.0, np.nan]])
    bad_path = str(tmp_path / "bad.kt")
    kslab.write_tensor(bad_path, bad)  # writes are raw; reads validate
    with pytest.raises(ValueError):
        kslab.read_tensor(bad_path)

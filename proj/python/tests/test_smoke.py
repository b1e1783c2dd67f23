import json

import numpy as np
import pytest

import semaforge


def test_ssim_identity_is_one():
    rng = np.random.default_rng(0)
    a = rng.random((32, 32, 3), dtype=np.float32)
    assert semaforge.ssim(a, a) == pytest.approx(1.0, abs=1e-12)


def test_fid_of_shifted_gaussian():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((4000, 3))
    b = rng.standard_normal((4000, 3)) + np.array([2.0, 0.0, 0.0])
    # ||mu_a - mu_b||^2 = 4 with matching covariances.
    assert semaforge.fid(a, b) == pytest.approx(4.0, abs=0.3)
    assert semaforge.fid(a, a) == pytest.approx(0.0, abs=1e-6)


def test_window_origins_count():
    origins = semaforge.window_origins(512, 512, 64, 32)
    assert len(origins) == 15 * 15
    assert origins[0] == (0, 0) and origins[-1] == (448, 448)


def test_blend_keeps_pristine_outside_feather():
    pristine = np.zeros((24, 24, 3), dtype=np.float32)
    generated = np.ones((24, 24, 3), dtype=np.float32)
    mask = np.zeros((24, 24), dtype=np.uint8)
    mask[8:16, 8:16] = 1
    out = semaforge.blend(pristine, generated, mask, feather_radius=2)
    assert np.all(out[:5] == 0.0)
    assert np.all(out[11:13, 11:13] == 1.0)


def test_roc_auc_perfect_and_errors():
    assert semaforge.roc_auc([0.1, 0.9], [0, 1]) == 1.0
    with pytest.raises(ValueError):
        semaforge.roc_auc([0.1, 0.2], [1, 1])


def test_cli_exit_codes(tmp_path):
    code, _, err = semaforge.run_cli(["no-such-command"])
    assert code == 2 and "Usage" in err
    code, out, _ = semaforge.run_cli(
        ["--seed", "4", "prepare-data", "--out", str(tmp_path / "ds"), "--count", "3", "--size", "32"]
    )
    assert code == 0
    assert json.loads(out)["kept"] == 3

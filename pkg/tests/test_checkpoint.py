"""Checkpoint codec and sidecar"""

import numpy as np
import pytest

from app.core.exceptions import CheckpointError
from app.models.checkpoint import Checkpoint, decode, encode, load_checkpoint, save_checkpoint, sidecar_path


@pytest.fixture
def checkpoint():
    rng = np.random.default_rng(0)
    return Checkpoint(
        arrays={
            "encoder.W0": rng.normal(size=(2, 8)),
            "encoder.b0": np.zeros((1, 8)),
            "prototypes": rng.normal(size=(3, 4)),
            "mmd.sigma": np.array([1.25]),
        },
        step=42,
        epoch=3,
        config={"seed": 0, "lambda_mmd": 1.0},
    )


class TestCodec:

    def test_save_and_load(self, tmp_path, checkpoint):
        path = save_checkpoint(tmp_path / "run" / "checkpoint.bin", checkpoint)
        assert sidecar_path(path).exists()
        loaded = load_checkpoint(path)
        assert (loaded.step, loaded.epoch) == (42, 3)
        assert loaded.config == checkpoint.config
        assert list(loaded.arrays) == list(checkpoint.arrays)
        for name, array in checkpoint.arrays.items():
            np.testing.assert_array_equal(loaded.arrays[name], array)
            assert loaded.arrays[name].shape == array.shape

    def test_no_temporary_files_left(self, tmp_path, checkpoint):
        save_checkpoint(tmp_path / "checkpoint.bin", checkpoint)
        assert sorted(p.name for p in tmp_path.iterdir()) == ["checkpoint.bin", "checkpoint.json"]

    def test_bad_magic(self, checkpoint):
        payload = bytearray(encode(checkpoint))
        payload[:8] = b"NOTACKPT"
        with pytest.raises(CheckpointError, match="magic"):
            decode(bytes(payload))

    @pytest.mark.parametrize("cut", [4, 40, -3])
    def test_truncated(self, checkpoint, cut):
        payload = encode(checkpoint)
        with pytest.raises(CheckpointError):
            decode(payload[:cut])

    def test_trailing_bytes(self, checkpoint):
        with pytest.raises(CheckpointError, match="trailing"):
            decode(encode(checkpoint) + b"\x00")

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError, match="not found"):
            load_checkpoint(tmp_path / "absent.bin")

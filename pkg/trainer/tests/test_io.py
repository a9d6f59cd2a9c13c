import shutil
import subprocess

import numpy as np
import pytest

from jedtrainer.io import (
    FormatError,
    read_channels,
    read_score_weights,
    write_channels,
    write_score_weights,
)


def _random_mats(rng, count=6, n_rx=3, n_users=2):
    raw = rng.standard_normal((count, n_rx, n_users)) + 1j * rng.standard_normal((count, n_rx, n_users))
    # float32-exact values so round trips are bitwise
    return raw.astype(np.complex64).astype(np.complex128)


def test_channel_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    mats = _random_mats(rng)
    path = tmp_path / "c.bin"
    write_channels(path, mats, "iid_gaussian", seed=9)
    header, back = read_channels(path)
    assert header["descriptor"] == "iid_gaussian"
    assert header["seed"] == 9
    np.testing.assert_array_equal(back, mats)


def test_channel_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"WRONGMAG" + b"\0" * 60)
    with pytest.raises(FormatError):
        read_channels(path)


def test_channel_truncated(tmp_path):
    rng = np.random.default_rng(0)
    path = tmp_path / "c.bin"
    write_channels(path, _random_mats(rng), "iid", seed=1)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(FormatError):
        read_channels(path)


@pytest.mark.skipif(shutil.which("jedmimo") is None, reason="jedmimo CLI not installed")
def test_generator_round_trip_bit_for_bit(tmp_path):
    # the dataset written by the sampler package's CLI reads back identically
    path = tmp_path / "gen.bin"
    subprocess.run(
        ["jedmimo", "gen-channels", "--n-rx", "4", "--n-users", "2",
         "--count", "8", "--seed", "3", "--out", str(path)],
        check=True, capture_output=True,
    )
    header, mats = read_channels(path)
    assert header["count"] == 8 and mats.shape == (8, 4, 2)
    write_channels(tmp_path / "copy.bin", mats, header["descriptor"], header["seed"])
    assert (tmp_path / "copy.bin").read_bytes() == path.read_bytes()


def test_score_weights_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    dims = (5, 4, 4)
    ws = [rng.standard_normal((dims[i + 1], dims[i])).astype(np.float32) for i in range(2)]
    bs = [rng.standard_normal(dims[i + 1]).astype(np.float32) for i in range(2)]
    path = tmp_path / "w.bin"
    write_score_weights(path, dims, ws, bs, activations=(4, 0),
                        cond_offset=-1.0, cond_scale=0.5)
    back = read_score_weights(path)
    assert back["layer_dims"] == dims
    assert back["activations"] == (4, 0)
    assert back["cond_offset"] == pytest.approx(-1.0)
    for a, b in zip(back["weights"], ws):
        np.testing.assert_array_equal(a, b)


def test_score_weights_crc_guard(tmp_path):
    rng = np.random.default_rng(1)
    dims = (5, 4, 4)
    ws = [rng.standard_normal((dims[i + 1], dims[i])).astype(np.float32) for i in range(2)]
    bs = [np.zeros(dims[i + 1], dtype=np.float32) for i in range(2)]
    path = tmp_path / "w.bin"
    write_score_weights(path, dims, ws, bs, activations=(4, 0))
    blob = bytearray(path.read_bytes())
    blob[-10] ^= 0x40
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="CRC"):
        read_score_weights(path)

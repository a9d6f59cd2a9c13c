"""Channel dataset files (JEDCHAN1), the trainer's input format.

Binary layout, all multi-byte fields little-endian:

    offset  field
    0       magic ``b"JEDCHAN1"`` (8 bytes)
    8       u32  n_rx
    12      u32  n_users
    16      u32  count
    20      16 bytes  model descriptor (ASCII, NUL padded)
    36      u64  seed used to generate the records
    44      records: count x (n_rx * n_users) complex entries, row-major,
            interleaved (Re, Im) float32
"""

import struct

import numpy as np

from .errors import ConfigurationError, FormatError
from .model import ChannelModel, SystemDims, sample_channel

MAGIC = b"JEDCHAN1"
_HEADER = struct.Struct("<8sIII16sQ")


def write_channel_dataset(path, matrices: np.ndarray, descriptor: str, seed: int) -> None:
    """Write (count, n_rx, n_users) complex matrices as a JEDCHAN1 file."""
    matrices = np.asarray(matrices)
    if matrices.ndim != 3:
        raise ConfigurationError("expected a (count, n_rx, n_users) array")
    count, n_rx, n_users = matrices.shape
    desc = descriptor.encode("ascii")
    if len(desc) > 16:
        raise ConfigurationError(f"model descriptor {descriptor!r} exceeds 16 bytes")
    interleaved = np.empty((count, n_rx, n_users, 2), dtype="<f4")
    interleaved[..., 0] = matrices.real
    interleaved[..., 1] = matrices.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n_rx, n_users, count, desc.ljust(16, b"\0"), seed))
        fh.write(interleaved.tobytes())


def read_channel_dataset(path):
    """Read a JEDCHAN1 file; returns (header dict, (count, n_rx, n_users) complex128)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated JEDCHAN1 header ({len(blob)} bytes)")
    magic, n_rx, n_users, count, desc, seed = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad JEDCHAN1 file at byte 0: magic {magic!r}")
    expected = _HEADER.size + count * n_rx * n_users * 8
    if len(blob) != expected:
        raise FormatError(
            f"{path}: bad JEDCHAN1 file at byte {_HEADER.size}: "
            f"length {len(blob)} != expected {expected}"
        )
    flat = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    pairs = flat.reshape(count, n_rx, n_users, 2).astype(np.float64)
    header = dict(
        n_rx=n_rx,
        n_users=n_users,
        count=count,
        descriptor=desc.rstrip(b"\0").decode("ascii"),
        seed=seed,
    )
    return header, pairs[..., 0] + 1j * pairs[..., 1]


def generate_channel_dataset(
    model: ChannelModel, dims: SystemDims, count: int, seed: int, path, descriptor: str | None = None
) -> None:
    """Sample `count` channels with a fresh generator and write them out."""
    if count < 1:
        raise ConfigurationError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    matrices = np.empty((count, dims.n_rx, dims.n_users), dtype=np.complex128)
    for i in range(count):
        matrices[i] = sample_channel(model, dims, rng)
    write_channel_dataset(path, matrices, descriptor or model.descriptor, seed)

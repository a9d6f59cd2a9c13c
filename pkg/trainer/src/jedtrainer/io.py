"""JEDCHAN1 reading and JEDSCORE1 writing.

Independent implementations of the two binary interchange formats (the
layouts are documented in the main package README); this package talks to
the sampler side only through these files and its CLI.
"""

import struct
import zlib

import numpy as np

CHAN_MAGIC = b"JEDCHAN1"
_CHAN_HEADER = struct.Struct("<8sIII16sQ")

SCORE_MAGIC = b"JEDSCORE1"
ENDIAN_MARKER = 0x0102

ACT_IDENTITY = 0
ACT_RELU = 1
ACT_TANH = 2
ACT_SOFTPLUS = 3
ACT_SILU = 4

COND_RAW_SIGMA = 0
COND_LOG_SIGMA = 1


class FormatError(ValueError):
    pass


def read_channels(path):
    """Read a JEDCHAN1 dataset; returns (header dict, (count, n_rx, n_users) complex64)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _CHAN_HEADER.size or blob[:8] != CHAN_MAGIC:
        raise FormatError(f"{path}: not a JEDCHAN1 file")
    magic, n_rx, n_users, count, desc, seed = _CHAN_HEADER.unpack_from(blob, 0)
    expected = _CHAN_HEADER.size + count * n_rx * n_users * 8
    if len(blob) != expected:
        raise FormatError(f"{path}: length {len(blob)} != expected {expected}")
    flat = np.frombuffer(blob, dtype="<f4", offset=_CHAN_HEADER.size)
    pairs = flat.reshape(count, n_rx, n_users, 2)
    header = dict(
        n_rx=n_rx, n_users=n_users, count=count,
        descriptor=desc.rstrip(b"\0").decode("ascii"), seed=seed,
    )
    return header, pairs[..., 0] + 1j * pairs[..., 1]


def write_channels(path, matrices, descriptor: str, seed: int) -> None:
    """Write a JEDCHAN1 dataset (used for test fixtures)."""
    matrices = np.asarray(matrices)
    count, n_rx, n_users = matrices.shape
    pairs = np.empty((count, n_rx, n_users, 2), dtype="<f4")
    pairs[..., 0] = matrices.real
    pairs[..., 1] = matrices.imag
    with open(path, "wb") as fh:
        fh.write(_CHAN_HEADER.pack(
            CHAN_MAGIC, n_rx, n_users, count,
            descriptor.encode("ascii").ljust(16, b"\0"), seed,
        ))
        fh.write(pairs.tobytes())


def write_score_weights(path, layer_dims, weights, biases, activations,
                        conditioning=COND_LOG_SIGMA, input_scale=1.0,
                        cond_offset=0.0, cond_scale=1.0) -> None:
    """Write a JEDSCORE1 weights file from parameter arrays."""
    n_layers = len(weights)
    header = bytearray()
    header += SCORE_MAGIC
    header += struct.pack("<H", ENDIAN_MARKER)
    header += struct.pack("<I", n_layers)
    header += struct.pack(f"<{n_layers + 1}I", *layer_dims)
    header += struct.pack(f"<{n_layers}I", *activations)
    header += struct.pack("<I", conditioning)
    header += struct.pack("<3f", input_scale, cond_offset, cond_scale)

    params = bytearray()
    for w, b in zip(weights, biases):
        params += np.ascontiguousarray(w, dtype="<f4").tobytes()
        params += np.ascontiguousarray(b, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(header))
        fh.write(bytes(params))
        fh.write(struct.pack("<I", zlib.crc32(bytes(params)) & 0xFFFFFFFF))


def read_score_weights(path):
    """Read back a JEDSCORE1 file (round-trip checks); returns a plain dict."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:9] != SCORE_MAGIC:
        raise FormatError(f"{path}: bad magic")
    (marker,) = struct.unpack_from("<H", blob, 9)
    if marker != ENDIAN_MARKER:
        raise FormatError(f"{path}: bad endianness marker 0x{marker:04x}")
    (n_layers,) = struct.unpack_from("<I", blob, 11)
    off = 15
    dims = struct.unpack_from(f"<{n_layers + 1}I", blob, off)
    off += 4 * (n_layers + 1)
    acts = struct.unpack_from(f"<{n_layers}I", blob, off)
    off += 4 * n_layers
    (conditioning,) = struct.unpack_from("<I", blob, off)
    off += 4
    input_scale, cond_offset, cond_scale = struct.unpack_from("<3f", blob, off)
    off += 12
    n_params = sum(dims[i + 1] * (dims[i] + 1) for i in range(n_layers))
    params = blob[off : off + 4 * n_params]
    (crc_stored,) = struct.unpack_from("<I", blob, off + 4 * n_params)
    if zlib.crc32(params) & 0xFFFFFFFF != crc_stored:
        raise FormatError(f"{path}: CRC mismatch")
    flat = np.frombuffer(params, dtype="<f4")
    weights, biases, cursor = [], [], 0
    for i in range(n_layers):
        d_in, d_out = dims[i], dims[i + 1]
        weights.append(flat[cursor : cursor + d_out * d_in].reshape(d_out, d_in).copy())
        cursor += d_out * d_in
        biases.append(flat[cursor : cursor + d_out].copy())
        cursor += d_out
    return dict(
        layer_dims=tuple(dims), weights=weights, biases=biases,
        activations=tuple(acts), conditioning=int(conditioning),
        input_scale=float(input_scale), cond_offset=float(cond_offset),
        cond_scale=float(cond_scale),
    )

"""Portable feed-forward score-network weights (JEDSCORE1 files).

Binary layout, all multi-byte fields little-endian:

    offset  field
    0       magic ``b"JEDSCORE1"`` (9 bytes)
    9       u16  endianness marker 0x0102
    11      u32  n_layers (affine layers)
    15      u32  x (n_layers + 1)   layer dims d_0 .. d_L
    ...     u32  x n_layers         activation id applied after each layer
    ...     u32  conditioning id (0: raw sigma appended, 1: ln(sigma) appended)
    ...     f32  x 3                input_scale, cond_offset, cond_scale
    ...     parameter region: per layer, W (d_out x d_in, row-major f32)
            followed by b (d_out f32)
    ...     u32  CRC-32 of the parameter region

The network consumes the real-stacked flattened channel matrix:
``[Re(vec(H)) * input_scale, Im(vec(H)) * input_scale, c]`` with
``c = (ln(sigma) - cond_offset) * cond_scale`` for conditioning id 1
(or the same affine map of raw sigma for id 0), so d_0 = 2*n_rx*n_users + 1.
The output is the score itself, real-stacked the same way.
"""

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, FormatError

MAGIC = b"JEDSCORE1"
ENDIAN_MARKER = 0x0102

ACT_IDENTITY = 0
ACT_RELU = 1
ACT_TANH = 2
ACT_SOFTPLUS = 3
ACT_SILU = 4

COND_RAW_SIGMA = 0
COND_LOG_SIGMA = 1

_MIN_SIGMA = 1e-12


def _identity(x):
    return x


def _relu(x):
    return np.maximum(x, 0.0)


def _softplus(x):
    return np.logaddexp(0.0, x)


def _silu(x):
    return x / (1.0 + np.exp(-x))


_ACTIVATIONS = {
    ACT_IDENTITY: _identity,
    ACT_RELU: _relu,
    ACT_TANH: np.tanh,
    ACT_SOFTPLUS: _softplus,
    ACT_SILU: _silu,
}


@dataclass(frozen=True)
class ScoreModelWeights:
    layer_dims: tuple
    weights: tuple        # per layer, (d_out, d_in) float64
    biases: tuple         # per layer, (d_out,) float64
    activations: tuple    # activation id per layer
    conditioning: int = COND_LOG_SIGMA
    input_scale: float = 1.0
    cond_offset: float = 0.0
    cond_scale: float = 1.0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) != len(self.weights) + 1 or len(self.weights) != len(self.biases):
            raise ConfigurationError("layer_dims must chain the weight/bias lists")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i + 1], dims[i]) or b.shape != (dims[i + 1],):
                raise ConfigurationError(
                    f"layer {i} parameter shapes {w.shape}/{b.shape} do not chain dims {dims}"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ConfigurationError(f"layer {i} contains non-finite parameters")
        for a in self.activations:
            if a not in _ACTIVATIONS:
                raise ConfigurationError(f"unknown activation id {a}")
        if self.conditioning not in (COND_RAW_SIGMA, COND_LOG_SIGMA):
            raise ConfigurationError(f"unknown conditioning id {self.conditioning}")


def save_score_weights(path, w: ScoreModelWeights) -> None:
    n_layers = len(w.weights)
    header = bytearray()
    header += MAGIC
    header += struct.pack("<H", ENDIAN_MARKER)
    header += struct.pack("<I", n_layers)
    header += struct.pack(f"<{n_layers + 1}I", *w.layer_dims)
    header += struct.pack(f"<{n_layers}I", *w.activations)
    header += struct.pack("<I", w.conditioning)
    header += struct.pack("<3f", w.input_scale, w.cond_offset, w.cond_scale)

    params = bytearray()
    for wm, bv in zip(w.weights, w.biases):
        params += np.ascontiguousarray(wm, dtype="<f4").tobytes()
        params += np.ascontiguousarray(bv, dtype="<f4").tobytes()

    with open(path, "wb") as fh:
        fh.write(bytes(header))
        fh.write(bytes(params))
        fh.write(struct.pack("<I", zlib.crc32(bytes(params)) & 0xFFFFFFFF))


def load_score_weights(path) -> ScoreModelWeights:
    with open(path, "rb") as fh:
        blob = fh.read()

    def fail(offset, why):
        raise FormatError(f"{path}: bad JEDSCORE1 file at byte {offset}: {why}")

    if len(blob) < 15:
        fail(0, "truncated header")
    if blob[:9] != MAGIC:
        fail(0, f"magic {blob[:9]!r} != {MAGIC!r}")
    (marker,) = struct.unpack_from("<H", blob, 9)
    if marker != ENDIAN_MARKER:
        fail(9, f"endianness marker 0x{marker:04x} != 0x{ENDIAN_MARKER:04x}")
    (n_layers,) = struct.unpack_from("<I", blob, 11)
    if n_layers < 1 or n_layers > 1024:
        fail(11, f"implausible layer count {n_layers}")
    off = 15
    need = 4 * (n_layers + 1) + 4 * n_layers + 4 + 12
    if len(blob) < off + need:
        fail(off, "truncated header")
    dims = struct.unpack_from(f"<{n_layers + 1}I", blob, off)
    off += 4 * (n_layers + 1)
    acts = struct.unpack_from(f"<{n_layers}I", blob, off)
    off += 4 * n_layers
    (conditioning,) = struct.unpack_from("<I", blob, off)
    off += 4
    input_scale, cond_offset, cond_scale = struct.unpack_from("<3f", blob, off)
    off += 12

    n_params = sum(dims[i + 1] * dims[i] + dims[i + 1] for i in range(n_layers))
    params_end = off + 4 * n_params
    if len(blob) != params_end + 4:
        fail(params_end, f"file length {len(blob)} != expected {params_end + 4}")
    params = blob[off:params_end]
    (crc_stored,) = struct.unpack_from("<I", blob, params_end)
    crc = zlib.crc32(params) & 0xFFFFFFFF
    if crc != crc_stored:
        fail(params_end, f"parameter CRC-32 0x{crc:08x} != stored 0x{crc_stored:08x}")

    flat = np.frombuffer(params, dtype="<f4").astype(np.float64)
    weights, biases = [], []
    cursor = 0
    for i in range(n_layers):
        d_in, d_out = dims[i], dims[i + 1]
        weights.append(flat[cursor : cursor + d_out * d_in].reshape(d_out, d_in))
        cursor += d_out * d_in
        biases.append(flat[cursor : cursor + d_out])
        cursor += d_out
    try:
        return ScoreModelWeights(
            layer_dims=tuple(dims),
            weights=tuple(weights),
            biases=tuple(biases),
            activations=tuple(acts),
            conditioning=int(conditioning),
            input_scale=float(input_scale),
            cond_offset=float(cond_offset),
            cond_scale=float(cond_scale),
        )
    except ConfigurationError as e:
        raise FormatError(f"{path}: inconsistent JEDSCORE1 header: {e}") from e


def evaluate_score_network(w: ScoreModelWeights, H: np.ndarray, sigma: float) -> np.ndarray:
    """Run the network on one complex matrix; returns the complex score matrix."""
    H = np.asarray(H, dtype=np.complex128)
    d = 2 * H.size
    if w.layer_dims[0] != d + 1:
        raise ConfigurationError(
            f"network input dim {w.layer_dims[0]} does not match matrix "
            f"{H.shape} (expected {d + 1})"
        )
    if w.layer_dims[-1] != d:
        raise ConfigurationError(
            f"network output dim {w.layer_dims[-1]} does not match matrix {H.shape}"
        )
    s = max(float(sigma), _MIN_SIGMA)
    cond = np.log(s) if w.conditioning == COND_LOG_SIGMA else s
    z = np.empty(d + 1)
    z[: d // 2] = H.real.ravel() * w.input_scale
    z[d // 2 : d] = H.imag.ravel() * w.input_scale
    z[d] = (cond - w.cond_offset) * w.cond_scale
    for wm, bv, act in zip(w.weights, w.biases, w.activations):
        z = _ACTIVATIONS[act](wm @ z + bv)
    out = z[: d // 2] + 1j * z[d // 2 :]
    return out.reshape(H.shape)

"""Binary checkpoint format for parameter matrices.

Layout: 8 magic bytes, u32 version, u32 matrix count, then one (rows, cols)
u32 pair per matrix, then all matrix data row-major as little-endian
float64. Round-trips are bit-exact.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ConfigError

MAGIC = b"INETCKPT"
VERSION = 1


def save_matrices(path, matrices: list[np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(matrices)))
        shaped = []
        for mat in matrices:
            mat = np.atleast_2d(np.asarray(mat, dtype=np.float64))
            if mat.ndim != 2:
                raise ConfigError("checkpoint matrices must be at most 2-D")
            fh.write(struct.pack("<II", mat.shape[0], mat.shape[1]))
            shaped.append(mat)
        for mat in shaped:
            fh.write(np.ascontiguousarray(mat).astype("<f8").tobytes())


def load_matrices(path) -> list[np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ConfigError(f"bad checkpoint magic {magic!r}")
        version, count = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise ConfigError(f"unsupported checkpoint version {version}")
        shapes = [struct.unpack("<II", fh.read(8)) for _ in range(count)]
        matrices = []
        for rows, cols in shapes:
            raw = fh.read(rows * cols * 8)
            if len(raw) != rows * cols * 8:
                raise ConfigError("truncated checkpoint data")
            matrices.append(np.frombuffer(raw, dtype="<f8").reshape(rows, cols).copy())
        if fh.read(1):
            raise ConfigError("trailing bytes after checkpoint data")
    return matrices


def network_matrices(net, head=None) -> list[np.ndarray]:
    """Weights and biases interleaved per layer; head appended when given."""
    mats = []
    for w, b in zip(net.weights, net.biases):
        mats.extend((w, b.reshape(1, -1)))
    if head is not None:
        mats.extend((head.weight, head.bias.reshape(1, -1)))
    return mats


def restore_network(net, matrices: list[np.ndarray], head=None) -> None:
    """Load matrices produced by network_matrices back into place."""
    expected = 2 * net.num_layers + (2 if head is not None else 0)
    if len(matrices) != expected:
        raise ConfigError(
            f"checkpoint holds {len(matrices)} matrices, expected {expected}"
        )
    for i in range(net.num_layers):
        w, b = matrices[2 * i], matrices[2 * i + 1]
        if w.shape != net.weights[i].shape or b.size != net.biases[i].size:
            raise ConfigError(f"layer {i} shape mismatch in checkpoint")
        net.weights[i][...] = w
        net.biases[i][...] = b.ravel()
    if head is not None:
        w, b = matrices[-2], matrices[-1]
        if w.shape != head.weight.shape or b.size != head.bias.size:
            raise ConfigError("classifier head shape mismatch in checkpoint")
        head.weight[...] = w
        head.bias[...] = b.ravel()

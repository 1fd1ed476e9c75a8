"""Bit-packing kernels for the 7-bit broadcast alphabet.

Septets are packed LSB-first: bit i of the septet stream lands in bit
(i mod 8) of octet (i // 8).  Two implementations are provided, a numba
jitted loop and a vectorized numpy path.  Selection happens at import
time: set PWSIM_NO_NUMBA=1 to force the numpy path (it is also used
automatically when numba is unavailable).
"""

from __future__ import annotations

import os

import numpy as np


def _pack_py(septets):
    # reference loop, also the source for the numba kernel
    n = septets.shape[0]
    out = np.zeros((7 * n + 7) // 8, dtype=np.uint8)
    for i in range(n):
        s = septets[i]
        for b in range(7):
            bit = (s >> b) & 1
            pos = 7 * i + b
            out[pos >> 3] |= bit << (pos & 7)
    return out


def _unpack_py(octets, count):
    out = np.zeros(count, dtype=np.uint8)
    for i in range(count):
        v = 0
        for b in range(7):
            pos = 7 * i + b
            v |= ((octets[pos >> 3] >> (pos & 7)) & 1) << b
        out[i] = v
    return out


def _pack_np(septets):
    bits = np.unpackbits(septets.reshape(-1, 1), axis=1, bitorder="little")[:, :7]
    stream = bits.reshape(-1)
    pad = (-stream.shape[0]) % 8
    if pad:
        stream = np.concatenate([stream, np.zeros(pad, dtype=np.uint8)])
    return np.packbits(stream, bitorder="little")


def _unpack_np(octets, count):
    stream = np.unpackbits(octets, bitorder="little")[: 7 * count]
    bits = stream.reshape(count, 7)
    weights = (1 << np.arange(7, dtype=np.uint16)).astype(np.uint16)
    return (bits.astype(np.uint16) @ weights).astype(np.uint8)


_want_numba = os.environ.get("PWSIM_NO_NUMBA", "") not in ("1", "true", "yes")

if _want_numba:
    try:
        from numba import njit

        _pack_jit = njit(cache=True)(_pack_py)
        _unpack_jit = njit(cache=True)(_unpack_py)
        BACKEND = "numba"
    except ImportError:
        BACKEND = "numpy"
else:
    BACKEND = "numpy"


def pack_septets(septets: np.ndarray) -> bytes:
    """Pack an array of septet values (uint8, each < 0x80) into octets."""
    arr = np.ascontiguousarray(septets, dtype=np.uint8)
    if arr.size == 0:
        return b""
    if BACKEND == "numba":
        return _pack_jit(arr).tobytes()
    return _pack_np(arr).tobytes()


def unpack_septets(octets: bytes, count: int) -> np.ndarray:
    """Recover the first `count` septets from an LSB-first packed octet string."""
    if count == 0:
        return np.zeros(0, dtype=np.uint8)
    need = (7 * count + 7) // 8
    if len(octets) < need:
        raise ValueError("octet string too short for %d septets" % count)
    arr = np.frombuffer(octets, dtype=np.uint8)
    if BACKEND == "numba":
        return _unpack_jit(arr, count)
    return _unpack_np(arr, count)


def max_septets(n_octets: int) -> int:
    """How many whole septets fit in n_octets."""
    return (8 * n_octets) // 7

"""Bit-exact checkpoint file format.

Layout: magic "STNPCKPT", version u32 LE, entry count u32 LE, then per
entry: name length u16 + UTF-8 name, rank u8, dims as u32 LE list, values
as float64 LE.  Entries are sorted by name; parameters only (optimiser
slots are rebuildable and stay out of the format).
"""

from __future__ import annotations

import struct

import numpy as np

from ..diffengine import ParamStore
from ..errors import DataError

MAGIC = b"STNPCKPT"
VERSION = 1


def save_checkpoint(store: ParamStore, path) -> None:
    names = sorted(store.params)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(names)))
        for name in names:
            arr = store.params[name]
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> ParamStore:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise DataError(f"{path}: not a checkpoint file (bad magic)")
    off = len(MAGIC)
    version, count = struct.unpack_from("<II", blob, off)
    off += 8
    if version != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    store = ParamStore()
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off : off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<B", blob, off)
        off += 1
        dims = struct.unpack_from(f"<{rank}I", blob, off) if rank else ()
        off += 4 * rank
        n = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=off).astype(np.float64)
        off += 8 * n
        store.add(name, arr.reshape(dims))
    if off != len(blob):
        raise DataError(f"{path}: trailing bytes after last checkpoint entry")
    return store

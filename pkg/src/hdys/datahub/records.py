"""On-disk dataset layout: binary sequence records plus a JSON manifest.

Record layout (magic "HDYSREC1", integers little-endian, payload float64):

    magic, u32 version,
    seq_id / profile_id / tree_name as u16-length-prefixed utf-8,
    f64 fps, f64 subject_mass, u32 n_frames, u32 n_actuated,
    u32 n_marker_ids, n * i64 marker ids,
    u8 n_channels, per channel: name, u8 rank, rank * u32 extents, payload

Round trips are lossless: payloads are raw float64 bytes.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from ..kinrep import CHANNELS, SequenceRecord

MAGIC = b"HDYSREC1"
VERSION = 1


class DatasetError(Exception):
    pass


def _pstr(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def record_to_bytes(rec: SequenceRecord) -> bytes:
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<I", VERSION)
    buf += _pstr(rec.seq_id)
    buf += _pstr(rec.profile_id)
    buf += _pstr(rec.tree_name)
    buf += struct.pack("<ddII", rec.fps, rec.subject_mass, rec.n_frames, rec.n_actuated)
    buf += struct.pack("<I", rec.marker_ids.size)
    buf += rec.marker_ids.astype("<i8").tobytes()
    names = [c for c in CHANNELS if c in rec.channels]
    buf += struct.pack("<B", len(names))
    for name in names:
        a = rec.channels[name]
        buf += _pstr(name)
        buf += struct.pack("<B", a.ndim)
        for e in a.shape:
            buf += struct.pack("<I", e)
        buf += np.ascontiguousarray(a, dtype="<f8").tobytes()
    return bytes(buf)


def record_from_bytes(data: bytes) -> SequenceRecord:
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise DatasetError("truncated record file")
        out = data[pos : pos + n]
        pos += n
        return out

    def unpack(fmt):
        vals = struct.unpack(fmt, take(struct.calcsize(fmt)))
        return vals[0] if len(vals) == 1 else vals

    def pstr():
        return take(unpack("<H")).decode("utf-8")

    if take(len(MAGIC)) != MAGIC:
        raise DatasetError("bad magic: not a sequence record")
    version = unpack("<I")
    if version != VERSION:
        raise DatasetError(f"unsupported record version {version}")
    seq_id, profile_id, tree_name = pstr(), pstr(), pstr()
    fps, mass, n_frames, n_act = unpack("<ddII")
    n_ids = unpack("<I")
    marker_ids = np.frombuffer(take(8 * n_ids), dtype="<i8").astype(np.int64)
    n_ch = unpack("<B")
    channels = {}
    for _ in range(n_ch):
        name = pstr()
        if name not in CHANNELS:
            raise DatasetError(f"unknown channel '{name}' in record")
        rank = unpack("<B")
        shape = tuple(unpack("<I") for _ in range(rank))
        count = int(np.prod(shape))
        channels[name] = np.frombuffer(take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)
        if shape[0] != n_frames:
            raise DatasetError(f"channel '{name}' frame count disagrees with header")
    if pos != len(data):
        raise DatasetError("trailing bytes after record payload")
    try:
        return SequenceRecord(
            seq_id=seq_id,
            profile_id=profile_id,
            tree_name=tree_name,
            fps=fps,
            subject_mass=mass,
            channels=channels,
            marker_ids=marker_ids,
            n_actuated=n_act,
        )
    except Exception as exc:
        raise DatasetError(f"record fails validation: {exc}") from exc


def write_record(path, rec: SequenceRecord) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(record_to_bytes(rec))
    os.replace(tmp, path)


def read_record(path) -> SequenceRecord:
    with open(path, "rb") as fh:
        return record_from_bytes(fh.read())


def record_path(root, profile_id: str, seq_id: str) -> str:
    return os.path.join(root, profile_id, f"{seq_id}.rec")

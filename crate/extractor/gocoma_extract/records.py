"""EMBR0001 record files.

Magic ``EMBR0001`` then records, little-endian::

    u32 id_len | id (UTF-8) | u32 label | u8 modality (0 code, 1 image)
    | u32 T | u32 d | T*d float32, token-major
"""

import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

MAGIC = b"EMBR0001"
CODE = 0
IMAGE = 1

_HEAD = struct.Struct("<I")
_TAIL = struct.Struct("<IBII")


class FormatError(ValueError):
    pass


@dataclass
class Record:
    id: str
    label: int
    modality: int
    tokens: np.ndarray  # (T, d) float32

    def __post_init__(self):
        self.tokens = np.ascontiguousarray(self.tokens, dtype="<f4")
        if self.tokens.ndim == 1:
            self.tokens = self.tokens[None, :]
        self.validate()

    def validate(self):
        if not self.id:
            raise FormatError("record with empty id")
        if self.modality not in (CODE, IMAGE):
            raise FormatError(f"record {self.id}: bad modality {self.modality}")
        if not 0 <= self.label < 2**32:
            raise FormatError(f"record {self.id}: label out of range")
        if self.tokens.ndim != 2 or 0 in self.tokens.shape:
            raise FormatError(f"record {self.id}: tokens must be a non-empty (T, d) array")
        if not np.isfinite(self.tokens).all():
            raise FormatError(f"record {self.id}: non-finite value")

    @property
    def dim(self):
        return self.tokens.shape[1]


def encode(records):
    parts = [MAGIC]
    for r in records:
        r.validate()
        rid = r.id.encode("utf-8")
        t, d = r.tokens.shape
        parts.append(_HEAD.pack(len(rid)))
        parts.append(rid)
        parts.append(_TAIL.pack(r.label, r.modality, t, d))
        parts.append(r.tokens.astype("<f4").tobytes())
    return b"".join(parts)


def decode(buf):
    if buf[:8] != MAGIC:
        raise FormatError("missing EMBR0001 magic")
    at = 8
    out = []

    def take(n):
        nonlocal at
        if at + n > len(buf):
            raise FormatError(f"record file truncated at byte {at}")
        s = buf[at:at + n]
        at += n
        return s

    while at < len(buf):
        (n,) = _HEAD.unpack(take(4))
        rid = take(n).decode("utf-8")
        label, modality, t, d = _TAIL.unpack(take(_TAIL.size))
        data = np.frombuffer(take(4 * t * d), dtype="<f4").reshape(t, d)
        out.append(Record(rid, label, modality, data.copy()))
    return out


def write_records(records, path):
    """Atomic write: a temp file in the target directory, then rename."""
    data = encode(records)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".embr-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_records(path):
    with open(path, "rb") as f:
        return decode(f.read())

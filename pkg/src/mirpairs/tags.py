"""Time-tag streams and their on-disk formats.

Binary layout (little endian)::

    8 bytes   magic b"MIRTAGS\\x01"
    u32       header length in bytes
    ...       UTF-8 JSON header (seed, power, duration, rep rate, input hashes)
    9 bytes * n   records of (u8 channel, i64 time_ps)

The CSV mode carries the same header as a ``# header {json}`` comment line
followed by ``channel,time_ps`` rows, channel written as A or B.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import asdict, dataclass, field, is_dataclass
from pathlib import Path

import numpy as np

CH_A = 0
CH_B = 1
CHANNEL_NAMES = ("A", "B")
MAGIC = b"MIRTAGS\x01"
RECORD = np.dtype([("channel", "u1"), ("time_ps", "<i8")])


class TagFormatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def spec_hash(obj) -> str:
    """Short stable digest of a dataclass or JSON-able object."""
    data = asdict(obj) if is_dataclass(obj) else obj
    blob = json.dumps(data, sort_keys=True, default=float).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class TagStream:
    channel: np.ndarray
    time_ps: np.ndarray
    header: dict = field(default_factory=dict)

    def __post_init__(self):
        self.channel = np.asarray(self.channel, dtype=np.uint8)
        self.time_ps = np.asarray(self.time_ps, dtype=np.int64)
        if self.channel.shape != self.time_ps.shape:
            raise ValueError("channel and time arrays differ in length")

    def __len__(self):
        return self.time_ps.size

    def times(self, channel: int) -> np.ndarray:
        return self.time_ps[self.channel == channel]

    @property
    def duration(self) -> float:
        return float(self.header.get("duration_s", 0.0))

    @property
    def rep_rate(self) -> float | None:
        r = self.header.get("rep_rate_hz")
        return None if r is None else float(r)

    @property
    def power(self) -> float | None:
        p = self.header.get("power_W")
        return None if p is None else float(p)

    def counts(self) -> tuple[int, int]:
        return int(np.sum(self.channel == CH_A)), int(np.sum(self.channel == CH_B))

    def check(self, dead_time_ps: int = 0) -> None:
        """Sortedness, non-negativity and dead-time spacing; raises AssertionError."""
        assert np.all(self.time_ps >= 0), "negative time tag"
        assert np.all(np.isin(self.channel, (CH_A, CH_B))), "unknown channel"
        for ch in (CH_A, CH_B):
            d = np.diff(self.times(ch))
            assert np.all(d >= 0), f"channel {CHANNEL_NAMES[ch]} not sorted"
            if dead_time_ps > 0:
                assert np.all(d >= dead_time_ps), f"dead time violated on {CHANNEL_NAMES[ch]}"

    def to_bytes(self) -> bytes:
        head = json.dumps(self.header, sort_keys=True).encode()
        rec = np.empty(len(self), RECORD)
        rec["channel"] = self.channel
        rec["time_ps"] = self.time_ps
        return MAGIC + struct.pack("<I", len(head)) + head + rec.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "TagStream":
        if data[:8] != MAGIC:
            raise TagFormatError("bad magic number", 0)
        if len(data) < 12:
            raise TagFormatError("truncated header length", 8)
        (hlen,) = struct.unpack_from("<I", data, 8)
        if 12 + hlen > len(data):
            raise TagFormatError("header extends past end of file", 12)
        try:
            header = json.loads(data[12:12 + hlen].decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise TagFormatError(f"unreadable header: {exc}", 12) from None
        if not isinstance(header, dict):
            raise TagFormatError("header must be a JSON object", 12)
        start = 12 + hlen
        body = len(data) - start
        if body % RECORD.itemsize:
            bad = start + (body // RECORD.itemsize) * RECORD.itemsize
            raise TagFormatError("trailing partial record", bad)
        rec = np.frombuffer(data, RECORD, offset=start)
        stream = cls(rec["channel"].copy(), rec["time_ps"].copy(), header)
        _validate(stream, lambda i: start + i * RECORD.itemsize)
        return stream

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# header " + json.dumps(self.header, sort_keys=True) + "\n")
        buf.write("channel,time_ps\n")
        names = np.array(CHANNEL_NAMES)[self.channel]
        for c, t in zip(names, self.time_ps):
            buf.write(f"{c},{t}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TagStream":
        header = {}
        chans, times, offsets = [], [], []
        offset = 0
        seen_columns = False
        for line in text.splitlines(keepends=True):
            s = line.strip()
            if s.startswith("# header "):
                try:
                    header = json.loads(s[len("# header "):])
                except json.JSONDecodeError as exc:
                    raise TagFormatError(f"unreadable header: {exc}", offset) from None
            elif s and not s.startswith("#"):
                if not seen_columns:
                    if s != "channel,time_ps":
                        raise TagFormatError("expected column line 'channel,time_ps'", offset)
                    seen_columns = True
                else:
                    parts = s.split(",")
                    if len(parts) != 2 or parts[0] not in CHANNEL_NAMES:
                        raise TagFormatError(f"malformed record {s!r}", offset)
                    try:
                        times.append(int(parts[1]))
                    except ValueError:
                        raise TagFormatError(f"malformed time {parts[1]!r}", offset) from None
                    chans.append(CHANNEL_NAMES.index(parts[0]))
                    offsets.append(offset)
            offset += len(line.encode())
        stream = cls(np.array(chans, np.uint8), np.array(times, np.int64), header)
        _validate(stream, lambda i: offsets[i])
        return stream


def _validate(stream: TagStream, offset_of) -> None:
    ch, t = stream.channel, stream.time_ps
    bad = np.nonzero(ch > CH_B)[0]
    if bad.size:
        raise TagFormatError(f"unknown channel {int(ch[bad[0]])}", offset_of(int(bad[0])))
    bad = np.nonzero(t < 0)[0]
    if bad.size:
        raise TagFormatError("negative time", offset_of(int(bad[0])))
    for c in (CH_A, CH_B):
        idx = np.nonzero(ch == c)[0]
        back = np.nonzero(np.diff(t[idx]) < 0)[0]
        if back.size:
            raise TagFormatError(f"channel {CHANNEL_NAMES[c]} out of order", offset_of(int(idx[back[0] + 1])))


def write_tags(path, stream: TagStream, fmt: str = "bin") -> Path:
    path = Path(path)
    if fmt == "bin":
        path.write_bytes(stream.to_bytes())
    elif fmt == "csv":
        path.write_text(stream.to_csv())
    else:
        raise ValueError(f"unknown tag format {fmt!r}")
    return path


def read_tags(path) -> TagStream:
    path = Path(path)
    data = path.read_bytes()
    if data[:8] == MAGIC:
        return TagStream.from_bytes(data)
    try:
        text = data.decode()
    except UnicodeDecodeError:
        raise TagFormatError("neither a binary tag file nor UTF-8 CSV", 0) from None
    return TagStream.from_csv(text)

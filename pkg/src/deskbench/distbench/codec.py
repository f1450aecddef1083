"""Wire protocol codec for master-worker training.

Frame layout (bit-exact): 4-byte big-endian unsigned payload length,
then payload = 1 type byte + body. Types:

  0x00 ERROR  {utf-8 message}
  0x01 HELLO  {worker_id: u32 BE, num_rows: u64 BE, num_features: u32 BE}
  0x02 CONFIG {algo: u8, round_count: u32 BE, seed: u64 BE,
               lambda: f64 LE, lr: f64 LE}
  0x03 PARAMS {round: u32 BE, count: u32 BE, count floats f64 LE}
  0x04 UPDATE {round: u32 BE, sample_count: u64 BE, count: u32 BE,
               count floats f64 LE}
  0x05 DONE   {}

Frames above 64 MiB are a protocol error on both ends. unpack() raises
ProtocolError on any malformed payload, never anything else.
"""

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import ProtocolError

MAX_FRAME = 64 * 1024 * 1024  # payload byte cap
HEADER_SIZE = 4

T_ERROR = 0x00
T_HELLO = 0x01
T_CONFIG = 0x02
T_PARAMS = 0x03
T_UPDATE = 0x04
T_DONE = 0x05

TYPE_NAMES = {
    T_ERROR: "error", T_HELLO: "hello", T_CONFIG: "config",
    T_PARAMS: "params", T_UPDATE: "update", T_DONE: "done",
}

ALGO_CODES = {"logistic": 1, "svm": 2}
ALGO_NAMES = {code: name for name, code in ALGO_CODES.items()}

_HELLO_FMT = ">IQI"     # worker_id, num_rows, num_features
_CONFIG_HEAD = ">BIQ"   # algo, round_count, seed
_PARAMS_HEAD = ">II"    # round, count
_UPDATE_HEAD = ">IQI"   # round, sample_count, count


@dataclass
class Frame:
    """Decoded frame: kind name, field dict, and its on-wire byte size."""

    kind: str
    data: dict
    wire_size: int


def frame_size(body_len: int) -> int:
    """Total on-wire bytes for a frame with the given body length."""
    return HEADER_SIZE + 1 + body_len


def params_frame_size(count: int) -> int:
    return frame_size(struct.calcsize(_PARAMS_HEAD) + 8 * count)


def update_frame_size(count: int) -> int:
    return frame_size(struct.calcsize(_UPDATE_HEAD) + 8 * count)


HELLO_FRAME_SIZE = frame_size(struct.calcsize(_HELLO_FMT))
CONFIG_FRAME_SIZE = frame_size(struct.calcsize(_CONFIG_HEAD) + 16)
DONE_FRAME_SIZE = frame_size(0)


def _frame(payload: bytes) -> bytes:
    if len(payload) > MAX_FRAME:
        raise ProtocolError(f"frame payload {len(payload)} exceeds {MAX_FRAME} bytes")
    return struct.pack(">I", len(payload)) + payload


def _floats_le(values) -> bytes:
    arr = np.ascontiguousarray(np.asarray(values, dtype=np.float64))
    if arr.ndim != 1:
        raise ProtocolError("parameter vector must be 1-d")
    return arr.astype("<f8").tobytes()


def pack_hello(worker_id: int, num_rows: int, num_features: int) -> bytes:
    body = struct.pack(_HELLO_FMT, worker_id, num_rows, num_features)
    return _frame(bytes([T_HELLO]) + body)


def pack_config(algo: str, round_count: int, seed: int, lambda_: float, lr: float) -> bytes:
    if algo not in ALGO_CODES:
        raise ProtocolError(f"unknown algorithm {algo!r}")
    body = struct.pack(_CONFIG_HEAD, ALGO_CODES[algo], round_count, seed)
    body += struct.pack("<dd", lambda_, lr)
    return _frame(bytes([T_CONFIG]) + body)


def pack_params(round_: int, values) -> bytes:
    floats = _floats_le(values)
    body = struct.pack(_PARAMS_HEAD, round_, len(floats) // 8) + floats
    return _frame(bytes([T_PARAMS]) + body)


def pack_update(round_: int, sample_count: int, values) -> bytes:
    floats = _floats_le(values)
    body = struct.pack(_UPDATE_HEAD, round_, sample_count, len(floats) // 8) + floats
    return _frame(bytes([T_UPDATE]) + body)


def pack_done() -> bytes:
    return _frame(bytes([T_DONE]))


def pack_error(message: str) -> bytes:
    return _frame(bytes([T_ERROR]) + message.encode("utf-8"))


def _parse_floats(body: bytes, offset: int, count: int, wire_size: int, kind: str) -> Frame:
    expected = offset + 8 * count
    if len(body) != expected:
        raise ProtocolError(f"{kind} frame has {len(body)} body bytes, expected {expected}")
    values = np.frombuffer(body, dtype="<f8", count=count, offset=offset).astype(np.float64)
    return Frame(kind, {"count": count, "values": values}, wire_size)


def unpack(payload: bytes) -> Frame:
    """Decode one frame payload (type byte + body). Raises ProtocolError."""
    if len(payload) > MAX_FRAME:
        raise ProtocolError(f"frame payload {len(payload)} exceeds {MAX_FRAME} bytes")
    if not payload:
        raise ProtocolError("empty frame payload")
    ftype, body = payload[0], payload[1:]
    wire = frame_size(len(body))
    try:
        if ftype == T_HELLO:
            wid, rows, feats = struct.unpack(_HELLO_FMT, body)
            return Frame("hello", {"worker_id": wid, "num_rows": rows,
                                   "num_features": feats}, wire)
        if ftype == T_CONFIG:
            head = struct.calcsize(_CONFIG_HEAD)
            algo, rounds, seed = struct.unpack(_CONFIG_HEAD, body[:head])
            if algo not in ALGO_NAMES:
                raise ProtocolError(f"unknown algorithm code {algo}")
            if len(body) != head + 16:
                raise ProtocolError(f"config frame has {len(body)} body bytes")
            lambda_, lr = struct.unpack("<dd", body[head:])
            return Frame("config", {"algo": ALGO_NAMES[algo], "round_count": rounds,
                                    "seed": seed, "lambda_": lambda_, "lr": lr}, wire)
        if ftype == T_PARAMS:
            head = struct.calcsize(_PARAMS_HEAD)
            round_, count = struct.unpack(_PARAMS_HEAD, body[:head])
            frame = _parse_floats(body, head, count, wire, "params")
            frame.data["round"] = round_
            return frame
        if ftype == T_UPDATE:
            head = struct.calcsize(_UPDATE_HEAD)
            round_, samples, count = struct.unpack(_UPDATE_HEAD, body[:head])
            frame = _parse_floats(body, head, count, wire, "update")
            frame.data["round"] = round_
            frame.data["sample_count"] = samples
            return frame
        if ftype == T_DONE:
            if body:
                raise ProtocolError("done frame carries a body")
            return Frame("done", {}, wire)
        if ftype == T_ERROR:
            try:
                message = body.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ProtocolError(f"error frame is not utf-8: {exc}") from exc
            return Frame("error", {"message": message}, wire)
    except struct.error as exc:
        raise ProtocolError(f"truncated {TYPE_NAMES.get(ftype, hex(ftype))} frame: {exc}") from exc
    raise ProtocolError(f"unknown frame type 0x{ftype:02x}")


def read_frame(stream) -> Frame | None:
    """Read one frame from a byte stream with .read(n).

    Returns None on a clean end-of-stream at a frame boundary; raises
    ProtocolError on truncation, oversize, or malformed payloads.
    """
    header = stream.read(HEADER_SIZE)
    if not header:
        return None
    if len(header) < HEADER_SIZE:
        raise ProtocolError("truncated frame header")
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME:
        raise ProtocolError(f"declared frame payload {length} exceeds {MAX_FRAME} bytes")
    if length == 0:
        raise ProtocolError("empty frame payload")
    payload = stream.read(length)
    if len(payload) < length:
        raise ProtocolError(f"truncated frame payload ({len(payload)} of {length} bytes)")
    return unpack(payload)

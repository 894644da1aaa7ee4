"""Checkpoint container: everything needed to restart training bit-exactly.

Layout: [u32 magic][u32 container version], then named sections, then a
crc32 trailer over all section bytes. Networks are stored as the same
checksummed frames used for cross-process weight replication; bulk arrays
get a small typed header; everything scalar rides in canonical JSON so a
save -> load -> save round trip is byte-identical.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError, ChecksumError
from .transport import decode_frame, encode_frame

CHECKPOINT_MAGIC = 0x44503447
CONTAINER_VERSION = 1

_DTYPE_TAGS = {0: "<f8", 1: "<i8"}
_TAG_OF = {np.dtype("float64"): 0, np.dtype("int64"): 1}


@dataclass
class CheckpointData:
    """Decoded checkpoint contents, still in plain-array form.

    The experiment layer turns layer lists back into nets (validating
    shapes against the active config) and array bundles back into replay
    and optimizer state.
    """
    config_hash: int = 0
    t: int = 0
    store_version: int = 0
    eval_index: int = 0
    wall_elapsed: float = 0.0
    agg: dict = field(default_factory=dict)
    nets: dict = field(default_factory=dict)        # name -> list of (W, b)
    adam: dict = field(default_factory=dict)        # name -> (step_count, [arrays])
    rng_states: dict = field(default_factory=dict)  # label -> generator state
    replay_scalars: dict = field(default_factory=dict)
    replay_arrays: dict = field(default_factory=dict)
    actors: list = field(default_factory=list)      # per-actor json dicts
    actor_params: list = field(default_factory=list)  # per-actor (version, layers) or None
    store_latest: tuple = None                      # (version, layers) or None


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _pack_array(a: np.ndarray) -> bytes:
    a = np.ascontiguousarray(a)
    if a.dtype not in _TAG_OF:
        raise CheckpointError(f"unsupported checkpoint array dtype {a.dtype}")
    head = struct.pack("<BB", _TAG_OF[a.dtype], a.ndim)
    dims = struct.pack(f"<{a.ndim}Q", *a.shape) if a.ndim else b""
    return head + dims + a.astype(_DTYPE_TAGS[_TAG_OF[a.dtype]]).tobytes()


def _unpack_array(buf: bytes, offset: int):
    tag, ndim = struct.unpack_from("<BB", buf, offset)
    offset += 2
    if tag not in _DTYPE_TAGS:
        raise CheckpointError(f"unknown array dtype tag {tag}")
    shape = struct.unpack_from(f"<{ndim}Q", buf, offset) if ndim else ()
    offset += 8 * ndim
    count = int(np.prod(shape)) if ndim else 1
    a = np.frombuffer(buf, dtype=_DTYPE_TAGS[tag], count=count, offset=offset)
    offset += count * 8
    return a.reshape(shape).copy(), offset


def _pack_array_list(arrays) -> bytes:
    parts = [struct.pack("<I", len(arrays))]
    parts.extend(_pack_array(a) for a in arrays)
    return b"".join(parts)


def _unpack_array_list(buf: bytes, offset: int = 0):
    (count,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    arrays = []
    for _ in range(count):
        a, offset = _unpack_array(buf, offset)
        arrays.append(a)
    return arrays, offset


def _sections_to_bytes(sections) -> bytes:
    parts = []
    for name, payload in sections:
        encoded = name.encode("ascii")
        parts.append(struct.pack("<B", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<Q", len(payload)))
        parts.append(payload)
    return b"".join(parts)


def _bytes_to_sections(payload: bytes):
    sections = []
    offset = 0
    while offset < len(payload):
        (name_len,) = struct.unpack_from("<B", payload, offset)
        offset += 1
        name = payload[offset:offset + name_len].decode("ascii")
        offset += name_len
        (size,) = struct.unpack_from("<Q", payload, offset)
        offset += 8
        if offset + size > len(payload):
            raise CheckpointError(f"section {name!r} overruns the file")
        sections.append((name, payload[offset:offset + size]))
        offset += size
    return sections


def _pack_optional_frame(entry) -> bytes:
    if entry is None:
        return struct.pack("<B", 0)
    version, net = entry
    frame = encode_frame(net, version)
    return struct.pack("<B", 1) + struct.pack("<Q", len(frame)) + frame


def _unpack_optional_frame(buf: bytes, offset: int):
    (has,) = struct.unpack_from("<B", buf, offset)
    offset += 1
    if not has:
        return None, offset
    (size,) = struct.unpack_from("<Q", buf, offset)
    offset += 8
    version, layers = decode_frame(buf[offset:offset + size])
    return (version, layers), offset + size


def save_checkpoint(path: str, *, config_hash: int, t: int, store_version: int,
                    eval_index: int, wall_elapsed: float, agg: dict,
                    nets: dict, adam: dict, rng_states: dict,
                    replay_scalars: dict, replay_arrays: dict,
                    actors: list, actor_params: list, store_latest) -> None:
    """Write the container atomically. `nets` maps name -> DenseNet; `adam`
    maps name -> (step_count, arrays); `actor_params` holds per-actor
    (version, DenseNet) or None; `store_latest` likewise."""
    meta = {
        "config_hash": config_hash,
        "t": t,
        "store_version": store_version,
        "eval_index": eval_index,
        "wall_elapsed": wall_elapsed,
        "agg": agg,
    }
    sections = [("meta", _canonical_json(meta))]
    for name in sorted(nets):
        sections.append((f"net.{name}", encode_frame(nets[name], t)))
    for name in sorted(adam):
        step_count, arrays = adam[name]
        sections.append((f"adam.{name}",
                         struct.pack("<Q", step_count) + _pack_array_list(arrays)))
    sections.append(("rng", _canonical_json(rng_states)))
    sections.append(("replay.meta", _canonical_json(replay_scalars)))
    for name in sorted(replay_arrays):
        sections.append((f"replay.{name}", _pack_array(replay_arrays[name])))
    sections.append(("actors", _canonical_json(actors)))
    held = [struct.pack("<I", len(actor_params))]
    held.extend(_pack_optional_frame(entry) for entry in actor_params)
    sections.append(("actors.params", b"".join(held)))
    sections.append(("store", _pack_optional_frame(store_latest)))
    payload = _sections_to_bytes(sections)
    blob = struct.pack("<II", CHECKPOINT_MAGIC, CONTAINER_VERSION) + payload \
        + struct.pack("<I", zlib.crc32(payload))
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def load_checkpoint(path: str) -> CheckpointData:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(blob) < 12:
        raise CheckpointError(f"checkpoint {path} too short ({len(blob)} bytes)")
    magic, version = struct.unpack_from("<II", blob, 0)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad checkpoint magic {magic:#x}")
    if version != CONTAINER_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    payload = blob[8:-4]
    (stored_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    actual_crc = zlib.crc32(payload)
    if stored_crc != actual_crc:
        raise ChecksumError(
            f"checkpoint checksum mismatch: stored {stored_crc:#010x}, "
            f"computed {actual_crc:#010x}")

    data = CheckpointData()
    for name, body in _bytes_to_sections(payload):
        if name == "meta":
            meta = json.loads(body)
            data.config_hash = meta["config_hash"]
            data.t = meta["t"]
            data.store_version = meta["store_version"]
            data.eval_index = meta["eval_index"]
            data.wall_elapsed = meta["wall_elapsed"]
            data.agg = meta["agg"]
        elif name.startswith("net."):
            _, layers = decode_frame(body)
            data.nets[name[4:]] = layers
        elif name.startswith("adam."):
            (step_count,) = struct.unpack_from("<Q", body, 0)
            arrays, _ = _unpack_array_list(body, 8)
            data.adam[name[5:]] = (step_count, arrays)
        elif name == "rng":
            data.rng_states = json.loads(body)
        elif name == "replay.meta":
            data.replay_scalars = json.loads(body)
        elif name.startswith("replay."):
            arr, _ = _unpack_array(body, 0)
            data.replay_arrays[name[7:]] = arr
        elif name == "actors":
            data.actors = json.loads(body)
        elif name == "actors.params":
            (count,) = struct.unpack_from("<I", body, 0)
            offset = 4
            for _ in range(count):
                entry, offset = _unpack_optional_frame(body, offset)
                data.actor_params.append(entry)
        elif name == "store":
            data.store_latest, _ = _unpack_optional_frame(body, 0)
        else:
            raise CheckpointError(f"unknown checkpoint section {name!r}")
    return data

"""Weight replication from the learner to the actors.

Two layers: an in-process latest-wins snapshot store (the required
transport), and a little-endian binary frame with an FNV-1a trailer for
crossing process boundaries. Checkpoints reuse the same frame, so frame
encode/decode lives here even though checkpointing is a separate module.
"""

from __future__ import annotations

import socket
import struct
import threading
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ChecksumError, CheckpointError
from .nn import DenseNet, NetSpec

FRAME_MAGIC = 0xD4504706
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _U64_MASK
    return h


def net_checksum(net: DenseNet) -> int:
    """Cheap integrity tag for in-process snapshots (crc32 over raw bytes)."""
    crc = 0
    for w, b in zip(net.weights, net.biases):
        crc = zlib.crc32(np.ascontiguousarray(w).tobytes(), crc)
        crc = zlib.crc32(b.tobytes(), crc)
    return crc


@dataclass(frozen=True)
class ParameterSnapshot:
    version: int
    params: DenseNet
    checksum: int

    def verify(self) -> bool:
        return net_checksum(self.params) == self.checksum


class SnapshotStore:
    """Single-writer, multi-reader latest-wins store.

    publish swaps in a fully built snapshot under a lock; readers grab the
    current pointer and never see a half-written object. Snapshots are
    treated as immutable after publication.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._latest = None
        self._version = 0

    def publish(self, net: DenseNet) -> int:
        copied = net.copy()
        snap_checksum = net_checksum(copied)
        with self._lock:
            self._version += 1
            self._latest = ParameterSnapshot(self._version, copied, snap_checksum)
            return self._version

    def fetch(self) -> ParameterSnapshot | None:
        with self._lock:
            return self._latest

    def fetch_newer(self, than_version: int) -> ParameterSnapshot | None:
        snap = self.fetch()
        if snap is None or snap.version <= than_version:
            return None
        return snap

    @property
    def version(self) -> int:
        with self._lock:
            return self._version

    def restore(self, version: int, net: DenseNet = None) -> None:
        """Reinstate a checkpointed version counter and latest snapshot."""
        with self._lock:
            self._version = version
            if net is None:
                self._latest = None
            else:
                self._latest = ParameterSnapshot(version, net, net_checksum(net))


def encode_frame(net: DenseNet, version: int) -> bytes:
    """Serialize one net: magic, version, layer count, per-layer blocks,
    FNV-1a trailer over everything between magic and trailer.

    Matrices go out transposed (rows = input dim, cols = output dim) so the
    per-layer bias length equals cols.
    """
    parts = [struct.pack("<QI", version, len(net.weights))]
    for w, b in zip(net.weights, net.biases):
        out_dim, in_dim = w.shape
        parts.append(struct.pack("<II", in_dim, out_dim))
        parts.append(np.ascontiguousarray(w.T).tobytes())
        parts.append(np.ascontiguousarray(b).tobytes())
    payload = b"".join(parts)
    return struct.pack("<I", FRAME_MAGIC) + payload + struct.pack("<Q", fnv1a64(payload))


def decode_frame(buf: bytes):
    """Parse a frame into (version, [(weight, bias), ...]).

    Weights come back in the in-memory (out_dim, in_dim) orientation.
    """
    if len(buf) < 24:
        raise CheckpointError(f"frame too short ({len(buf)} bytes)")
    (magic,) = struct.unpack_from("<I", buf, 0)
    if magic != FRAME_MAGIC:
        raise CheckpointError(f"bad frame magic {magic:#x}, expected {FRAME_MAGIC:#x}")
    payload = buf[4:-8]
    (stored,) = struct.unpack_from("<Q", buf, len(buf) - 8)
    actual = fnv1a64(payload)
    if stored != actual:
        raise ChecksumError(f"frame checksum mismatch: stored {stored:#x}, computed {actual:#x}")
    version, layer_count = struct.unpack_from("<QI", payload, 0)
    offset = 12
    layers = []
    for i in range(layer_count):
        if offset + 8 > len(payload):
            raise CheckpointError(f"frame truncated in layer {i} header")
        rows, cols = struct.unpack_from("<II", payload, offset)
        offset += 8
        need = (rows * cols + cols) * 8
        if offset + need > len(payload):
            raise CheckpointError(f"frame truncated in layer {i} data")
        mat = np.frombuffer(payload, dtype="<f8", count=rows * cols, offset=offset)
        offset += rows * cols * 8
        bias = np.frombuffer(payload, dtype="<f8", count=cols, offset=offset)
        offset += cols * 8
        layers.append((mat.reshape(rows, cols).T.copy(), bias.copy()))
    if offset != len(payload):
        raise CheckpointError(f"{len(payload) - offset} trailing bytes after layer {layer_count - 1}")
    return version, layers


def net_from_layers(spec: NetSpec, layers) -> DenseNet:
    """Rebuild a DenseNet, naming the first layer whose shape disagrees."""
    expected = len(spec.layer_sizes) - 1
    if len(layers) != expected:
        raise CheckpointError(f"expected {expected} layers, frame holds {len(layers)}")
    weights, biases = [], []
    for i, (w, b) in enumerate(layers):
        want = (spec.layer_sizes[i + 1], spec.layer_sizes[i])
        if w.shape != want or b.shape != (want[0],):
            raise CheckpointError(
                f"layer {i} shape mismatch: weights {w.shape} bias {b.shape}, expected {want}")
        weights.append(w)
        biases.append(b)
    return DenseNet(spec, weights, biases)


class SnapshotServer:
    """Serves the latest frame over TCP, one frame per connection.

    This is the optional cross-process path; in-process actors use the
    store directly.
    """

    def __init__(self, store: SnapshotStore, host: str = "127.0.0.1", port: int = 0):
        self.store = store
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(8)
        self.address = self._sock.getsockname()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._serve, daemon=True)

    def start(self) -> None:
        self._thread.start()

    def _serve(self) -> None:
        self._sock.settimeout(0.1)
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            with conn:
                snap = self.store.fetch()
                if snap is None:
                    conn.sendall(struct.pack("<Q", 0))
                else:
                    frame = encode_frame(snap.params, snap.version)
                    conn.sendall(struct.pack("<Q", len(frame)) + frame)

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=2.0)
        self._sock.close()


def fetch_remote_frame(address) -> tuple | None:
    """Pull the latest (version, layers) from a SnapshotServer; None if empty."""
    with socket.create_connection(address, timeout=5.0) as conn:
        header = _recv_exact(conn, 8)
        (length,) = struct.unpack("<Q", header)
        if length == 0:
            return None
        return decode_frame(_recv_exact(conn, length))


def _recv_exact(conn, count: int) -> bytes:
    chunks = []
    remaining = count
    while remaining:
        chunk = conn.recv(remaining)
        if not chunk:
            raise CheckpointError("connection closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)

"""Snapshot store, binary weight frames, and the TCP serving path."""

import os
import struct
import threading
import time

import numpy as np
import pytest

from d4pg.errors import ChecksumError, CheckpointError
from d4pg.nn import NetSpec, init_net
from d4pg.transport import (
    FRAME_MAGIC,
    SnapshotServer,
    SnapshotStore,
    decode_frame,
    encode_frame,
    fetch_remote_frame,
    fnv1a64,
    net_checksum,
    net_from_layers,
)


def net_of(seed=0, sizes=(3, 5, 2)):
    return init_net(NetSpec(sizes, output_activation="tanh"), seed)


class TestFnv:
    def test_published_vectors(self):
        # standard 64-bit FNV-1a reference values
        assert fnv1a64(b"") == 0xCBF29CE484222325
        assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
        assert fnv1a64(b"foobar") == 0x85944171F73967E8

    def test_order_sensitivity(self):
        assert fnv1a64(b"ab") != fnv1a64(b"ba")


class TestFrame:
    def test_layout_of_a_known_net(self):
        net = net_of(sizes=(2, 3))
        net.weights[0][:] = np.arange(6, dtype=np.float64).reshape(3, 2)
        net.biases[0][:] = [9.0, 10.0, 11.0]
        frame = encode_frame(net, version=7)

        (magic,) = struct.unpack_from("<I", frame, 0)
        version, layer_count = struct.unpack_from("<QI", frame, 4)
        rows, cols = struct.unpack_from("<II", frame, 16)
        assert magic == FRAME_MAGIC
        assert version == 7
        assert layer_count == 1
        assert (rows, cols) == (2, 3)
        mat = np.frombuffer(frame, dtype="<f8", count=6, offset=24)
        # row-major with rows = input dim means the transpose of the
        # in-memory (out, in) matrix
        assert np.array_equal(mat.reshape(2, 3), net.weights[0].T)
        bias = np.frombuffer(frame, dtype="<f8", count=3, offset=24 + 48)
        assert np.array_equal(bias, net.biases[0])
        (stored,) = struct.unpack_from("<Q", frame, len(frame) - 8)
        assert stored == fnv1a64(frame[4:-8])

    def test_round_trip(self):
        net = net_of(3)
        version, layers = decode_frame(encode_frame(net, version=42))
        assert version == 42
        assert len(layers) == 2
        for (w, b), w0, b0 in zip(layers, net.weights, net.biases):
            assert np.array_equal(w, w0)
            assert np.array_equal(b, b0)

    def test_every_flipped_byte_is_detected(self):
        frame = bytearray(encode_frame(net_of(sizes=(2, 2)), version=1))
        for i in range(len(frame)):
            corrupted = bytearray(frame)
            corrupted[i] ^= 0xFF
            with pytest.raises((ChecksumError, CheckpointError)):
                decode_frame(bytes(corrupted))

    def test_truncation_reports_the_layer(self):
        net = net_of(sizes=(4, 6, 3))
        frame = bytearray(encode_frame(net, version=1))
        # drop bytes from layer 1's data, then re-seal the checksum so the
        # structural check is what fires
        cut = frame[:len(frame) - 8 - 16]
        payload = bytes(cut[4:])
        resealed = bytes(cut) + struct.pack("<Q", fnv1a64(payload))
        with pytest.raises(CheckpointError, match="layer 1"):
            decode_frame(resealed)

    def test_bad_magic(self):
        frame = bytearray(encode_frame(net_of(), version=1))
        frame[0] ^= 0x01
        with pytest.raises(CheckpointError, match="magic"):
            decode_frame(bytes(frame))

    def test_too_short(self):
        with pytest.raises(CheckpointError):
            decode_frame(b"\x00" * 10)


class TestNetFromLayers:
    def test_rebuilds_identical_net(self):
        net = net_of(11)
        _, layers = decode_frame(encode_frame(net, version=1))
        rebuilt = net_from_layers(net.spec, layers)
        for w, w0 in zip(rebuilt.weights, net.weights):
            assert np.array_equal(w, w0)

    def test_wrong_layer_count(self):
        net = net_of()
        _, layers = decode_frame(encode_frame(net, version=1))
        with pytest.raises(CheckpointError, match="frame holds 2"):
            net_from_layers(NetSpec((3, 5, 5, 2)), layers)

    def test_shape_mismatch_names_the_layer(self):
        net = net_of(sizes=(3, 5, 2))
        _, layers = decode_frame(encode_frame(net, version=1))
        with pytest.raises(CheckpointError, match="layer 1"):
            net_from_layers(NetSpec((3, 5, 4)), layers)


class TestSnapshotStore:
    def test_empty_store(self):
        store = SnapshotStore()
        assert store.fetch() is None
        assert store.version == 0
        assert store.fetch_newer(0) is None

    def test_publish_bumps_version_and_copies(self):
        store = SnapshotStore()
        net = net_of()
        assert store.publish(net) == 1
        net.weights[0][0, 0] += 100.0
        snap = store.fetch()
        assert snap.version == 1
        assert snap.params.weights[0][0, 0] != net.weights[0][0, 0]
        assert snap.verify()

    def test_fetch_newer_filters_by_version(self):
        store = SnapshotStore()
        store.publish(net_of())
        assert store.fetch_newer(1) is None
        store.publish(net_of(1))
        snap = store.fetch_newer(1)
        assert snap is not None and snap.version == 2

    def test_restore_rewinds_the_counter(self):
        store = SnapshotStore()
        for i in range(5):
            store.publish(net_of(i))
        net = net_of(9)
        store.restore(17, net)
        assert store.version == 17
        snap = store.fetch()
        assert snap.version == 17
        assert np.array_equal(snap.params.weights[0], net.weights[0])
        store.restore(3, None)
        assert store.fetch() is None
        assert store.version == 3

    def test_concurrent_readers_never_see_torn_weights(self):
        """Writer republishes constantly; every fetched snapshot must pass
        its own checksum. Runtime scales with D4PG_STRESS_SECONDS."""
        seconds = float(os.environ.get("D4PG_STRESS_SECONDS", "2.0"))
        store = SnapshotStore()
        nets = [net_of(seed) for seed in range(4)]
        for net in nets:
            for w in net.weights:
                w[:] = np.random.default_rng(0).normal(size=w.shape)
        store.publish(nets[0])
        stop = threading.Event()
        failures = []
        fetches = [0, 0]

        def reader(slot):
            last = 0
            while not stop.is_set():
                snap = store.fetch()
                if snap is None:
                    continue
                if not snap.verify():
                    failures.append(("torn", snap.version))
                if snap.version < last:
                    failures.append(("rewound", snap.version, last))
                last = snap.version
                fetches[slot] += 1

        threads = [threading.Thread(target=reader, args=(i,), daemon=True)
                   for i in range(2)]
        for t in threads:
            t.start()
        deadline = time.monotonic() + seconds
        i = 0
        while time.monotonic() < deadline:
            store.publish(nets[i % len(nets)])
            i += 1
        stop.set()
        for t in threads:
            t.join(timeout=2.0)
        assert not failures
        assert i > 100
        assert all(f > 0 for f in fetches)


class TestServer:
    def test_serves_latest_frame(self):
        store = SnapshotStore()
        net = net_of(21)
        store.publish(net)
        server = SnapshotServer(store)
        server.start()
        try:
            got = fetch_remote_frame(server.address)
            assert got is not None
            version, layers = got
            assert version == 1
            rebuilt = net_from_layers(net.spec, layers)
            for w, w0 in zip(rebuilt.weights, net.weights):
                assert np.array_equal(w, w0)
        finally:
            server.stop()

    def test_empty_store_yields_none(self):
        server = SnapshotServer(SnapshotStore())
        server.start()
        try:
            assert fetch_remote_frame(server.address) is None
        finally:
            server.stop()

    def test_each_connection_gets_the_current_version(self):
        store = SnapshotStore()
        store.publish(net_of(0))
        server = SnapshotServer(store)
        server.start()
        try:
            v1, _ = fetch_remote_frame(server.address)
            store.publish(net_of(1))
            v2, _ = fetch_remote_frame(server.address)
            assert (v1, v2) == (1, 2)
        finally:
            server.stop()

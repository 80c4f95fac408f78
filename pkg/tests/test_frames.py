import socket
import threading

import pytest
from hypothesis import given, strategies as st

from archon.diagnostics import ArchonError
from archon.frames import (
    EVT,
    FWD,
    MAX_FRAME_BYTES,
    REG,
    REQ,
    RSP,
    Frame,
    decode,
    encode,
    read_frame,
    write_frame,
)


def test_event_frame_golden_bytes():
    assert encode(Frame(EVT, b"x", topic="t")) == b"\x00\x00\x00\x05\x01\x00\x01tx"


def test_register_frame_golden_bytes():
    assert encode(Frame(REG, topic="alerts")) == b"\x00\x00\x00\x09\x04\x00\x06alerts"


def test_request_frame_golden_bytes():
    got = encode(Frame(REQ, b"hi", correlation=0x0102030405060708))
    assert got == b"\x00\x00\x00\x0b\x02\x01\x02\x03\x04\x05\x06\x07\x08hi"


def test_forward_frame_golden_bytes():
    got = encode(Frame(FWD, b"z", name="svc", stream_id=7))
    assert got == (
        b"\x00\x00\x00\x0f\x05\x00\x03svc" + b"\x00\x00\x00\x00\x00\x00\x00\x07" + b"z"
    )


def test_oversize_payload_rejected():
    with pytest.raises(ArchonError) as exc:
        encode(Frame(EVT, b"x" * MAX_FRAME_BYTES, topic="t"))
    assert exc.value.code == "FrameTooLarge"


def test_largest_legal_frame_round_trips():
    payload = b"x" * (MAX_FRAME_BYTES - 1 - 2 - 1)  # kind + topic header + 1-byte topic
    frame = Frame(EVT, payload, topic="t")
    assert decode(encode(frame)[4:]) == frame


def test_oversize_announced_length_rejected_by_reader():
    left, right = socket.socketpair()
    try:
        left.sendall((MAX_FRAME_BYTES + 1).to_bytes(4, "big"))
        with pytest.raises(ArchonError) as exc:
            read_frame(right)
        assert exc.value.code == "FrameTooLarge"
    finally:
        left.close()
        right.close()


def test_truncated_body_rejected():
    with pytest.raises(ArchonError):
        decode(b"\x01\x00\x05ab")  # claims 5-byte topic, has 2


def test_unknown_kind_rejected():
    with pytest.raises(ArchonError):
        decode(b"\x09abc")
    with pytest.raises(ArchonError):
        Frame(9)


def test_socket_round_trip_multiple_frames():
    left, right = socket.socketpair()
    frames = [
        Frame(EVT, b"one", topic="a"),
        Frame(REQ, b"two", correlation=42),
        Frame(RSP, b"", correlation=42),
        Frame(FWD, b"chunk", name="echo", stream_id=3),
    ]

    def feed():
        for frame in frames:
            write_frame(left, frame)
        left.close()

    thread = threading.Thread(target=feed)
    thread.start()
    try:
        got = []
        while True:
            frame = read_frame(right)
            if frame is None:
                break
            got.append(frame)
        assert got == frames
    finally:
        thread.join()
        right.close()


def test_mid_frame_eof_is_an_error():
    left, right = socket.socketpair()
    try:
        left.sendall(b"\x00\x00\x00\x0a\x01\x00\x01t")  # promises 10, sends 4
        left.close()
        with pytest.raises(ArchonError):
            read_frame(right)
    finally:
        right.close()


_topics = st.text(
    alphabet=st.characters(codec="utf-8", exclude_categories=("Cs",)), max_size=40
)
_payloads = st.binary(max_size=200)


@given(kind=st.sampled_from([EVT, REG]), topic=_topics, payload=_payloads)
def test_topic_frames_round_trip(kind, topic, payload):
    frame = Frame(kind, payload, topic=topic)
    assert decode(encode(frame)[4:]) == frame


@given(kind=st.sampled_from([REQ, RSP]), corr=st.integers(0, 2**64 - 1), payload=_payloads)
def test_correlated_frames_round_trip(kind, corr, payload):
    frame = Frame(kind, payload, correlation=corr)
    assert decode(encode(frame)[4:]) == frame


@given(name=_topics, stream_id=st.integers(0, 2**64 - 1), payload=_payloads)
def test_forward_frames_round_trip(name, stream_id, payload):
    frame = Frame(FWD, payload, name=name, stream_id=stream_id)
    assert decode(encode(frame)[4:]) == frame


@given(payload=_payloads)
def test_length_prefix_counts_body(payload):
    raw = encode(Frame(EVT, payload, topic="tp"))
    assert int.from_bytes(raw[:4], "big") == len(raw) - 4

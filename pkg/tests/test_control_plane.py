import json
import socket

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oran_dsa.control_plane import (
    A1Policy,
    CodecError,
    E2Control,
    E2Report,
    E2Setup,
    ErrorNotice,
    LineHandler,
    LoopbackTransport,
    O1Report,
    TcpTransport,
    TransportError,
    UeReport,
    canonical_json,
    decode,
    encode,
    start_background_server,
)
from oran_dsa.rapp import COLORING_SCHEMES, FAIRNESS_SCHEMES, PolicyProfile, SlaMaps, build_policy_profile
from oran_dsa.xapp import XApp


class Echo(LineHandler):
    def handle_line(self, line):
        decode(line)
        return [line]


def profile(**kw):
    base = dict(forecasts={0: 3.0}, sla=SlaMaps(), ue_classes={1: "high", 2: "standard"})
    base.update(kw)
    return build_policy_profile(**base)


@settings(max_examples=50)
@given(
    st.dictionaries(st.integers(0, 500), st.sampled_from(["high", "low", "standard"]), max_size=20),
    st.sampled_from(FAIRNESS_SCHEMES),
    st.sampled_from(COLORING_SCHEMES),
    st.one_of(st.none(), st.integers(0, 4)),
    st.integers(0, 10_000),
)
def test_a1_round_trip(classes, fair, col, mu, episode):
    p = build_policy_profile({0: 5.0}, SlaMaps(), classes, fair, col, episode_id=episode, numerology=mu)
    msg = A1Policy(episode, p)
    line = encode(msg)
    assert decode(line) == msg
    assert encode(decode(line)) == line


def test_canonical_form():
    line = encode(ErrorNotice("x"))
    assert line == b'{"reason":"x","schema_version":"1.0","type":"error"}\n'
    with pytest.raises(ValueError):
        canonical_json({"a": float("nan")})


def test_e2_report_round_trip(table1_rus):
    rng = np.random.default_rng(0)
    msg = E2Report(
        1,
        7,
        [UeReport(3, 0, (1.5, -2.0), 1e6), UeReport(4, 2, (201.0, 3.0), 5e5)],
        rng.uniform(size=(2, 3)).tolist(),
        rng.exponential(size=(2, 3, 6)).tolist(),
        [(3, 123.5), (4, 0.0)],
    )
    assert decode(encode(msg)) == msg


def test_e2_setup_round_trip(table1_rus):
    msg = E2Setup(table1_rus, 10e6, 0.25e6, -174.0, 0.1, 42)
    assert decode(encode(msg)) == msg


def test_e2_control_validation():
    good = E2Control(0, 0, {1: 1, 2: 1}, {(0, 1): 1, (1, 1): 2}, [(1, 3)], 2, 1, [])
    assert decode(encode(good)) == good
    improper = E2Control(0, 0, {1: 1, 2: 1}, {(0, 1): 1, (1, 1): 2}, [(1, 2)], 2, 0, [])
    with pytest.raises(CodecError, match="share PRB"):
        encode(improper)
    mismatch = E2Control(0, 0, {1: 1}, {(0, 2): 1}, [], 1, 0, [])
    with pytest.raises(CodecError):
        encode(mismatch)
    body = json.loads(encode(good))
    body["occupancy"].append([0, 1, 2])
    with pytest.raises(CodecError, match="reuses PRB"):
        decode((canonical_json(body) + "\n").encode())


@pytest.mark.parametrize(
    "mutate, needle",
    [
        (lambda b: b.update(extra=1), "Additional properties"),
        (lambda b: b.update(schema_version="2.0"), "schema_version"),
        (lambda b: b.update(type="bogus"), "unknown message type"),
        (lambda b: b.pop("slot_id"), "slot_id"),
        (lambda b: b.update(fading=[[["x"]]]), "fading"),
        (lambda b: b.update(feedback=[[1, "fast"]]), "feedback"),
    ],
)
def test_decode_rejects(mutate, needle):
    body = json.loads(encode(E2Report(0, 0, [], [], [], [])))
    mutate(body)
    with pytest.raises(CodecError, match=needle):
        decode((json.dumps(body) + "\n").encode())


def test_minor_version_accepted():
    body = json.loads(encode(ErrorNotice("x")))
    body["schema_version"] = "1.3"
    assert decode((json.dumps(body) + "\n").encode()) == ErrorNotice("x")


def test_truncated_and_malformed_lines():
    line = encode(ErrorNotice("hello"))
    with pytest.raises(CodecError, match="truncated"):
        decode(line[:-1])
    with pytest.raises(CodecError, match="malformed"):
        decode(line[:10] + b"\n")
    with pytest.raises(CodecError):
        decode(b"[1,2]\n")


def test_o1_report_validity():
    ok = O1Report([(0, 0, 1.0), (1, 0, 2.0), ("2024-01-01T00:00:00", 1, 3.0)])
    assert decode(encode(ok)).samples == [(0, 0, 1.0), (1, 0, 2.0), ("2024-01-01T00:00:00", 1, 3.0)]
    with pytest.raises(CodecError, match="spacing"):
        decode(encode(O1Report([(0, 0, 1.0), (5, 0, 2.0)])))


def test_loopback_preserves_order():
    t = LoopbackTransport(Echo())
    sent = [encode(ErrorNotice(str(i))) for i in range(1000)]
    for line in sent:
        t.send(line)
    assert [t.recv() for _ in sent] == sent


def test_loopback_malformed_line_closes_with_error():
    t = LoopbackTransport(Echo())
    t.send(b"{oops\n")
    assert isinstance(decode(t.recv()), ErrorNotice)
    with pytest.raises(TransportError):
        t.send(encode(ErrorNotice("again")))


def test_tcp_order_and_bad_line():
    server, endpoint = start_background_server("127.0.0.1:0", Echo)
    try:
        t = TcpTransport.connect(endpoint)
        sent = [encode(ErrorNotice(str(i))) for i in range(200)]
        for line in sent:
            t.send(line)
        assert [t.recv() for _ in sent] == sent
        t.send(b"not json\n")
        assert isinstance(decode(t.recv()), ErrorNotice)
        with pytest.raises(TransportError):
            t.recv()
        t.close()
        # server survives a bad client
        t2 = TcpTransport.connect(endpoint)
        t2.send(encode(ErrorNotice("still up")))
        assert decode(t2.recv()) == ErrorNotice("still up")
        t2.close()
    finally:
        server.shutdown()
        server.server_close()


def test_connect_refused():
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    with pytest.raises(TransportError):
        TcpTransport.connect(f"127.0.0.1:{port}", timeout=2)


def test_xapp_requires_setup_and_policy(table1_rus):
    x = LoopbackTransport(XApp())
    x.send(encode(E2Report(0, 0, [], [], [], [])))
    assert "before e2_setup" in decode(x.recv()).reason

    x = LoopbackTransport(XApp())
    x.send(encode(E2Setup(table1_rus, 10e6, 0.25e6, -174.0, 0.1, 0)))
    x.send(encode(E2Report(0, 0, [], [], [], [])))
    assert "A1 policy" in decode(x.recv()).reason


def test_xapp_answers_each_report(table1_rus):
    x = LoopbackTransport(XApp())
    x.send(encode(E2Setup(table1_rus, 10e6, 0.25e6, -174.0, 0.1, 0)))
    x.send(encode(A1Policy(0, profile(numerology=4))))
    ues = [UeReport(1, 0, (10.0, 0.0), 1e6), UeReport(2, 0, (-10.0, 0.0), 1e6)]
    pl = [[10.0**-2.7, 1e-7, 1e-7], [10.0**-2.7, 1e-7, 1e-7]]
    fading = [[[1.0] * 3] * 3] * 2
    x.send(encode(E2Report(0, 0, ues, pl, fading, [])))
    ctrl = decode(x.recv())
    assert isinstance(ctrl, E2Control)
    assert ctrl.conflicts == [(1, 2)]
    assert sorted(ctrl.assignment.values()) == [1, 2]
    assert isinstance(PolicyProfile.from_dict(profile().to_dict()), PolicyProfile)

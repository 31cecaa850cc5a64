"""Emulated O1/A1/E2 interfaces.

Messages travel as canonical JSON, one object per line: keys sorted, no
whitespace, floats in shortest round-trip form. Every message carries
``type`` and ``schema_version``; decoding is strict (unknown fields and
major-version mismatches are rejected) and checks the JSON Schema shipped in
``oran_dsa/schemas``.
"""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Callable, Union

import jsonschema

from oran_dsa.radio import RuConfig
from oran_dsa.rapp import PolicyProfile
from oran_dsa.traffic import TrafficError, TrafficSeries, parse_timestamp

SCHEMA_VERSION = "1.0"
log = logging.getLogger(__name__)


class CodecError(ValueError):
    pass


class TransportError(ConnectionError):
    pass


@dataclass
class E2Setup:
    rus: list[RuConfig]
    bandwidth_hz: float
    guard_band_hz: float
    noise_psd_dbm_hz: float
    ewma_alpha: float
    seed: int
    TYPE = "e2_setup"

    def payload(self):
        return {
            "rus": [
                {
                    "id": r.id,
                    "kind": r.kind,
                    "position": [float(r.position[0]), float(r.position[1])],
                    "radius_m": float(r.radius_m),
                    "prb_power_w": float(r.prb_power_w),
                    "max_power_w": float(r.max_power_w),
                    "min_power_w": float(r.min_power_w),
                    "pathloss_constant": float(r.pathloss_constant),
                    "pathloss_exponent": float(r.pathloss_exponent),
                }
                for r in self.rus
            ],
            "bandwidth_hz": float(self.bandwidth_hz),
            "guard_band_hz": float(self.guard_band_hz),
            "noise_psd_dbm_hz": float(self.noise_psd_dbm_hz),
            "ewma_alpha": float(self.ewma_alpha),
            "seed": int(self.seed),
        }

    @classmethod
    def from_payload(cls, d):
        rus = [RuConfig(**{**r, "position": tuple(r["position"])}) for r in d["rus"]]
        return cls(
            rus, d["bandwidth_hz"], d["guard_band_hz"], d["noise_psd_dbm_hz"], d["ewma_alpha"], d["seed"]
        )


@dataclass
class A1Policy:
    episode_id: int
    policy: PolicyProfile
    TYPE = "a1_policy"

    def payload(self):
        return {"episode_id": self.episode_id, "policy": self.policy.to_dict()}

    @classmethod
    def from_payload(cls, d):
        policy = PolicyProfile.from_dict(d["policy"])
        if policy.episode_id != d["episode_id"]:
            raise CodecError("a1_policy: episode_id differs from policy.episode_id")
        return cls(d["episode_id"], policy)


@dataclass
class UeReport:
    ue_id: int
    ru_id: int
    position: tuple[float, float]
    demand_bps: float


@dataclass
class E2Report:
    episode_id: int
    slot_id: int
    ues: list[UeReport]
    pathloss: list[list[float]]  # (U, R)
    fading: list[list[list[float]]]  # (U, R, P)
    feedback: list[tuple[int, float]] = field(default_factory=list)
    TYPE = "e2_report"

    def payload(self):
        return {
            "episode_id": self.episode_id,
            "slot_id": self.slot_id,
            "ues": [
                {
                    "ue_id": u.ue_id,
                    "ru_id": u.ru_id,
                    "position": [float(u.position[0]), float(u.position[1])],
                    "demand_bps": float(u.demand_bps),
                }
                for u in self.ues
            ],
            "pathloss": [[float(x) for x in row] for row in self.pathloss],
            "fading": [[[float(x) for x in prbs] for prbs in row] for row in self.fading],
            "feedback": [[int(u), float(r)] for u, r in self.feedback],
        }

    @classmethod
    def from_payload(cls, d):
        ues = [UeReport(u["ue_id"], u["ru_id"], tuple(u["position"]), u["demand_bps"]) for u in d["ues"]]
        if len(d["pathloss"]) != len(ues) or len(d["fading"]) != len(ues):
            raise CodecError("e2_report: pathloss/fading rows must match the UE list")
        return cls(
            d["episode_id"],
            d["slot_id"],
            ues,
            d["pathloss"],
            d["fading"],
            [(u, r) for u, r in d["feedback"]],
        )


@dataclass
class E2Control:
    episode_id: int
    slot_id: int
    assignment: dict[int, int]  # ue -> prb
    occupancy: dict[tuple[int, int], int]  # (ru, prb) -> ue
    conflicts: list[tuple[int, int]]
    colored: int
    uncolored: int
    preempted: list[int]
    TYPE = "e2_control"

    def validate(self) -> None:
        """Per-RU uniqueness and properness against the carried conflict edges."""
        seen = {}
        for (ru, prb), ue in self.occupancy.items():
            if self.assignment.get(ue) != prb:
                raise CodecError(f"e2_control: occupancy ({ru}, {prb}) -> {ue} disagrees with assignment")
            if ue in seen:
                raise CodecError(f"e2_control: UE {ue} occupies more than one (RU, PRB) slot")
            seen[ue] = ru
        if set(seen) != set(self.assignment):
            raise CodecError("e2_control: every assigned UE needs exactly one occupancy entry")
        for u, v in self.conflicts:
            if u in self.assignment and self.assignment[u] == self.assignment.get(v):
                raise CodecError(f"e2_control: conflicting UEs {u} and {v} share PRB {self.assignment[u]}")

    def payload(self):
        self.validate()
        return {
            "episode_id": self.episode_id,
            "slot_id": self.slot_id,
            "assignment": [[u, p] for u, p in sorted(self.assignment.items())],
            "occupancy": [[ru, p, u] for (ru, p), u in sorted(self.occupancy.items())],
            "conflicts": [[u, v] for u, v in sorted(self.conflicts)],
            "colored": self.colored,
            "uncolored": self.uncolored,
            "preempted": sorted(self.preempted),
        }

    @classmethod
    def from_payload(cls, d):
        assignment = {}
        for u, p in d["assignment"]:
            if u in assignment:
                raise CodecError(f"e2_control: UE {u} assigned twice")
            assignment[u] = p
        occupancy = {}
        for ru, p, u in d["occupancy"]:
            if (ru, p) in occupancy:
                raise CodecError(f"e2_control: RU {ru} reuses PRB {p}")
            occupancy[(ru, p)] = u
        msg = cls(
            d["episode_id"],
            d["slot_id"],
            assignment,
            occupancy,
            [tuple(e) for e in d["conflicts"]],
            d["colored"],
            d["uncolored"],
            list(d["preempted"]),
        )
        msg.validate()
        return msg


@dataclass
class O1Report:
    samples: list[tuple[Union[int, str], int, float]]
    TYPE = "o1_report"

    def payload(self):
        return {"samples": [[t, int(ru), float(v)] for t, ru, v in self.samples]}

    @classmethod
    def from_payload(cls, d):
        samples = [tuple(s) for s in d["samples"]]
        by_ru: dict[int, list] = {}
        for ts, ru, load in samples:
            by_ru.setdefault(ru, []).append((ts, load))
        for ru, rows in by_ru.items():
            try:
                TrafficSeries(ru, tuple(parse_timestamp(t) for t, _ in rows), tuple(v for _, v in rows))
            except (TrafficError, ValueError) as exc:
                raise CodecError(f"o1_report: {exc}") from None
        return cls(samples)


@dataclass
class ErrorNotice:
    reason: str
    TYPE = "error"

    def payload(self):
        return {"reason": self.reason}

    @classmethod
    def from_payload(cls, d):
        return cls(d["reason"])


Message = Union[E2Setup, A1Policy, E2Report, E2Control, O1Report, ErrorNotice]
MESSAGE_TYPES = {cls.TYPE: cls for cls in (E2Setup, A1Policy, E2Report, E2Control, O1Report, ErrorNotice)}


@lru_cache(maxsize=None)
def _validator(type_name: str):
    text = resources.files("oran_dsa.schemas").joinpath(f"{type_name}.json").read_text()
    schema = json.loads(text)
    return jsonschema.Draft202012Validator(schema)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def encode(msg: Message) -> bytes:
    body = {"type": msg.TYPE, "schema_version": SCHEMA_VERSION, **msg.payload()}
    _check_schema(msg.TYPE, body)
    return (canonical_json(body) + "\n").encode()


# Dense numeric matrices and id tables are checked directly; walking them
# with jsonschema dominated the slot loop. The shipped schema documents still
# describe them in full.
_INT, _NUM = "integer", "number"
_FAST_FIELDS = {
    "e2_report": {"pathloss": 2, "fading": 3, "feedback": (_INT, _NUM)},
    "e2_control": {"assignment": (_INT, _INT), "occupancy": (_INT, _INT, _INT), "conflicts": (_INT, _INT)},
}


def _field_error(type_name, path, value, kind):
    where = "/".join(str(p) for p in path)
    return CodecError(f"{type_name}: field {where}: {value!r} is not of type {kind!r}")


def _check_scalar(type_name, path, value, kind):
    ok = not isinstance(value, bool) and (
        isinstance(value, int) if kind == _INT else isinstance(value, (int, float))
    )
    if not ok:
        raise _field_error(type_name, path, value, kind)


def _check_matrix(type_name, path, value, depth):
    if depth == 0:
        _check_scalar(type_name, path, value, _NUM)
        return
    if not isinstance(value, list):
        raise _field_error(type_name, path, value, "array")
    for i, item in enumerate(value):
        _check_matrix(type_name, (*path, i), item, depth - 1)


def _check_table(type_name, name, rows, kinds):
    if not isinstance(rows, list):
        raise _field_error(type_name, (name,), rows, "array")
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != len(kinds):
            raise CodecError(f"{type_name}: field {name}/{i}: expected an array of {len(kinds)} items")
        for j, (v, kind) in enumerate(zip(row, kinds)):
            _check_scalar(type_name, (name, i, j), v, kind)


def _check_schema(type_name, body):
    fast = _FAST_FIELDS.get(type_name, {})
    if fast:
        for name, shape in fast.items():
            if name not in body:
                continue
            if isinstance(shape, int):
                _check_matrix(type_name, (name,), body[name], shape)
            else:
                _check_table(type_name, name, body[name], shape)
        body = {k: ([] if k in fast else v) for k, v in body.items()}
    errors = sorted(_validator(type_name).iter_errors(body), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise CodecError(f"{type_name}: field {where}: {err.message}")


def decode(line: bytes | str) -> Message:
    if isinstance(line, bytes):
        try:
            line = line.decode()
        except UnicodeDecodeError as exc:
            raise CodecError(f"not UTF-8: {exc}") from None
    if not line.endswith("\n"):
        raise CodecError("truncated message: missing line terminator")
    try:
        body = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CodecError(f"malformed JSON: {exc}") from None
    if not isinstance(body, dict):
        raise CodecError("message must be a JSON object")
    type_name = body.get("type")
    if type_name not in MESSAGE_TYPES:
        raise CodecError(f"field type: unknown message type {type_name!r}")
    version = body.get("schema_version")
    if not isinstance(version, str) or version.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
        raise CodecError(f"field schema_version: unsupported version {version!r}")
    _check_schema(type_name, body)
    payload = {k: v for k, v in body.items() if k not in ("type", "schema_version")}
    try:
        return MESSAGE_TYPES[type_name].from_payload(payload)
    except CodecError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise CodecError(f"{type_name}: {exc}") from None


class LineHandler:
    """Anything that turns one inbound line into zero or more outbound lines."""

    def handle_line(self, line: bytes) -> list[bytes]:  # pragma: no cover - interface
        raise NotImplementedError


class LoopbackTransport:
    """In-process transport with the same FIFO, one-line-per-message semantics as TCP."""

    def __init__(self, handler: LineHandler):
        self.handler = handler
        self.inbox: deque[bytes] = deque()
        self.closed = False

    def send(self, data: bytes) -> None:
        if self.closed:
            raise TransportError("loopback transport is closed")
        try:
            self.inbox.extend(self.handler.handle_line(data))
        except CodecError as exc:
            self.inbox.append(encode(ErrorNotice(str(exc))))
            self.closed = True

    def recv(self) -> bytes:
        if not self.inbox:
            raise TransportError("no message pending on loopback transport")
        return self.inbox.popleft()

    def close(self) -> None:
        self.closed = True


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, sep, port = endpoint.rpartition(":")
    if not sep or not host:
        raise ValueError(f"endpoint must be host:port, got {endpoint!r}")
    return host, int(port)


class TcpTransport:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.reader = sock.makefile("rb")

    @classmethod
    def connect(cls, endpoint: str, timeout: float = 30.0) -> "TcpTransport":
        host, port = parse_endpoint(endpoint)
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {endpoint}: {exc}") from exc
        sock.settimeout(None)
        return cls(sock)

    def send(self, data: bytes) -> None:
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def recv(self) -> bytes:
        try:
            line = self.reader.readline()
        except OSError as exc:
            raise TransportError(f"receive failed: {exc}") from exc
        if not line:
            raise TransportError("connection closed by peer")
        return line

    def close(self) -> None:
        try:
            self.reader.close()
        finally:
            self.sock.close()


def serve(endpoint: str, handler_factory: Callable[[], LineHandler], ready: Callable[[str], None] | None = None):
    """Serve newline-delimited messages; one handler instance per connection.

    Blocks until the server is shut down. ``ready`` receives the bound
    ``host:port`` (useful with port 0).
    """
    server = make_server(endpoint, handler_factory)
    if ready is not None:
        host, port = server.server_address[:2]
        ready(f"{host}:{port}")
    with server:
        server.serve_forever()


def make_server(endpoint: str, handler_factory: Callable[[], LineHandler]) -> socketserver.ThreadingTCPServer:
    host, port = parse_endpoint(endpoint)

    class _Connection(socketserver.StreamRequestHandler):
        def handle(self):
            handler = handler_factory()
            for line in self.rfile:
                try:
                    replies = handler.handle_line(line)
                except CodecError as exc:
                    log.warning("closing connection after bad message: %s", exc)
                    self.wfile.write(encode(ErrorNotice(str(exc))))
                    return
                for reply in replies:
                    self.wfile.write(reply)
                self.wfile.flush()

    class _Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    return _Server((host, port), _Connection)


def start_background_server(endpoint: str, handler_factory: Callable[[], LineHandler]):
    """Start ``make_server`` on a daemon thread; returns (server, bound endpoint)."""
    server = make_server(endpoint, handler_factory)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    return server, f"{host}:{port}"

"""Page-turner device drivers: a deterministic mock and a serial driver.

Device contract: a device exposes ``turn_page() -> Ack`` and ``close()``.
``turn_page`` either returns an acknowledgment with the observed latency
or raises :class:`DeviceTimeout` / :class:`DeviceIo`. Calls are
serialized by the caller (the session loop is single-threaded); there is
deliberately no way to turn a page backward.

Wire protocol of the serial driver: write ASCII ``TURN\\n``, then read
until ``OK\\n`` arrives or the timeout elapses. Line-delimited ASCII
keeps the driver testable against a pty loopback peer.
"""

from __future__ import annotations

import os
import select
import time
import tty
from dataclasses import dataclass

from .errors import BadConfig, DeviceIo, DeviceTimeout

DEVICE_TIMEOUT_ENV = "PAGEFLIP_DEVICE_TIMEOUT_MS"
DEFAULT_TIMEOUT_MS = 500.0


@dataclass(frozen=True)
class Ack:
    """Successful turn acknowledgment with the observed latency."""

    latency_ms: float


class MockDevice:
    """In-memory device for replays and tests.

    Returns an Ack carrying the configured latency without sleeping, so
    session logs stay byte-identical across runs. ``fail_times`` makes
    the first N calls raise DeviceTimeout, for exercising retry paths.
    """

    def __init__(self, latency_ms: float = 20.0, fail_times: int = 0):
        self.latency_ms = latency_ms
        self.fail_times = fail_times
        self.calls = 0
        self.turns = 0

    def turn_page(self) -> Ack:
        self.calls += 1
        if self.calls <= self.fail_times:
            raise DeviceTimeout(f"mock timeout (call {self.calls})")
        self.turns += 1
        return Ack(latency_ms=self.latency_ms)

    def close(self) -> None:
        pass


class SerialDevice:
    """Line-protocol driver over a serial port, pty, or FIFO path."""

    def __init__(self, path: str, timeout_ms: float = DEFAULT_TIMEOUT_MS):
        self.path = path
        self.timeout_ms = timeout_ms
        try:
            self._fd = os.open(path, os.O_RDWR | os.O_NOCTTY)
        except OSError as exc:
            raise DeviceIo(f"cannot open device {path}: {exc}") from exc
        if os.isatty(self._fd):
            tty.setraw(self._fd)  # no echo, no newline translation

    def turn_page(self) -> Ack:
        """Send TURN and wait for OK within the timeout."""
        start = time.monotonic()
        deadline = start + self.timeout_ms / 1000.0
        self._write_all(b"TURN\n")
        buffer = b""
        while b"OK\n" not in buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise DeviceTimeout(
                    f"no acknowledgment from {self.path} within {self.timeout_ms:.0f} ms"
                )
            readable, _, _ = select.select([self._fd], [], [], remaining)
            if not readable:
                raise DeviceTimeout(
                    f"no acknowledgment from {self.path} within {self.timeout_ms:.0f} ms"
                )
            try:
                chunk = os.read(self._fd, 256)
            except OSError as exc:
                raise DeviceIo(f"read failed on {self.path}: {exc}") from exc
            if chunk == b"":
                raise DeviceIo(f"device stream {self.path} closed")
            buffer += chunk
        return Ack(latency_ms=(time.monotonic() - start) * 1000.0)

    def _write_all(self, data: bytes) -> None:
        view = memoryview(data)
        while view:
            try:
                written = os.write(self._fd, view)
            except OSError as exc:
                raise DeviceIo(f"write failed on {self.path}: {exc}") from exc
            view = view[written:]

    def close(self) -> None:
        try:
            os.close(self._fd)
        except OSError:
            pass


def resolve_timeout_ms(configured_ms: float) -> float:
    """Apply the PAGEFLIP_DEVICE_TIMEOUT_MS environment override."""
    raw = os.environ.get(DEVICE_TIMEOUT_ENV)
    if raw is None:
        return configured_ms
    try:
        value = float(raw)
    except ValueError as exc:
        raise BadConfig(f"{DEVICE_TIMEOUT_ENV} must be a number, got {raw!r}") from exc
    if value <= 0:
        raise BadConfig(f"{DEVICE_TIMEOUT_ENV} must be > 0, got {value}")
    return value


def device_from_spec(spec: str, timeout_ms: float = DEFAULT_TIMEOUT_MS):
    """Build a device from a CLI spec: ``mock`` or ``serial:/path``."""
    if spec == "mock":
        return MockDevice()
    if spec.startswith("serial:"):
        path = spec[len("serial:") :]
        if not path:
            raise BadConfig("serial device spec needs a path: serial:/dev/...")
        return SerialDevice(path, timeout_ms=resolve_timeout_ms(timeout_ms))
    raise BadConfig(f"unknown device spec {spec!r} (expected mock or serial:PATH)")

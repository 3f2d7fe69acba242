"""Newline-delimited JSON service in front of the reference monitor.

One JSON object per line in each direction:

    {"open": "LiveSearch", "uid": "alice"}     -> {"token": "<32 hex digits>"}
    {"query": "<token>", "sql": "SELECT ..."}  -> {"columns": [...], "rows": [[...]]}
                                                  {"rowcount": 1, "rebuild": [...], "cascaded": [...]}
                                                  {"error": "E_OWNER", "message": "..."}
    {"close": "<token>"}                       -> {"closed": "<token>"}

A malformed message is answered with an `E_PROTOCOL` record and the
connection is closed. Statements run in worker threads; the monitor
serializes them.
"""
from __future__ import annotations

import asyncio
import json
import logging
import secrets
import threading
from typing import Any

from src.errors import IdentityViolation, MonitorError, ProtocolError
from src.sandbox.monitor import ExecutionResult, ReferenceMonitor
from src.sandbox.session import Session

logger = logging.getLogger(__name__)

MAX_MESSAGE_BYTES = 1 << 20


def result_record(result: ExecutionResult) -> dict[str, Any]:
    if result.op.modifying:
        return {
            "rowcount": result.rowcount,
            "rebuild": result.rebuild_order,
            "cascaded": [str(row) for row in result.cascaded],
        }
    return {"columns": result.columns, "rows": [list(row) for row in result.rows]}


def error_record(error: MonitorError) -> dict[str, Any]:
    return {"error": error.code, "message": str(error)}


class SessionRegistry:
    """Session tokens: random 128-bit identifiers, never derived from the digest."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def add(self, session: Session) -> str:
        token = secrets.token_hex(16)
        with self._lock:
            self._sessions[token] = session
        return token

    def get(self, token: Any) -> Session:
        with self._lock:
            session = self._sessions.get(token) if isinstance(token, str) else None
        if session is None:
            raise IdentityViolation("unknown session token")
        return session

    def discard(self, token: str) -> bool:
        with self._lock:
            return self._sessions.pop(token, None) is not None

    def __len__(self) -> int:
        return len(self._sessions)


class MonitorService:
    def __init__(self, monitor: ReferenceMonitor):
        self.monitor = monitor
        self.sessions = SessionRegistry()

    def _text_field(self, message: dict, name: str) -> str:
        value = message.get(name)
        if not isinstance(value, str):
            raise ProtocolError(f"field '{name}' must be a string")
        return value

    async def handle(self, message: Any, owned: set[str] | None = None) -> dict[str, Any]:
        """
        Answers one decoded message.

        Raises:
            ProtocolError: for messages outside the protocol.
        """
        if not isinstance(message, dict):
            raise ProtocolError("a message must be a JSON object")
        try:
            if "open" in message:
                funit = self._text_field(message, "open")
                uid = self._text_field(message, "uid")
                session = await asyncio.to_thread(self.monitor.open_session, funit, uid)
                token = self.sessions.add(session)
                if owned is not None:
                    owned.add(token)
                return {"token": token}
            if "query" in message:
                session = self.sessions.get(message["query"])
                sql = self._text_field(message, "sql")
                result = await asyncio.to_thread(self.monitor.execute, session, sql)
                return result_record(result)
            if "close" in message:
                token = message["close"]
                self.sessions.get(token)
                self.sessions.discard(token)
                if owned is not None:
                    owned.discard(token)
                return {"closed": token}
        except ProtocolError:
            raise
        except MonitorError as e:
            return error_record(e)
        raise ProtocolError(f"unknown message with fields {', '.join(sorted(message)) or 'none'}")

    async def serve_connection(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        peer = writer.get_extra_info("peername") or "local socket"
        logger.info(f"Client connected: {peer}")
        owned: set[str] = set()

        async def send(record: dict) -> None:
            writer.write((json.dumps(record) + "\n").encode("utf-8"))
            await writer.drain()

        try:
            while True:
                try:
                    line = await reader.readline()
                except ValueError:
                    await send(error_record(ProtocolError(f"message exceeds {MAX_MESSAGE_BYTES} bytes")))
                    break
                if not line:
                    break
                if not line.strip():
                    continue
                try:
                    message = json.loads(line)
                    response = await self.handle(message, owned)
                except (json.JSONDecodeError, UnicodeDecodeError) as e:
                    await send(error_record(ProtocolError(f"invalid JSON: {e}")))
                    break
                except ProtocolError as e:
                    await send(error_record(e))
                    break
                await send(response)
        except ConnectionError as e:
            logger.warning(f"Connection to {peer} lost: {e}")
        finally:
            for token in owned:
                self.sessions.discard(token)
            writer.close()
            try:
                await writer.wait_closed()
            except ConnectionError:
                pass
            logger.info(f"Client disconnected: {peer}")


async def start(monitor: ReferenceMonitor, address: str) -> asyncio.AbstractServer:
    """`host:port` listens on TCP, anything else is a unix socket path."""
    service = MonitorService(monitor)
    host, _, port = address.rpartition(":")
    if host and port.isdigit():
        server = await asyncio.start_server(service.serve_connection, host, int(port), limit=MAX_MESSAGE_BYTES)
    else:
        server = await asyncio.start_unix_server(service.serve_connection, address, limit=MAX_MESSAGE_BYTES)
    logger.info(f"Serving on {address}")
    return server


async def serve(monitor: ReferenceMonitor, address: str) -> None:
    server = await start(monitor, address)
    async with server:
        await server.serve_forever()

"""Live twin service: session host, wire protocol, socket server."""

from .protocol import PROTOCOL_VERSION, decode_message, encode_message
from .server import TwinServer, serve_forever
from .session import Session

__all__ = ["PROTOCOL_VERSION", "decode_message", "encode_message",
           "TwinServer", "serve_forever", "Session"]

"""Stdio JSON worker that exposes numerical framework APIs.

The worker speaks a line-delimited JSON protocol: it announces the APIs
it can serve in a hello message, then answers call requests one at a
time until stdin closes. Each supported framework (numpy, torch,
tensorflow, jax) gets its own adapter and its own process.
"""

from .bindings import Adapter, ApiBinding, UnknownApiError, resolve_attr
from .serve import PROTOCOL_VERSION, serve
from .wire import WireError, WireValue, decode_value, encode_array

__all__ = [
    "Adapter",
    "ApiBinding",
    "PROTOCOL_VERSION",
    "UnknownApiError",
    "WireError",
    "WireValue",
    "decode_value",
    "encode_array",
    "resolve_attr",
    "serve",
]

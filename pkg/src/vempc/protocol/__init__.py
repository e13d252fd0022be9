"""Client/cloud state machines, packing layout, messages and transports."""

from .client import (Channel, InProcessChannel, ProtocolSession, StepResult, VempcClient)
from .cloud import CacheEntry, CloudConfig, CloudService, VempcCloud, holds_secret, resolve_workers
from .layout import PackingLayout, plan_batches
from .messages import (ByeMsg, ErrorMsg, OfflineAck, OfflineClientMsg, OnlineRequest,
                       OnlineResponse, SetupMsg, fnv1a64, params_hash, parse_frame,
                       transport_frame)
from .transport import SocketChannel, parse_address, serve

__all__ = [
    "ByeMsg", "CacheEntry", "Channel", "CloudConfig", "CloudService", "ErrorMsg",
    "InProcessChannel", "OfflineAck", "OfflineClientMsg", "OnlineRequest", "OnlineResponse",
    "PackingLayout", "ProtocolSession", "SetupMsg", "SocketChannel", "StepResult",
    "VempcClient", "VempcCloud", "fnv1a64", "holds_secret", "params_hash", "parse_address",
    "parse_frame", "plan_batches", "resolve_workers", "serve", "transport_frame",
]

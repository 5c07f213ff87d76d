"""Shared backend-client plumbing: endpoint config, errors, retry policy."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

__all__ = [
    "BackendError",
    "TransportError",
    "RefusalError",
    "ProtocolError",
    "BackendEndpoint",
    "with_retries",
]

BACKOFF_BASE = 0.25  # seconds; doubled per retry


class BackendError(RuntimeError):
    """Base class for anything a model backend can throw at us."""


class TransportError(BackendError):
    """Network-level failure (timeout, connection, 5xx); retryable."""


class RefusalError(BackendError):
    """The backend refused the request on content grounds; not retryable."""


class ProtocolError(BackendError):
    """The backend answered with something outside the wire contract."""


@dataclass(frozen=True)
class BackendEndpoint:
    base_url: str = ""
    auth_env: str = ""  # name of the env var carrying the bearer token
    timeout: float = 30.0
    retries: int = 2
    model: str = ""

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")

    def token(self) -> str:
        return os.environ.get(self.auth_env, "") if self.auth_env else ""


def with_retries(fn, retries: int, backoff: float = BACKOFF_BASE):
    """Run fn(); re-dispatch up to `retries` times on TransportError."""
    attempt = 0
    while True:
        try:
            return fn()
        except TransportError:
            if attempt >= retries:
                raise
            time.sleep(backoff * (2**attempt))
            attempt += 1

"""Remote oracle backend: POST /oracle/query with strict decode and retries."""
from __future__ import annotations

import os
import time
from dataclasses import dataclass

import requests

from ..errors import OracleMalformedError, OracleTransportError
from .types import OracleDecision, OracleQuery, decision_from_wire, query_to_wire


@dataclass(frozen=True)
class RemoteConfig:
    url: str  # endpoint root, e.g. http://host:port
    auth_token_var: str | None = None  # env var holding the bearer token
    timeout_s: float = 10.0
    retries: int = 2  # transport retries beyond the first attempt
    backoff_s: float = 0.5


class RemoteBackend:
    backend_id = "remote"

    def __init__(self, config: RemoteConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()
        self.last_retry_count = 0

    def bind_episode(self, handle, episode_id: str, seed: int):
        del handle, episode_id, seed  # stateless across episodes

    def query(self, q: OracleQuery) -> OracleDecision:
        body = query_to_wire(q)
        headers = {"Content-Type": "application/json"}
        if self.config.auth_token_var:
            token = os.environ.get(self.config.auth_token_var, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        url = self.config.url.rstrip("/") + "/oracle/query"
        last_err: Exception | None = None
        for attempt in range(self.config.retries + 1):
            if attempt:
                time.sleep(self.config.backoff_s * (2 ** (attempt - 1)))
            try:
                resp = self.session.post(url, json=body, headers=headers,
                                         timeout=self.config.timeout_s)
            except (requests.Timeout, requests.ConnectionError) as e:
                last_err = e
                continue
            if resp.status_code >= 500:
                last_err = OracleTransportError(f"server error {resp.status_code}")
                continue
            self.last_retry_count = attempt
            if resp.status_code != 200:
                raise OracleMalformedError(
                    f"endpoint refused query: HTTP {resp.status_code}: {resp.text[:200]}"
                )
            try:
                data = resp.json()
            except ValueError as e:
                raise OracleMalformedError(f"response is not JSON: {e}") from e
            return decision_from_wire(data, q)
        self.last_retry_count = self.config.retries
        raise OracleTransportError(
            f"transport retries exhausted against {url}: {last_err}"
        )


def make_remote(config: RemoteConfig) -> RemoteBackend:
    return RemoteBackend(config)

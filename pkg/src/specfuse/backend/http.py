"""JSON-over-HTTP remote backend: client plus a small reference server.

Wire protocol::

    POST /v1/generate {session_id, context, max_new_tokens, temperature, top_p, seed, do_sample}
        -> {text, token_probs: [float], finished: bool}
    POST /v1/score    {session_id, items: [{context, continuation, finished?}]}
        -> {scores: [{mean_prob: float, token_count: int}]}

``finished`` on a score item is optional and defaults to false.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Sequence

import httpx

from ..types import Candidate, ModelId, SamplingParams, ScoreItem, SequenceScore
from .base import Backend, BackendError, BackendUnavailable

logger = logging.getLogger(__name__)


class HttpBackend(Backend):
    def __init__(
        self,
        model_id: ModelId,
        url: str,
        timeout: float = 30.0,
        retries: int = 2,
        transport: httpx.BaseTransport | None = None,
    ):
        self.model = model_id
        self.url = url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _post(self, path: str, body: dict) -> dict:
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._client.post(self.url + path, json=body)
                if resp.status_code >= 500:
                    last = BackendUnavailable(self.model, f"HTTP {resp.status_code}")
                    continue
                if resp.status_code != 200:
                    raise BackendUnavailable(self.model, f"HTTP {resp.status_code}: {resp.text[:200]}")
                return resp.json()
            except (httpx.TransportError, json.JSONDecodeError) as exc:
                last = exc
                logger.debug("%s: attempt %d failed: %s", self.model, attempt + 1, exc)
        raise BackendUnavailable(self.model, f"giving up after {self.retries + 1} attempts: {last}")

    def generate(self, session, context, max_new_tokens, params: SamplingParams) -> Candidate:
        data = self._post(
            "/v1/generate",
            {
                "session_id": session,
                "context": context,
                "max_new_tokens": max_new_tokens,
                "temperature": params.temperature,
                "top_p": params.top_p,
                "seed": params.seed,
                "do_sample": params.do_sample,
            },
        )
        try:
            probs = tuple(float(p) for p in data["token_probs"])
            text = str(data["text"])
            finished = bool(data["finished"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendUnavailable(self.model, f"malformed generate response: {exc}") from exc
        if not 1 <= len(probs) <= max_new_tokens or not all(0 < p <= 1 for p in probs):
            raise BackendUnavailable(self.model, "generate response violates token_probs bounds")
        return Candidate(self.model, text, probs, finished)

    def score_batch(self, session, items: Sequence[ScoreItem]) -> list[SequenceScore]:
        data = self._post(
            "/v1/score",
            {
                "session_id": session,
                "items": [
                    {"context": it.context, "continuation": it.continuation, "finished": it.finished}
                    for it in items
                ],
            },
        )
        try:
            scores = [SequenceScore(float(s["mean_prob"]), int(s["token_count"])) for s in data["scores"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendUnavailable(self.model, f"malformed score response: {exc}") from exc
        if len(scores) != len(items):
            raise BackendUnavailable(self.model, "score response length mismatch")
        return scores

    def close(self) -> None:
        self._client.close()


def _handler_for(backend: Backend):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):
            logger.debug(fmt, *args)

        def _reply(self, code: int, body: dict) -> None:
            raw = json.dumps(body).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(raw)))
            self.end_headers()
            self.wfile.write(raw)

        def do_POST(self):
            try:
                length = int(self.headers.get("Content-Length", 0))
                req = json.loads(self.rfile.read(length) or b"{}")
                if self.path == "/v1/generate":
                    params = SamplingParams(
                        temperature=float(req.get("temperature", 1.0)),
                        top_p=float(req.get("top_p", 1.0)),
                        seed=int(req.get("seed", 0)),
                        do_sample=bool(req.get("do_sample", False)),
                    )
                    cand = backend.generate(req["session_id"], req["context"], int(req["max_new_tokens"]), params)
                    self._reply(200, {"text": cand.text, "token_probs": list(cand.token_probs), "finished": cand.finished})
                elif self.path == "/v1/score":
                    items = [
                        ScoreItem(it["context"], it["continuation"], bool(it.get("finished", False)))
                        for it in req["items"]
                    ]
                    scores = backend.score_batch(req["session_id"], items)
                    self._reply(200, {"scores": [{"mean_prob": s.mean_prob, "token_count": s.token_count} for s in scores]})
                else:
                    self._reply(404, {"error": f"unknown path {self.path}"})
            except BackendUnavailable as exc:
                self._reply(503, {"error": str(exc)})
            except (KeyError, TypeError, ValueError, BackendError) as exc:
                self._reply(400, {"error": str(exc)})

    return Handler


def serve_backend(backend: Backend, host: str = "127.0.0.1", port: int = 0, background: bool = True):
    """Expose ``backend`` over the wire protocol.

    Returns the server; with ``background`` it is already serving on a
    daemon thread. ``server.server_address`` holds the bound port.
    """
    server = ThreadingHTTPServer((host, port), _handler_for(backend))
    server.daemon_threads = True
    if background:
        threading.Thread(target=server.serve_forever, daemon=True).start()
    return server

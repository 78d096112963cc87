"""HTTP entry points mirroring the CLI read commands.

POST /query and POST /ask return byte-identical payloads to the CLI's
``--format json`` output; GET /articles/{id} and GET /stats expose records
and statistics. Requests against stale indexes answer 409.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import pipeline
from .config import AppConfig
from .docmodel import article_to_dict
from .errors import CorpuskitError, EmptyQuery, EmptyResult, StaleIndex, UnknownArticle
from .store import Store


def dumps_payload(payload: dict) -> str:
    """The one canonical JSON rendering shared with the CLI."""
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


class _Handler(BaseHTTPRequestHandler):
    server_version = "corpuskit"

    # populated by make_server
    store: Store
    config: AppConfig
    bundle = None
    bundle_lock: threading.Lock

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, body: str, content_type: str = "application/json"):
        data = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _error(self, status: int, code: str, message: str):
        self._send(status, dumps_payload({"error": code, "message": message}))

    def _read_json(self) -> dict | None:
        try:
            length = int(self.headers.get("Content-Length", 0))
            return json.loads(self.rfile.read(length).decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            return None

    def _indexes(self):
        staleness = self.store.index_staleness()
        manifest = self.store.manifest_path
        if manifest.exists():
            staleness = json.loads(manifest.read_text("utf-8")).get("index_staleness", staleness)
        if any(staleness.values()):
            raise StaleIndex("indexes are stale; rebuild with 'index build'")
        with self.bundle_lock:
            if self.__class__.bundle is None:
                self.__class__.bundle = pipeline.load_indexes(self.store, self.config)
            return self.__class__.bundle

    def do_GET(self):
        if self.path == "/stats":
            payload = self.store.corpus_stats().to_dict()
            self._send(200, dumps_payload(payload))
            return
        if self.path.startswith("/articles/"):
            article_id = self.path[len("/articles/") :]
            try:
                article = self.store.get_article(article_id)
            except UnknownArticle:
                self._error(404, "UnknownArticle", article_id)
                return
            self._send(200, dumps_payload(article_to_dict(article)))
            return
        self._error(404, "UnknownRoute", self.path)

    def do_POST(self):
        if self.path not in ("/query", "/ask"):
            self._error(404, "UnknownRoute", self.path)
            return
        body = self._read_json()
        if body is None or not isinstance(body, dict) or not body.get("query"):
            self._error(400, "BadRequest", "body must be JSON with a non-empty 'query'")
            return
        try:
            indexes = self._indexes()
            if self.path == "/query":
                q, result = pipeline.run_query(
                    self.store, indexes, self.config, body["query"], body.get("filter")
                )
                payload = pipeline.query_payload(q, result)
            else:
                payload = pipeline.run_ask(
                    self.store, indexes, self.config, body["query"], body.get("filter")
                )
        except StaleIndex as exc:
            self._error(409, exc.code, exc.message)
            return
        except (EmptyQuery, EmptyResult) as exc:
            self._error(400, exc.code, exc.message)
            return
        except CorpuskitError as exc:
            self._error(500, exc.code, exc.message)
            return
        self._send(200, dumps_payload(payload))


def make_server(store: Store, config: AppConfig, port: int = 0) -> ThreadingHTTPServer:
    """Create (but do not start) the HTTP server; port 0 picks a free port."""
    handler = type(
        "BoundHandler",
        (_Handler,),
        {"store": store, "config": config, "bundle": None, "bundle_lock": threading.Lock()},
    )
    return ThreadingHTTPServer(("127.0.0.1", port), handler)

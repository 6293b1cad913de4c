"""Local HTTP service for the expert labeling session.

Serves representative changes (closest to each centroid) as pre-tagged
diff payloads, records labels append-only, and finalizes the
cluster-to-class mapping.  Binds loopback by default: this is a desk
tool.  All endpoints live under /api; static UI assets are served at /.
"""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .classify import ExpertLabel, build_verification_set, map_clusters_to_classes, select_representatives
from .clustering import VectorSet
from .diffs import build_edit_script
from .errors import AddressInUse
from .metrics import METRIC_NAMES

_FALLBACK_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>changeclass labeling</title></head>
<body><h1>changeclass labeling service</h1>
<p>No UI build found. Point --static-dir at the built frontend, or drive
the JSON API under <code>/api</code> directly.</p></body></html>
"""


class LabelService:
    """Session-backed labeling state; one instance per served session."""

    def __init__(self, session, static_dir=None):
        session.require_stage("clustered")
        self.session = session
        self.config = session.config
        self.static_dir = Path(static_dir) if static_dir else None
        self.clustering = session.load_clustering()
        self.vectors = dict(session.load_vectors())
        self.records = {r.change_id: r for r in session.load_corpus()}
        selection = self.config.metric_selection()
        self.vector_set = VectorSet(
            ids=tuple(cid for cid in self.vectors),
            matrix=[selection.project(v) for v in self.vectors.values()],
            metric_names=selection.names,
        )
        self.reps = select_representatives(
            self.clustering, self.vector_set, self.config.representatives
        )
        self.labels = {(l.change_id, l.expert_id): l for l in session.load_labels()}
        self.queues: dict[str, dict[int, deque]] = {}
        self.seen_label_ids: set[str] = set()
        self.completed_experts: set[str] = set()
        self.write_lock = threading.Lock()

    # -- queues ---------------------------------------------------------

    def _expert_queues(self, expert: str) -> dict[int, deque]:
        if expert not in self.queues:
            self.queues[expert] = {
                j: deque(
                    cid for cid in reps if (cid, expert) not in self.labels
                )
                for j, reps in self.reps.items()
            }
        return self.queues[expert]

    def next_task(self, expert: str) -> dict | None:
        queues = self._expert_queues(expert)
        for j in sorted(queues):
            while queues[j] and (queues[j][0], expert) in self.labels:
                queues[j].popleft()
            if queues[j]:
                return self._task_payload(queues[j][0], j, expert)
        return None

    def _progress(self, expert: str) -> list[dict]:
        out = []
        for j, reps in sorted(self.reps.items()):
            done = sum(1 for cid in reps if (cid, expert) in self.labels)
            out.append({"cluster": j, "done": done, "total": len(reps)})
        return out

    def _task_payload(self, change_id: str, cluster: int, expert: str) -> dict:
        record = self.records[change_id]
        vector = self.vectors[change_id]
        files = []
        for fd in record.file_diffs:
            hunks = []
            for hunk in fd.hunks:
                script = build_edit_script(hunk)
                hunks.append(
                    {
                        "old_start": hunk.old_start,
                        "new_start": hunk.new_start,
                        "added": list(script.added),
                        "deleted": list(script.deleted),
                        "modified": [list(pair) for pair in script.modified],
                    }
                )
            files.append(
                {
                    "path": fd.path,
                    "is_add": fd.is_add,
                    "is_delete": fd.is_delete,
                    "hunks": hunks,
                }
            )
        return {
            "change_id": change_id,
            "cluster": cluster,
            "message": record.message,
            "author": record.author,
            "timestamp": record.timestamp,
            "files": files,
            "metrics": {name: getattr(vector, name) for name in METRIC_NAMES},
            "classes": list(self.config.classes),
            "progress": self._progress(expert),
        }

    # -- mutations --------------------------------------------------------

    def record_label(self, change_id, class_name, expert, label_id=None, at=None):
        if class_name not in self.config.class_set():
            raise ValueError(f"unknown class {class_name!r}")
        if change_id not in self.clustering.assignment:
            raise KeyError(change_id)
        with self.write_lock:
            if label_id is not None and label_id in self.seen_label_ids:
                return  # idempotent retry
            label = ExpertLabel(
                change_id=change_id,
                class_name=class_name,
                expert_id=expert,
                labeled_at=int(time.time()) if at is None else at,
            )
            self.session.append_labels([label])
            self.labels[(change_id, expert)] = label
            if label_id is not None:
                self.seen_label_ids.add(label_id)
            queues = self._expert_queues(expert)
            cluster = self.clustering.assignment[change_id]
            if change_id in queues[cluster]:
                queues[cluster].remove(change_id)
        if self.next_task(expert) is None and expert not in self.completed_experts:
            self.completed_experts.add(expert)
            print(f"labeling complete: every cluster has its requested labels ({expert})")

    def skip(self, change_id, expert):
        with self.write_lock:
            queues = self._expert_queues(expert)
            cluster = self.clustering.assignment.get(change_id)
            if cluster is None:
                raise KeyError(change_id)
            if change_id in queues[cluster]:
                queues[cluster].remove(change_id)
                queues[cluster].append(change_id)

    def tally(self) -> dict:
        per_cluster = []
        counts: dict[int, dict[str, int]] = {j: {} for j in self.reps}
        for (change_id, _expert), label in self.labels.items():
            cluster = self.clustering.assignment.get(change_id)
            if cluster is None:
                continue
            counts.setdefault(cluster, {})
            counts[cluster][label.class_name] = counts[cluster].get(label.class_name, 0) + 1
        for j in sorted(counts):
            tally = counts[j]
            ranked = sorted(tally.items(), key=lambda kv: (-kv[1], kv[0]))
            tied = len(ranked) > 1 and ranked[0][1] == ranked[1][1]
            per_cluster.append(
                {
                    "cluster": j,
                    "labels": tally,
                    "leader": None if (tied or not ranked) else ranked[0][0],
                    "tied": tied,
                }
            )
        return {"clusters": per_cluster}

    def finalize(self) -> tuple[bool, dict]:
        """(ok, payload): the resolved mapping, or the ties with extra
        representatives queued for targeted labeling."""
        with self.write_lock:
            cmap = map_clusters_to_classes(
                self.clustering, list(self.labels.values()), self.config.class_set()
            )
            if not cmap.resolved:
                extra = self._queue_extra_representatives(cmap.unresolved)
                return False, {
                    "unresolved": list(cmap.unresolved),
                    "extra_representatives": extra,
                }
            reps = {j: list(ids) for j, ids in self.reps.items()}
            self.session.save_mapping(cmap, representatives=reps)
            self.session.invalidate_downstream("mapped")
            payload = {
                "mapping": {str(j): c for j, c in cmap.mapping.items()},
                "tallies": {str(j): t for j, t in cmap.tallies.items()},
            }
            experts = sorted({expert for (_cid, expert) in self.labels})
            if len(experts) == 2:
                by_expert = {e: [] for e in experts}
                for (cid, expert), label in self.labels.items():
                    by_expert[expert].append(label)
                vset = build_verification_set(by_expert[experts[0]], by_expert[experts[1]])
                payload["verification"] = {
                    "agreed": len(vset.pairs),
                    "disagreements": list(vset.disagreements),
                    "only_first": list(vset.only_first),
                    "only_second": list(vset.only_second),
                }
            return True, payload

    def _queue_extra_representatives(self, unresolved) -> dict:
        """Widen the representative list of each tied cluster."""
        extra = {}
        wider = select_representatives(
            self.clustering,
            self.vector_set,
            self.config.representatives * 2,
        )
        for j in unresolved:
            fresh = [cid for cid in wider[j] if cid not in self.reps[j]]
            if fresh:
                self.reps[j] = self.reps[j] + fresh
                for queues in self.queues.values():
                    queues[j].extend(
                        cid for cid in fresh
                    )
                extra[str(j)] = fresh
        return extra

    def session_info(self, expert: str) -> dict:
        return {
            "classes": list(self.config.classes),
            "noop_class": self.config.noop_class,
            "k": self.clustering.k,
            "representatives": self.config.representatives,
            "progress": self._progress(expert),
            "experts": sorted({e for (_c, e) in self.labels}),
        }


class _Handler(BaseHTTPRequestHandler):
    service: LabelService = None  # set by serve()

    def log_message(self, *args):
        pass

    def _send_json(self, status: int, payload: dict | None):
        body = b"" if payload is None else json.dumps(payload).encode("utf-8")
        self.send_response(status)
        if body:
            self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if body:
            self.wfile.write(body)

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        if not length:
            return {}
        return json.loads(self.rfile.read(length))

    def do_GET(self):
        url = urlparse(self.path)
        query = parse_qs(url.query)
        expert = query.get("expert", ["expert"])[0]
        if url.path == "/api/session":
            self._send_json(200, self.service.session_info(expert))
        elif url.path == "/api/task/next":
            task = self.service.next_task(expert)
            if task is None:
                self._send_json(204, None)
            else:
                self._send_json(200, task)
        elif url.path == "/api/clusters":
            self._send_json(200, self.service.tally())
        elif url.path.startswith("/api/"):
            self._send_json(404, {"error": f"unknown endpoint {url.path}"})
        else:
            self._send_static(url.path)

    def do_POST(self):
        url = urlparse(self.path)
        try:
            body = self._read_json()
        except json.JSONDecodeError:
            self._send_json(400, {"error": "invalid JSON body"})
            return
        if url.path == "/api/label":
            missing = [k for k in ("change_id", "class", "expert") if k not in body]
            if missing:
                self._send_json(422, {"error": f"missing fields: {missing}"})
                return
            try:
                self.service.record_label(
                    body["change_id"], body["class"], body["expert"],
                    label_id=body.get("label_id"),
                )
            except ValueError as exc:
                self._send_json(422, {"error": str(exc)})
                return
            except KeyError as exc:
                self._send_json(404, {"error": f"unknown change {exc}"})
                return
            self._send_json(201, {"ok": True})
        elif url.path == "/api/skip":
            try:
                self.service.skip(body.get("change_id"), body.get("expert", "expert"))
            except KeyError as exc:
                self._send_json(404, {"error": f"unknown change {exc}"})
                return
            self._send_json(200, {"ok": True})
        elif url.path == "/api/finalize":
            ok, payload = self.service.finalize()
            self._send_json(200 if ok else 409, payload)
        else:
            self._send_json(404, {"error": f"unknown endpoint {url.path}"})

    def _send_static(self, path: str):
        static_dir = self.service.static_dir
        if path in ("", "/"):
            path = "/index.html"
        if static_dir is None:
            if path == "/index.html":
                body = _FALLBACK_PAGE.encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "text/html; charset=utf-8")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)
            else:
                self._send_json(404, {"error": "no static assets configured"})
            return
        target = (static_dir / path.lstrip("/")).resolve()
        if not str(target).startswith(str(static_dir.resolve())) or not target.is_file():
            self._send_json(404, {"error": "not found"})
            return
        content_types = {
            ".html": "text/html; charset=utf-8",
            ".js": "text/javascript",
            ".css": "text/css",
            ".map": "application/json",
        }
        body = target.read_bytes()
        self.send_response(200)
        self.send_header(
            "Content-Type", content_types.get(target.suffix, "application/octet-stream")
        )
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class LabelServer:
    def __init__(self, httpd: ThreadingHTTPServer, thread: threading.Thread):
        self._httpd = httpd
        self._thread = thread

    @property
    def address(self):
        return self._httpd.server_address

    def wait(self):
        self._thread.join()

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()


def serve(session, bind="127.0.0.1", port=0, static_dir=None) -> LabelServer:
    """Start the labeling service on a background thread."""
    service = LabelService(session, static_dir=static_dir)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    try:
        httpd = ThreadingHTTPServer((bind, port), handler)
    except OSError as exc:
        if exc.errno == 98:  # EADDRINUSE
            raise AddressInUse(f"{bind}:{port} is already in use") from exc
        raise
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    return LabelServer(httpd, thread)

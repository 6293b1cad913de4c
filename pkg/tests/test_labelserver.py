import json
import urllib.error
import urllib.request

import pytest

from changeclass.cli import main
from changeclass.errors import AddressInUse, StageError
from changeclass.labelserver import LabelService, serve
from changeclass.session import Session
from synth import BUNDLES


def three_bundle_history(per_bundle=6):
    chunks = []
    truth = {}
    serial = 0
    for i in range(per_bundle):
        for cls, gen in BUNDLES[:3]:  # N, D, F
            cid = f"{cls.lower()}{i:03d}"
            size = (i % 4) + 1
            chunks.append(
                f"commit {cid}\nauthor synth\ndate {1_000_000 + serial * 60}\n"
                f"message {cls} change\n" + gen(size, i)
            )
            truth[cid] = cls
            serial += 1
    return "".join(chunks), truth


@pytest.fixture
def clustered_session(tmp_path):
    history, truth = three_bundle_history()
    (tmp_path / "history.diffs").write_text(history)
    session_dir = str(tmp_path / "session")
    assert main(["init", "--classes", "N,D,F", "--reps", "4",
                 "--i-min", "-1", "--session", session_dir]) == 0
    assert main(["ingest", str(tmp_path / "history.diffs"), "--session", session_dir]) == 0
    assert main(["measure", "--session", session_dir]) == 0
    assert main(["cluster", "--session", session_dir]) == 0
    return Session.open(session_dir), truth


@pytest.fixture
def server(clustered_session):
    session, truth = clustered_session
    handle = serve(session, port=0)
    yield handle, truth, session
    handle.stop()


def api(handle, path, body=None, method=None):
    host, port = handle.address
    url = f"http://{host}:{port}{path}"
    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(url, data=data, method=method)
    if data is not None:
        req.add_header("Content-Type", "application/json")
    try:
        with urllib.request.urlopen(req) as response:
            payload = response.read()
            return response.status, json.loads(payload) if payload else None
    except urllib.error.HTTPError as exc:
        payload = exc.read()
        return exc.code, json.loads(payload) if payload else None


class TestTaskServing:
    def test_first_task_is_cluster_zero_top_representative(self, server):
        handle, truth, session = server
        status, task = api(handle, "/api/task/next?expert=e1")
        assert status == 200
        assert task["cluster"] == 0
        # Deterministic: asking again without labeling returns the same task.
        status2, task2 = api(handle, "/api/task/next?expert=e1")
        assert task2["change_id"] == task["change_id"]

    def test_task_payload_is_pretagged(self, server):
        handle, truth, session = server
        _, task = api(handle, "/api/task/next?expert=e1")
        assert task["classes"] == ["N", "D", "F"]
        assert "metrics" in task and task["metrics"]["files_mod"] >= 1
        hunks = [h for f in task["files"] for h in f["hunks"]]
        assert hunks
        assert all({"added", "deleted", "modified"} <= set(h) for h in hunks)

    def test_label_advances_progress(self, server):
        handle, truth, session = server
        _, task = api(handle, "/api/task/next?expert=e1")
        status, _ = api(handle, "/api/label", {
            "change_id": task["change_id"],
            "class": truth[task["change_id"]],
            "expert": "e1",
        })
        assert status == 201
        _, info = api(handle, "/api/session?expert=e1")
        done = sum(p["done"] for p in info["progress"])
        assert done == 1

    def test_unknown_class_rejected(self, server):
        handle, truth, session = server
        _, task = api(handle, "/api/task/next?expert=e1")
        status, body = api(handle, "/api/label", {
            "change_id": task["change_id"], "class": "bogus", "expert": "e1",
        })
        assert status == 422
        assert "error" in body

    def test_unknown_change_rejected(self, server):
        handle, truth, session = server
        status, _ = api(handle, "/api/label", {
            "change_id": "ghost", "class": "N", "expert": "e1",
        })
        assert status == 404

    def test_skip_requeues_at_end(self, server):
        handle, truth, session = server
        _, first = api(handle, "/api/task/next?expert=e1")
        api(handle, "/api/skip", {"change_id": first["change_id"], "expert": "e1"})
        _, second = api(handle, "/api/task/next?expert=e1")
        assert second["change_id"] != first["change_id"]
        assert second["cluster"] == 0

    def test_label_retry_is_idempotent(self, server):
        handle, truth, session = server
        _, task = api(handle, "/api/task/next?expert=e1")
        body = {
            "change_id": task["change_id"],
            "class": truth[task["change_id"]],
            "expert": "e1",
            "label_id": "L1",
        }
        assert api(handle, "/api/label", body)[0] == 201
        assert api(handle, "/api/label", body)[0] == 201
        log = (session.path / "labels.log").read_text()
        assert log.count(task["change_id"]) == 1


def label_everything(handle, truth, expert="e1", override=None):
    labeled = []
    while True:
        status, task = api(handle, f"/api/task/next?expert={expert}")
        if status == 204:
            return labeled
        cid = task["change_id"]
        cls = (override or {}).get(cid, truth[cid])
        status, _ = api(handle, "/api/label", {
            "change_id": cid, "class": cls, "expert": expert,
        })
        assert status == 201
        labeled.append((cid, cls))


class TestFinalize:
    def test_round_trip_12_labels_3_clusters(self, server):
        handle, truth, session = server
        labeled = label_everything(handle, truth)
        assert len(labeled) == 12  # 4 representatives per cluster
        status, payload = api(handle, "/api/finalize", {}, method="POST")
        assert status == 200
        # Plurality of the labels we just sent, per cluster.
        expected = {}
        clustering = session.load_clustering()
        for cid, cls in labeled:
            expected.setdefault(clustering.assignment[cid], []).append(cls)
        for cluster, classes in expected.items():
            top = max(set(classes), key=classes.count)
            assert payload["mapping"][str(cluster)] == top
        assert session.load_mapping().resolved

    def test_forced_tie_409_with_cluster_id_and_extra_tasks(self, server):
        handle, truth, session = server
        clustering = session.load_clustering()
        # Split cluster 0's four representatives 2-2 between two classes.
        tie_cluster = 0
        members = []
        override = {}
        while True:
            status, task = api(handle, "/api/task/next?expert=e1")
            if status == 204:
                break
            cid = task["change_id"]
            if task["cluster"] == tie_cluster:
                members.append(cid)
                override[cid] = "N" if len(members) % 2 else "D"
            api(handle, "/api/label", {
                "change_id": cid,
                "class": override.get(cid, truth[cid]),
                "expert": "e1",
            })
        status, payload = api(handle, "/api/finalize", {}, method="POST")
        assert status == 409
        assert payload["unresolved"] == [tie_cluster]
        assert payload["extra_representatives"].get(str(tie_cluster))
        # The tied cluster's extra representatives are now served.
        status, task = api(handle, "/api/task/next?expert=e1")
        assert status == 200
        assert task["cluster"] == tie_cluster

    def test_dual_expert_verification_in_finalize(self, server):
        handle, truth, session = server
        label_everything(handle, truth, expert="e1")
        # Second expert disagrees on exactly one change.
        labeled = []
        disagree_on = None
        while True:
            status, task = api(handle, "/api/task/next?expert=e2")
            if status == 204:
                break
            cid = task["change_id"]
            cls = truth[cid]
            if disagree_on is None:
                disagree_on = cid
                cls = "F" if truth[cid] != "F" else "N"
            api(handle, "/api/label", {"change_id": cid, "class": cls, "expert": "e2"})
            labeled.append(cid)
        status, payload = api(handle, "/api/finalize", {}, method="POST")
        assert status == 200
        assert payload["verification"]["agreed"] == 11
        assert payload["verification"]["disagreements"] == [disagree_on]


class TestServerPlumbing:
    def test_requires_clustered_stage(self, tmp_path):
        session_dir = str(tmp_path / "s")
        main(["init", "--classes", "N,D,F", "--session", session_dir])
        with pytest.raises(StageError):
            LabelService(Session.open(session_dir))

    def test_fallback_page_served_at_root(self, server):
        handle, truth, session = server
        host, port = handle.address
        with urllib.request.urlopen(f"http://{host}:{port}/") as response:
            assert response.status == 200
            assert b"changeclass" in response.read()

    def test_address_in_use(self, server, clustered_session):
        handle, truth, session = server
        with pytest.raises(AddressInUse):
            serve(session, port=handle.address[1])

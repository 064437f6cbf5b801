"""HTTP facade: endpoint contract, error mapping, and the event stream."""

import json
import threading
import urllib.error
import urllib.request

import pytest

from plangarden.api import GardenService, garden_view, make_server
from plangarden.engine import MockEngine, MockScenario
from plangarden.garden import Garden, GardenConfig, SubmoduleDescriptor
from plangarden.orchestrator import Orchestrator
from plangarden.persistence import read_events
from plangarden.providers import ReplayProvider

ROSTER = (
    SubmoduleDescriptor("code_generator", "writes actor code"),
    SubmoduleDescriptor("mesh_downloader", "retrieves assets"),
)

SCRIPTS = {
    "broad_planner": ["1. build the thing [LEAF: code_generator]\n2. decorate [LEAF: code_generator]"],
    "task_generator": ["ACTOR:\nBuild.\nSPAWNER:\nPlace.",
                       "ACTOR:\nDecorate.\nSPAWNER:\nPlace."],
    "code_generator": ["```cpp\n// FILE: Thing.h\nclass AThing {};\n```"] * 2,
    "layout_generator": ['{"actors": [{"class": "Thing", "position": [0,0,0], '
                         '"rotation": [0,0,0], "scale": [1,1,1], "properties": {}}]}'] * 2,
    "visual_eval": ["VERDICT: PASS"] * 2,
}


@pytest.fixture()
def server(tmp_path):
    def make_orchestrator(garden_id):
        ws = tmp_path / garden_id
        ws.mkdir(parents=True, exist_ok=True)
        return Orchestrator(
            garden=Garden(config=GardenConfig(submodule_roster=ROSTER)),
            provider=ReplayProvider({k: list(v) for k, v in SCRIPTS.items()}),
            engine=MockEngine(ws, MockScenario.all_ok()),
            workspace=ws,
            log=__import__("plangarden.persistence", fromlist=["EventLog"]).EventLog(
                ws / "events.log"),
        )

    service = GardenService(make_orchestrator)
    httpd = make_server(service, port=0)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{httpd.server_port}", service
    httpd.shutdown()


def call(base, method, path, body=None):
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(base + path, data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return resp.status, json.loads(resp.read() or b"{}")
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read() or b"{}")


def test_seed_step_get_flow(server):
    base, service = server
    status, doc = call(base, "POST", "/gardens")
    assert status == 201
    g = doc["garden_id"]

    status, doc = call(base, "POST", f"/gardens/{g}/seed",
                       {"text": "a cabin in the woods"})
    assert status == 201
    root = doc["node_id"]

    status, doc = call(base, "POST", f"/gardens/{g}/step")
    assert status == 200 and not doc["idle"]

    status, view = call(base, "GET", f"/gardens/{g}")
    assert status == 200
    kinds = {n["id"]: n["kind"] for n in view["nodes"]}
    assert kinds[root] == "Seed"
    children = [n for n in view["nodes"] if n["parent"] == root]
    assert len(children) == 2
    assert view["mode"] == "Step"

    status, node = call(base, "GET", f"/gardens/{g}/nodes/{root}")
    assert status == 200
    assert node["text"] == "a cabin in the woods"


def test_error_mapping(server):
    base, _ = server
    assert call(base, "GET", "/gardens/nope")[0] == 404
    _, doc = call(base, "POST", "/gardens")
    g = doc["garden_id"]
    assert call(base, "GET", f"/gardens/{g}/nodes/99")[0] == 404
    # malformed edit
    call(base, "POST", f"/gardens/{g}/seed", {"text": "x"})
    assert call(base, "PATCH", f"/gardens/{g}/nodes/1", {})[0] == 422
    assert call(base, "PATCH", f"/gardens/{g}/nodes/1", {"is_leaf": "yes"})[0] == 422
    # seeding twice is a conflict
    assert call(base, "POST", f"/gardens/{g}/seed", {"text": "y"})[0] == 409
    # toggling the seed is a conflict (kind violation)
    assert call(base, "PATCH", f"/gardens/{g}/nodes/1", {"is_leaf": True})[0] == 409


def test_patch_cascade_matches_direct_call_and_streams_backup(server):
    base, service = server
    _, doc = call(base, "POST", "/gardens")
    g = doc["garden_id"]
    call(base, "POST", f"/gardens/{g}/seed", {"text": "x"})
    call(base, "POST", f"/gardens/{g}/mode", {"mode": "play"})
    service.join_worker(g)

    _, view = call(base, "GET", f"/gardens/{g}")
    leaf = next(n for n in view["nodes"] if n["is_leaf"])

    # a direct orchestrator call on a cloned garden is the oracle for the API
    from plangarden.orchestrator import EditKind, Orchestrator, UserEdit
    from plangarden.persistence import load_garden, save_garden

    orch = service.get(g)
    shadow_ws = orch.workspace / "shadow"
    shadow = Orchestrator(
        garden=load_garden(save_garden(orch.garden)),
        provider=ReplayProvider({}),
        engine=MockEngine(shadow_ws, MockScenario.all_ok()),
        workspace=shadow_ws,
    )
    expected = shadow.apply_edit(UserEdit(EditKind.TOGGLE_LEAF, leaf["id"], False))

    status, doc = call(base, "PATCH", f"/gardens/{g}/nodes/{leaf['id']}",
                       {"is_leaf": False})
    assert status == 200
    assert sorted(doc["removed"]) == sorted(expected.removed)
    assert len(doc["backups"]) == 1

    _, view2 = call(base, "GET", f"/gardens/{g}")
    present = {n["id"] for n in view2["nodes"]}
    assert not (set(doc["removed"]) & present)
    node = next(n for n in view2["nodes"] if n["id"] == leaf["id"])
    assert node["is_leaf"] is False

    # backup event visible in the stream, deletions attributed to the user
    total = orch.log.last_seq
    req = urllib.request.Request(f"{base}/gardens/{g}/events?from=0&limit={total}")
    with urllib.request.urlopen(req, timeout=10) as resp:
        lines = [json.loads(raw) for raw in resp]
    backup_events = [e for e in lines if e["payload"].get("type") == "backup_created"]
    assert backup_events and backup_events[0]["actor"] == "User"
    deletions = [e for e in lines if e["payload"].get("type") == "node_deleted"]
    assert deletions and all(e["actor"] == "User" for e in deletions)


def test_event_stream_matches_log_and_is_ordered(server, tmp_path):
    base, service = server
    _, doc = call(base, "POST", "/gardens")
    g = doc["garden_id"]
    call(base, "POST", f"/gardens/{g}/seed", {"text": "x"})
    call(base, "POST", f"/gardens/{g}/step")
    orch = service.get(g)
    total = orch.log.last_seq

    req = urllib.request.Request(f"{base}/gardens/{g}/events?from=0&limit={total}")
    with urllib.request.urlopen(req, timeout=10) as resp:
        streamed = [json.loads(line) for line in resp]
    assert [e["seq"] for e in streamed] == list(range(1, total + 1))

    on_disk = list(read_events(tmp_path / g / "events.log"))
    assert [(e.seq, e.payload) for e in on_disk] == \
        [(e["seq"], e["payload"]) for e in streamed]


def test_stream_resumes_from_cursor(server):
    base, service = server
    _, doc = call(base, "POST", "/gardens")
    g = doc["garden_id"]
    call(base, "POST", f"/gardens/{g}/seed", {"text": "x"})
    orch = service.get(g)
    last = orch.log.last_seq
    call(base, "POST", f"/gardens/{g}/step")
    new_total = orch.log.last_seq

    req = urllib.request.Request(
        f"{base}/gardens/{g}/events?from={last}&limit={new_total - last}")
    with urllib.request.urlopen(req, timeout=10) as resp:
        streamed = [json.loads(line) for line in resp]
    assert streamed[0]["seq"] == last + 1
    assert streamed[-1]["seq"] == new_total


def test_play_mode_runs_worker_to_terminal(server):
    base, service = server
    _, doc = call(base, "POST", "/gardens")
    g = doc["garden_id"]
    call(base, "POST", f"/gardens/{g}/seed", {"text": "x"})
    status, doc = call(base, "POST", f"/gardens/{g}/mode", {"mode": "play"})
    assert status == 200
    service.join_worker(g)
    _, view = call(base, "GET", f"/gardens/{g}")
    statuses = {n["status"] for n in view["nodes"]}
    assert statuses == {"Succeeded"}
    assert view["in_progress_node"] is None


def test_compile_and_run_endpoint(server):
    base, service = server
    _, doc = call(base, "POST", "/gardens")
    g = doc["garden_id"]
    call(base, "POST", f"/gardens/{g}/seed", {"text": "x"})
    call(base, "POST", f"/gardens/{g}/mode", {"mode": "play"})
    service.join_worker(g)
    _, view = call(base, "GET", f"/gardens/{g}")
    attempt = next(n for n in view["nodes"] if n["kind"] == "CodeAttempt")
    status, doc = call(base, "POST",
                       f"/gardens/{g}/nodes/{attempt['id']}/compile-and-run")
    assert status == 200
    assert doc["session"].startswith("session-")
    # snapshot precondition failure maps to 409
    seed_node = next(n for n in view["nodes"] if n["kind"] == "Seed")
    status, _ = call(base, "POST",
                     f"/gardens/{g}/nodes/{seed_node['id']}/compile-and-run")
    assert status == 409


def test_restore_endpoint_round_trips(server):
    base, service = server
    _, doc = call(base, "POST", "/gardens")
    g = doc["garden_id"]
    call(base, "POST", f"/gardens/{g}/seed", {"text": "x"})
    call(base, "POST", f"/gardens/{g}/mode", {"mode": "play"})
    service.join_worker(g)

    from plangarden.persistence import save_garden

    orch = service.get(g)
    before = save_garden(orch.garden)
    _, view = call(base, "GET", f"/gardens/{g}")
    leaf = next(n for n in view["nodes"] if n["is_leaf"])
    status, doc = call(base, "PATCH", f"/gardens/{g}/nodes/{leaf['id']}",
                       {"is_leaf": False})
    backup_id = doc["backups"][0]
    assert save_garden(orch.garden) != before
    status, doc = call(base, "POST", f"/gardens/{g}/restore",
                       {"backup_id": backup_id})
    assert status == 200
    assert save_garden(orch.garden) == before
    # unknown backup conflicts
    assert call(base, "POST", f"/gardens/{g}/restore",
                {"backup_id": "b9999"})[0] == 409


def test_view_is_pure_snapshot(server):
    base, service = server
    _, doc = call(base, "POST", "/gardens")
    g = doc["garden_id"]
    call(base, "POST", f"/gardens/{g}/seed", {"text": "z" * 500})
    orch = service.get(g)
    v1 = garden_view(orch)
    v2 = garden_view(orch)
    assert v1 == v2
    node = v1["nodes"][0]
    assert len(node["text_excerpt"]) == 121  # 120 chars + ellipsis

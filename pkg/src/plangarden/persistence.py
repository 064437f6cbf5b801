"""Durable garden documents, the append-only event log, and the backup store.

The event log is the source of truth: replaying a complete log reconstructs
a garden whose canonical serialization is byte-identical to the live save.
Replay interprets recorded mutations only; it never re-runs planner or
pipeline logic. Binary artifacts (screenshots, meshes) stay in the workspace
and are referenced by path.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional

from .errors import (
    ConflictingIds,
    CorruptDocument,
    SequenceGap,
    UnknownBackup,
    VersionMismatch,
)
from .garden import (
    Garden,
    GardenConfig,
    GardenNode,
    Mode,
    NodeKind,
    NodeStatus,
    SubmoduleDescriptor,
)

SCHEMA_VERSION = 1

ACTOR_SYSTEM = "System"
ACTOR_USER = "User"


# --- garden documents ---------------------------------------------------------

def node_to_dict(node: GardenNode) -> dict[str, Any]:
    return {
        "id": node.id,
        "kind": node.kind.value,
        "parent": node.parent,
        "child_order": node.child_order,
        "text": node.text,
        "is_leaf": node.is_leaf,
        "assigned_submodule": node.assigned_submodule,
        "status": node.status.value,
        "payload": node.payload,
    }


def node_from_dict(doc: dict[str, Any]) -> GardenNode:
    try:
        return GardenNode(
            id=doc["id"],
            kind=NodeKind(doc["kind"]),
            parent=doc["parent"],
            child_order=doc["child_order"],
            text=doc["text"],
            is_leaf=doc["is_leaf"],
            assigned_submodule=doc["assigned_submodule"],
            status=NodeStatus(doc["status"]),
            payload=doc["payload"],
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise CorruptDocument(f"bad node record: {exc}") from exc


def config_to_dict(config: GardenConfig) -> dict[str, Any]:
    return {
        "max_depth": config.max_depth,
        "max_branching": config.max_branching,
        "max_code_attempts": config.max_code_attempts,
        "submodule_roster": [
            {"name": s.name, "description": s.description}
            for s in config.submodule_roster
        ],
    }


def config_from_dict(doc: dict[str, Any]) -> GardenConfig:
    try:
        return GardenConfig(
            max_depth=doc["max_depth"],
            max_branching=doc["max_branching"],
            max_code_attempts=doc["max_code_attempts"],
            submodule_roster=tuple(
                SubmoduleDescriptor(s["name"], s["description"])
                for s in doc["submodule_roster"]
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptDocument(f"bad config record: {exc}") from exc


def save_garden(garden: Garden) -> str:
    """Canonical serialization: stable key order, nodes sorted by id."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": config_to_dict(garden.config),
        "mode": garden.mode.value,
        "next_id": garden.next_id,
        "nodes": [node_to_dict(garden.nodes[i]) for i in sorted(garden.nodes)],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def load_garden(text: str) -> Garden:
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise CorruptDocument(str(exc)) from exc
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise CorruptDocument("not a garden document")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise VersionMismatch(f"schema_version {doc['schema_version']}")
    try:
        garden = Garden(
            config=config_from_dict(doc["config"]),
            mode=Mode(doc["mode"]),
            next_id=doc["next_id"],
        )
        for raw in doc["nodes"]:
            node = node_from_dict(raw)
            garden.nodes[node.id] = node
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptDocument(f"bad garden document: {exc}") from exc
    return garden


# --- event log -----------------------------------------------------------------

@dataclass(frozen=True)
class GardenEvent:
    seq: int
    timestamp: str
    actor: str
    payload: dict[str, Any]

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "timestamp": self.timestamp, "actor": self.actor,
             "payload": self.payload},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "GardenEvent":
        try:
            doc = json.loads(line)
            return cls(
                seq=doc["seq"],
                timestamp=doc["timestamp"],
                actor=doc["actor"],
                payload=doc["payload"],
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptDocument(f"bad event record: {exc}") from exc


class EventLog:
    """Append-only, gapless event sequence with optional file persistence.

    Appends flush to disk before returning; subscribers are woken through a
    condition variable so the API can stream live.
    """

    def __init__(self, path: Optional[Path] = None) -> None:
        self.path = Path(path) if path else None
        self._events: list[GardenEvent] = []
        self._cond = threading.Condition()
        if self.path is not None and self.path.exists():
            self._events = list(read_events(self.path))

    @property
    def last_seq(self) -> int:
        return self._events[-1].seq if self._events else 0

    def record(self, actor: str, payload: dict[str, Any]) -> GardenEvent:
        event = GardenEvent(
            seq=self.last_seq + 1,
            timestamp=datetime.now(timezone.utc).isoformat(),
            actor=actor,
            payload=payload,
        )
        append_event(self, event)
        return event

    def events(self, from_seq: int = 0) -> list[GardenEvent]:
        return [e for e in self._events if e.seq > from_seq]

    def wait_for(self, after_seq: int, timeout: float = 0.5) -> list[GardenEvent]:
        """Block until events past after_seq exist or the timeout passes."""
        with self._cond:
            if self.last_seq <= after_seq:
                self._cond.wait(timeout=timeout)
            return self.events(from_seq=after_seq)


def append_event(log: EventLog, event: GardenEvent) -> None:
    if event.seq != log.last_seq + 1:
        raise SequenceGap(f"expected seq {log.last_seq + 1}, got {event.seq}")
    with log._cond:
        log._events.append(event)
        if log.path is not None:
            with open(log.path, "a", encoding="utf-8") as fh:
                fh.write(event.to_json() + "\n")
                fh.flush()
        log._cond.notify_all()


def read_events(path: Path) -> Iterator[GardenEvent]:
    expected = 1
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        event = GardenEvent.from_json(line)
        if event.seq != expected:
            raise SequenceGap(f"expected seq {expected}, got {event.seq}")
        expected += 1
        yield event


def replay_events(events: Iterable[GardenEvent]) -> Garden:
    """Rebuild a garden purely from recorded mutations."""
    garden: Optional[Garden] = None
    for event in events:
        payload = event.payload
        kind = payload.get("type")
        if kind == "garden_created":
            garden = Garden(
                config=config_from_dict(payload["config"]),
                mode=Mode(payload["mode"]),
            )
            continue
        if garden is None:
            raise CorruptDocument("event log does not start with garden_created")
        if kind in ("node_added", "node_restored"):
            node = node_from_dict(payload["node"])
            garden.nodes[node.id] = node
            garden.next_id = max(garden.next_id, node.id + 1)
        elif kind == "node_updated":
            node = node_from_dict(payload["node"])
            garden.nodes[node.id] = node
        elif kind == "node_deleted":
            garden.nodes.pop(payload["id"], None)
        elif kind == "mode_changed":
            garden.mode = Mode(payload["mode"])
        # informational events (work_unit, provider_call, backup_created,
        # asset_*, mesh_imported, session_launched) do not mutate the garden
    if garden is None:
        raise CorruptDocument("empty event log")
    return garden


# --- backups ---------------------------------------------------------------------

@dataclass
class BackupBundle:
    backup_id: str
    edit_ref: str
    nodes: list[dict[str, Any]] = field(default_factory=list)
    assets: list[dict[str, Any]] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "backup_id": self.backup_id,
                "edit_ref": self.edit_ref,
                "nodes": self.nodes,
                "assets": self.assets,
            },
            sort_keys=True,
            indent=2,
        ) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BackupBundle":
        try:
            doc = json.loads(text)
            return cls(
                backup_id=doc["backup_id"],
                edit_ref=doc["edit_ref"],
                nodes=doc["nodes"],
                assets=doc["assets"],
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptDocument(f"bad backup bundle: {exc}") from exc


class BackupStore:
    """Self-contained pre-deletion snapshots under backups/<backup_id>/."""

    def __init__(self, root: Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _next_id(self) -> str:
        existing = [p.name for p in self.root.iterdir() if p.is_dir()]
        numbers = [int(name[1:]) for name in existing if name.startswith("b") and name[1:].isdigit()]
        return f"b{(max(numbers) + 1 if numbers else 1):04d}"

    def create(
        self,
        nodes: list[GardenNode],
        edit_ref: str,
        assets: Optional[list[dict[str, Any]]] = None,
    ) -> str:
        backup_id = self._next_id()
        bundle = BackupBundle(
            backup_id=backup_id,
            edit_ref=edit_ref,
            nodes=[node_to_dict(n) for n in nodes],
            assets=list(assets or []),
        )
        target = self.root / backup_id
        target.mkdir()
        (target / "bundle.json").write_text(bundle.to_json())
        return backup_id

    def load(self, backup_id: str) -> BackupBundle:
        path = self.root / backup_id / "bundle.json"
        if not path.exists():
            raise UnknownBackup(backup_id)
        return BackupBundle.from_json(path.read_text())

    def restore(self, garden: Garden, backup_id: str) -> list[GardenNode]:
        """Reinstate backed-up nodes with original ids and order.

        Asset reinstatement is the orchestrator's job (it owns the registry);
        this returns the restored nodes for event emission.
        """
        bundle = self.load(backup_id)
        restored = [node_from_dict(raw) for raw in bundle.nodes]
        conflicts = [n.id for n in restored if n.id in garden.nodes]
        if conflicts:
            raise ConflictingIds(f"nodes already present: {conflicts}")
        for node in restored:
            garden.nodes[node.id] = node
            garden.next_id = max(garden.next_id, node.id + 1)
        return restored

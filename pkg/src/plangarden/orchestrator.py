"""The control loop: pops the frontier, dispatches to the planner or the
implementation submodules, applies user edits with cascade invalidation and
backups, and honors Step/Play/Paused modes.

Concurrency: a single re-entrant lock serializes work units and edits, so an
edit arriving mid-unit applies after the unit completes. Every mutation is
emitted to the event log before the call returns.
"""

from __future__ import annotations

import enum
import hashlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from . import codegen, planner
from .assets import (
    AssetFetcher,
    AssetIndex,
    AssetRecord,
    AssetRegistry,
    ImageToMeshAdapter,
    TextToImageAdapter,
    generate_mesh_chain,
    retrieve_nearest_asset,
)
from .codegen import (
    CodeBundle,
    PipelineAttempt,
    PriorAttempt,
    ProjectContext,
    Verdict,
)
from .engine import EngineAdapter
from .errors import (
    AdapterError,
    EmbeddingProviderError,
    EmptyIndex,
    FetchError,
    InvalidTarget,
    KindViolation,
    ParseFailure,
    PreconditionViolation,
    ProviderError,
    SnapshotMissing,
    UnknownNode,
    UnknownSubmodule,
)
from .garden import (
    Garden,
    Mode,
    NodeId,
    NodeKind,
    NodeStatus,
    WorkKind,
    add_child,
    add_seed,
    compute_frontier,
    descendants,
    ordered_leaves,
)
from .layout import layout_from_dict, layout_to_dict
from .persistence import (
    ACTOR_SYSTEM,
    ACTOR_USER,
    BackupStore,
    EventLog,
    config_to_dict,
    node_from_dict,
    node_to_dict,
)
from .planner import TaskSpec
from .providers import CompletionProvider, EmbeddingProvider

CODING_SUBMODULES = ("code_generator", "procedural_mesh")


class EditKind(str, enum.Enum):
    TOGGLE_LEAF = "ToggleLeaf"
    EDIT_NODE_TEXT = "EditNodeText"
    EDIT_FEEDBACK = "EditFeedback"
    SET_MODE = "SetMode"
    COMPILE_AND_RUN_AT = "CompileAndRunAt"


@dataclass
class UserEdit:
    kind: EditKind
    target: Optional[NodeId] = None
    new_value: Any = None

    def describe(self) -> str:
        return f"{self.kind.value}(target={self.target}, value={self.new_value!r})"


@dataclass
class InvalidationSet:
    removed: set[NodeId] = field(default_factory=set)
    reason: str = ""
    backup_ref: Optional[str] = None


@dataclass
class StepOutcome:
    idle: bool
    unit: Optional[str] = None
    node_id: Optional[NodeId] = None


def attempt_payloads(attempt: PipelineAttempt) -> tuple[dict, dict]:
    """Node payloads for one pipeline attempt: (CodeAttempt, Evaluation)."""
    code_payload = {
        "index": attempt.index,
        "files": dict(attempt.bundle.files),
        "summary": attempt.bundle.summary,
        "layout": layout_to_dict(attempt.layout) if attempt.layout else None,
        "stage_reached": attempt.stage_reached.value,
        "snapshot_hash": attempt.snapshot_hash,
        "verdict": attempt.verdict.value,
    }
    eval_payload = {
        "index": attempt.index,
        "verdict": attempt.verdict.value,
        "feedback": attempt.feedback,
        "source_stage": attempt.report.source_stage.value if attempt.report else None,
        "screenshots": list(attempt.screenshots),
    }
    return code_payload, eval_payload


class Orchestrator:
    def __init__(
        self,
        garden: Garden,
        provider: CompletionProvider,
        engine: EngineAdapter,
        workspace: Path,
        log: Optional[EventLog] = None,
        backups: Optional[BackupStore] = None,
        registry: Optional[AssetRegistry] = None,
        embedder: Optional[EmbeddingProvider] = None,
        asset_index: Optional[AssetIndex] = None,
        fetcher: Optional[AssetFetcher] = None,
        text_to_image: Optional[TextToImageAdapter] = None,
        image_to_mesh: Optional[ImageToMeshAdapter] = None,
        starter_catalog: tuple[str, ...] = (),
        disclaimer: Optional[str] = None,
    ) -> None:
        self.garden = garden
        self.provider = provider
        self.engine = engine
        self.workspace = Path(workspace)
        self.workspace.mkdir(parents=True, exist_ok=True)
        self.log = log if log is not None else EventLog()
        self.backups = backups if backups is not None else BackupStore(self.workspace / "backups")
        self.registry = registry if registry is not None else AssetRegistry(self.workspace)
        self.embedder = embedder
        self.asset_index = asset_index
        self.fetcher = fetcher
        self.text_to_image = text_to_image
        self.image_to_mesh = image_to_mesh
        self.starter_catalog = tuple(starter_catalog)
        self.disclaimer = disclaimer
        self.current_node_id: Optional[NodeId] = None
        self._lock = threading.RLock()
        if self.log.last_seq == 0:
            self._emit(ACTOR_SYSTEM, {
                "type": "garden_created",
                "config": config_to_dict(garden.config),
                "mode": garden.mode.value,
            })

    # --- event helpers -----------------------------------------------------

    def _emit(self, actor: str, payload: dict) -> None:
        self.log.record(actor, payload)

    def _emit_node_added(self, node_id: NodeId, actor: str = ACTOR_SYSTEM) -> None:
        self._emit(actor, {"type": "node_added",
                           "node": node_to_dict(self.garden.node(node_id))})

    def _emit_node_updated(self, node_id: NodeId, actor: str = ACTOR_SYSTEM) -> None:
        self._emit(actor, {"type": "node_updated",
                           "node": node_to_dict(self.garden.node(node_id))})

    # --- seeding and modes ---------------------------------------------------

    def seed(self, text: str) -> NodeId:
        with self._lock:
            node_id = add_seed(self.garden, text)
            self._emit_node_added(node_id, actor=ACTOR_USER)
            return node_id

    def set_mode(self, mode: Mode, actor: str = ACTOR_USER) -> None:
        with self._lock:
            if self.garden.mode is mode:
                return
            self.garden.mode = mode
            self._emit(actor, {"type": "mode_changed", "mode": mode.value})

    # --- the work loop ---------------------------------------------------------

    def step(self) -> StepOutcome:
        """Perform exactly one unit of work off the frontier."""
        with self._lock:
            if self.garden.mode not in (Mode.STEP, Mode.PLAY):
                raise PreconditionViolation(f"cannot step in mode {self.garden.mode.value}")
            frontier = compute_frontier(self.garden)
            if not frontier:
                return StepOutcome(idle=True)
            item = frontier[0]
            self.current_node_id = item.node_id
            try:
                if item.work is WorkKind.EXPAND:
                    self._expand_unit(item.node_id)
                elif item.work is WorkKind.GENERATE_TASK:
                    self._task_gen_unit(item.node_id)
                else:
                    self._execute_unit(item.node_id)
            finally:
                self.current_node_id = None
            return StepOutcome(idle=False, unit=item.work.value, node_id=item.node_id)

    def play(self, max_units: int = 10_000) -> int:
        """Loop step() until the frontier empties or the mode changes."""
        done = 0
        while done < max_units:
            with self._lock:
                if self.garden.mode is not Mode.PLAY:
                    break
                outcome = self.step()
            if outcome.idle:
                break
            done += 1
        return done

    # --- work units ----------------------------------------------------------------

    def _expand_unit(self, node_id: NodeId) -> None:
        node = self.garden.node(node_id)
        depth = self.garden.depth(node_id)
        try:
            children = planner.expand_plan_node(
                self.garden, self.provider, node_id, disclaimer=self.disclaimer
            )
        except (ParseFailure, UnknownSubmodule, ProviderError) as exc:
            node.status = NodeStatus.FAILED
            self._emit_node_updated(node_id)
            self._emit(ACTOR_SYSTEM, {
                "type": "work_unit", "unit": "expand", "node_id": node_id,
                "depth": depth, "error": str(exc),
            })
            return
        self._emit_node_updated(node_id)
        for text, marker in children:
            child_id = add_child(
                self.garden, node_id, NodeKind.PLAN_STEP, text,
                is_leaf=marker is not None,
                assigned_submodule=marker.submodule if marker else None,
            )
            self._emit_node_added(child_id)
        self._emit(ACTOR_SYSTEM, {
            "type": "work_unit", "unit": "expand", "node_id": node_id, "depth": depth,
        })

    def _task_gen_unit(self, leaf_id: NodeId) -> None:
        leaf = self.garden.node(leaf_id)
        try:
            if leaf.assigned_submodule is None:
                leaf.assigned_submodule = planner.assign_submodule(
                    self.provider, self.garden.config, leaf.text
                )
                self._emit_node_updated(leaf_id)
            spec = planner.generate_task(
                self.garden, self.provider, leaf_id, disclaimer=self.disclaimer
            )
        except (ParseFailure, UnknownSubmodule, ProviderError) as exc:
            leaf.status = NodeStatus.FAILED
            self._emit_node_updated(leaf_id)
            self._emit(ACTOR_SYSTEM, {
                "type": "work_unit", "unit": "generate_task", "node_id": leaf_id,
                "error": str(exc),
            })
            return
        task = self.garden.task_of_leaf(leaf_id)
        assert task is not None
        self._emit_node_added(task.id)
        leaf.status = NodeStatus.SUCCEEDED
        self._emit_node_updated(leaf_id)
        self._emit(ACTOR_SYSTEM, {
            "type": "work_unit", "unit": "generate_task", "node_id": leaf_id,
            "task_id": task.id, "submodule": spec.submodule,
        })

    def _project_context(self) -> ProjectContext:
        return ProjectContext(
            provider=self.provider,
            engine=self.engine,
            workspace=self.workspace,
            config=self.garden.config,
            registry=self.registry,
            starter_catalog=self.starter_catalog,
            disclaimer=self.disclaimer,
        )

    def _execute_unit(self, task_id: NodeId) -> None:
        task = self.garden.node(task_id)
        spec = TaskSpec.from_payload(task.payload or {})
        if task.status is NodeStatus.PENDING:
            task.status = NodeStatus.IN_PROGRESS
            self._emit_node_updated(task_id)
        if spec.submodule in CODING_SUBMODULES:
            self._code_attempt_unit(task_id, spec)
        else:
            self._asset_unit(task_id, spec)

    def _code_attempt_unit(self, task_id: NodeId, spec: TaskSpec) -> None:
        garden = self.garden
        task = garden.node(task_id)
        chain = garden.implementation_chain(task_id)
        attempts_done = sum(1 for n in chain if n.kind is NodeKind.CODE_ATTEMPT)
        max_attempts = garden.config.max_code_attempts
        if attempts_done >= max_attempts:
            task.status = NodeStatus.FAILED
            self._emit_node_updated(task_id)
            return

        prior: Optional[PriorAttempt] = None
        if chain:
            last_attempt = next(
                n for n in reversed(chain) if n.kind is NodeKind.CODE_ATTEMPT
            )
            payload = last_attempt.payload or {}
            tail = chain[-1]
            feedback = ""
            if tail.kind is NodeKind.EVALUATION and tail.payload:
                feedback = tail.payload.get("feedback", "")
            prior = PriorAttempt(
                bundle=CodeBundle(files=dict(payload.get("files", {})),
                                  summary=payload.get("summary")),
                layout=layout_from_dict(payload["layout"]) if payload.get("layout") else None,
                feedback=feedback,
            )

        index = attempts_done + 1
        attempt = codegen.run_single_attempt(
            spec,
            self._project_context(),
            index,
            prior=prior,
            procedural=spec.submodule == "procedural_mesh",
            task_tag=f"task{task_id}",
        )

        code_payload, eval_payload = attempt_payloads(attempt)
        passed = attempt.verdict is Verdict.PASS
        tail_id = chain[-1].id if chain else task_id
        attempt_id = add_child(
            garden, tail_id, NodeKind.CODE_ATTEMPT,
            text=f"Attempt {index}: reached {attempt.stage_reached.value}",
            payload=code_payload,
        )
        garden.node(attempt_id).status = (
            NodeStatus.SUCCEEDED if passed else NodeStatus.FAILED
        )
        self._emit_node_added(attempt_id)
        eval_text = attempt.feedback.splitlines()[0][:100] if attempt.feedback else "Pass"
        eval_id = add_child(
            garden, attempt_id, NodeKind.EVALUATION, text=eval_text, payload=eval_payload
        )
        garden.node(eval_id).status = (
            NodeStatus.SUCCEEDED if passed else NodeStatus.FAILED
        )
        self._emit_node_added(eval_id)

        if passed:
            task.status = NodeStatus.SUCCEEDED
            self._emit_node_updated(task_id)
        elif index >= max_attempts:
            task.status = NodeStatus.FAILED
            self._emit_node_updated(task_id)
        self._emit(ACTOR_SYSTEM, {
            "type": "work_unit", "unit": "code_attempt", "node_id": task_id,
            "task_id": task_id, "attempt_index": index, "verdict": attempt.verdict.value,
        })

    def _asset_unit(self, task_id: NodeId, spec: TaskSpec) -> None:
        garden = self.garden
        task = garden.node(task_id)
        description = spec.prompt_parts.get("description", task.text)
        artifact_id = add_child(
            garden, task_id, NodeKind.ASSET_ARTIFACT, text=description
        )
        self._emit_node_added(artifact_id)
        try:
            if spec.submodule == "mesh_downloader":
                if self.embedder is None or self.asset_index is None or self.fetcher is None:
                    raise FetchError("mesh_downloader is not configured")
                record = retrieve_nearest_asset(
                    description, self.asset_index, self.embedder, self.fetcher,
                    self.registry, created_by=artifact_id, engine=self.engine,
                )
            elif spec.submodule == "mesh_generator":
                if self.text_to_image is None or self.image_to_mesh is None:
                    raise AdapterError("text_to_image", "mesh_generator is not configured")
                record = generate_mesh_chain(
                    description, self.text_to_image, self.image_to_mesh,
                    self.registry, asset_id=f"gen-{artifact_id}",
                    created_by=artifact_id, engine=self.engine,
                )
            else:
                raise UnknownSubmodule(spec.submodule)
        except (EmptyIndex, EmbeddingProviderError, FetchError, AdapterError,
                UnknownSubmodule, ProviderError) as exc:
            artifact = garden.node(artifact_id)
            artifact.status = NodeStatus.FAILED
            artifact.payload = {"error": str(exc)}
            self._emit_node_updated(artifact_id)
            task.status = NodeStatus.FAILED
            self._emit_node_updated(task_id)
            self._emit(ACTOR_SYSTEM, {
                "type": "work_unit", "unit": "asset_task", "node_id": task_id,
                "task_id": task_id, "error": str(exc),
            })
            return

        artifact = garden.node(artifact_id)
        artifact.status = NodeStatus.SUCCEEDED
        artifact.payload = record.to_payload()
        self._emit_node_updated(artifact_id)
        self._emit(ACTOR_SYSTEM, {
            "type": "asset_registered", "record": record.to_payload(),
            "created_by": artifact_id,
        })
        self._emit(ACTOR_SYSTEM, {
            "type": "mesh_imported", "task_id": task_id, "node_id": artifact_id,
            "path": record.mesh_path,
        })
        task.status = NodeStatus.SUCCEEDED
        self._emit_node_updated(task_id)
        self._emit(ACTOR_SYSTEM, {
            "type": "work_unit", "unit": "asset_task", "node_id": task_id,
            "task_id": task_id, "verdict": Verdict.PASS.value,
        })

    # --- user edits -------------------------------------------------------------------

    def apply_edit(self, edit: UserEdit) -> InvalidationSet:
        with self._lock:
            if edit.kind is EditKind.SET_MODE:
                self.set_mode(Mode(edit.new_value))
                return InvalidationSet(reason=edit.describe())
            if edit.kind is EditKind.COMPILE_AND_RUN_AT:
                self.compile_and_run_at(edit.target)
                return InvalidationSet(reason=edit.describe())

            if edit.target is None or not self.garden.has_node(edit.target):
                raise InvalidTarget(f"no node {edit.target}")
            if edit.kind is EditKind.EDIT_NODE_TEXT:
                return self._edit_text(edit)
            if edit.kind is EditKind.TOGGLE_LEAF:
                return self._toggle_leaf(edit)
            if edit.kind is EditKind.EDIT_FEEDBACK:
                return self._edit_feedback(edit)
            raise InvalidTarget(f"unsupported edit kind {edit.kind}")

    def _edit_text(self, edit: UserEdit) -> InvalidationSet:
        # text edits never cascade; re-expansion requires an explicit toggle
        node = self.garden.node(edit.target)
        node.text = str(edit.new_value)
        self._emit_node_updated(node.id, actor=ACTOR_USER)
        return InvalidationSet(reason=edit.describe())

    def _later_task_ids(self, pivot_path: tuple, exclude: set[NodeId]) -> list[NodeId]:
        """Tasks whose leaves come after the pivot in DFS order.

        Taint is unconditional: artifacts flow forward, so everything later
        re-runs even when provably independent.
        """
        out = []
        for leaf_id in ordered_leaves(self.garden):
            if leaf_id in exclude:
                continue
            if self.garden.path_key(leaf_id) > pivot_path:
                task = self.garden.task_of_leaf(leaf_id)
                if task is not None:
                    out.append(task.id)
        return out

    def _invalidate(
        self,
        edit: UserEdit,
        removed_ids: list[NodeId],
        mutate: dict[NodeId, dict[str, Any]],
        reset_tasks: list[NodeId],
    ) -> InvalidationSet:
        """Shared cascade machinery: backup, delete, mutate, retract assets."""
        garden = self.garden
        removed_set = set(removed_ids)
        pre_mutation_nodes = [
            node_to_dict(garden.node(nid))
            for nid in list(mutate) + [t for t in reset_tasks if t not in mutate]
        ]
        retracted = self.registry.retract_created_by(removed_set)
        backup_id = self.backups.create(
            [garden.node(nid) for nid in sorted(removed_set)],
            edit_ref=edit.describe(),
            assets=[
                {"record": record.to_payload(), "created_by": creator}
                for record, creator in retracted
            ],
        )
        # pre-edit snapshots of surviving nodes travel next to the bundle so a
        # restore can undo the edit itself, not just the deletions
        mutated_path = self.backups.root / backup_id / "mutated.json"
        mutated_path.write_text(
            json.dumps(pre_mutation_nodes, sort_keys=True, indent=2) + "\n"
        )

        self._emit(ACTOR_USER, {
            "type": "backup_created", "backup_id": backup_id,
            "removed": sorted(removed_set), "edit": edit.describe(),
        })
        for record, _creator in retracted:
            self._emit(ACTOR_SYSTEM, {
                "type": "asset_retracted", "record": record.to_payload(),
            })
        for nid in sorted(removed_set):
            del garden.nodes[nid]
            self._emit(ACTOR_USER, {"type": "node_deleted", "id": nid})
        for nid, changes in mutate.items():
            node = garden.node(nid)
            for attr, value in changes.items():
                setattr(node, attr, value)
            self._emit_node_updated(nid, actor=ACTOR_USER)
        for tid in reset_tasks:
            task = garden.node(tid)
            if task.status is not NodeStatus.PENDING:
                task.status = NodeStatus.PENDING
                self._emit_node_updated(tid, actor=ACTOR_USER)
        return InvalidationSet(
            removed=removed_set, reason=edit.describe(), backup_ref=backup_id
        )

    def _toggle_leaf(self, edit: UserEdit) -> InvalidationSet:
        garden = self.garden
        node = garden.node(edit.target)
        if node.kind is not NodeKind.PLAN_STEP:
            raise KindViolation("is-leaf applies to PlanStep nodes only")
        value = bool(edit.new_value)
        if node.is_leaf == value:
            return InvalidationSet(reason=edit.describe())
        if not value and garden.depth(node.id) >= garden.config.max_depth:
            raise InvalidTarget(
                f"node {node.id} sits on the depth bound; expanding it would "
                f"exceed max_depth {garden.config.max_depth}"
            )

        subtree = descendants(garden, node.id)
        pivot = garden.path_key(node.id)
        later_tasks = self._later_task_ids(pivot, exclude=set(subtree) | {node.id})
        removed = list(subtree)
        for tid in later_tasks:
            removed.extend(descendants(garden, tid))
        mutate = {
            node.id: {
                "is_leaf": value,
                "assigned_submodule": None,
                "status": NodeStatus.PENDING,
            }
        }
        return self._invalidate(edit, removed, mutate, later_tasks)

    def _edit_feedback(self, edit: UserEdit) -> InvalidationSet:
        garden = self.garden
        node = garden.node(edit.target)
        if node.kind is not NodeKind.EVALUATION:
            raise KindViolation("feedback edits apply to Evaluation nodes only")
        task = garden.owning_task(node.id)
        assert task is not None
        leaf = garden.node(task.parent)
        pivot = garden.path_key(leaf.id)
        later_tasks = self._later_task_ids(pivot, exclude=set())
        removed = list(descendants(garden, node.id))
        for tid in later_tasks:
            removed.extend(descendants(garden, tid))

        new_payload = dict(node.payload or {})
        new_payload["feedback"] = str(edit.new_value)
        # user refinement always re-enters the loop, so the verdict turns Fail
        new_payload["verdict"] = Verdict.FAIL.value
        first_line = str(edit.new_value).splitlines()[0][:100] if edit.new_value else node.text
        mutate: dict[NodeId, dict[str, Any]] = {
            node.id: {
                "payload": new_payload,
                "status": NodeStatus.FAILED,
                "text": first_line,
            },
            task.id: {"status": NodeStatus.IN_PROGRESS},
        }
        return self._invalidate(edit, removed, mutate, later_tasks)

    # --- restore ------------------------------------------------------------------------

    def restore(self, backup_id: str) -> list[NodeId]:
        with self._lock:
            restored = self.backups.restore(self.garden, backup_id)
            for node in restored:
                self._emit(ACTOR_USER, {"type": "node_restored",
                                        "node": node_to_dict(node)})
            mutated_path = self.backups.root / backup_id / "mutated.json"
            if mutated_path.exists():
                for raw in json.loads(mutated_path.read_text()):
                    snapshot = node_from_dict(raw)
                    self.garden.nodes[snapshot.id] = snapshot
                    self._emit(ACTOR_USER, {"type": "node_restored",
                                            "node": node_to_dict(snapshot)})
            bundle = self.backups.load(backup_id)
            for item in bundle.assets:
                record = AssetRecord.from_payload(item["record"])
                self.registry.reinstate(record, item.get("created_by"))
                self._emit(ACTOR_SYSTEM, {
                    "type": "asset_registered", "record": item["record"],
                    "created_by": item.get("created_by"),
                })
            self._emit(ACTOR_USER, {"type": "backup_restored", "backup_id": backup_id})
            return [n.id for n in restored]

    # --- compile-and-run ------------------------------------------------------------------

    def compile_and_run_at(self, node_id: Optional[NodeId]) -> str:
        with self._lock:
            if node_id is None or not self.garden.has_node(node_id):
                raise UnknownNode(f"no node {node_id}")
            node = self.garden.node(node_id)
            if node.kind is NodeKind.EVALUATION:
                node = self.garden.node(node.parent)
            if node.kind is not NodeKind.CODE_ATTEMPT:
                raise SnapshotMissing(f"node {node_id} carries no attempt snapshot")
            payload = node.payload or {}
            files = payload.get("files") or {}
            layout_doc = payload.get("layout")
            stage = payload.get("stage_reached")
            if not files or layout_doc is None or stage in (None, "Generated"):
                raise SnapshotMissing(
                    f"attempt node {node.id} never compiled with a layout"
                )
            bundle = CodeBundle(files=dict(files), summary=payload.get("summary"))
            layout = layout_from_dict(layout_doc)

            session_dir = self.workspace / "user_session" / f"node{node.id}"
            for rel, content in bundle.files.items():
                target = session_dir / rel
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_text(content)
            materialized = _hash_tree(session_dir)
            if payload.get("snapshot_hash") and materialized != payload["snapshot_hash"]:
                raise SnapshotMissing(
                    f"materialized files diverge from the stored snapshot of node {node.id}"
                )
            handle = self.engine.launch_user_session(bundle, layout)
            self._emit(ACTOR_USER, {
                "type": "session_launched", "node_id": node.id, "handle": handle,
            })
            return handle


def _hash_tree(root: Path) -> str:
    """Content hash of a materialized file tree, path-sorted to match
    CodeBundle.content_hash."""
    rels = sorted(
        str(p.relative_to(root)).replace("\\", "/")
        for p in root.rglob("*")
        if p.is_file()
    )
    digest = hashlib.sha256()
    for rel in rels:
        digest.update(rel.encode("utf-8"))
        digest.update(b"\x00")
        digest.update((root / rel).read_bytes())
        digest.update(b"\x00")
    return digest.hexdigest()

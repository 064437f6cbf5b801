"""Garden graph data model: nodes, statuses, ordering, and frontier computation.

The garden is a single tree rooted at the Seed node. Plan structure lives in
the Seed/PlanStep subgraph; each leaf PlanStep may own one Task node, and each
Task owns a linear chain of implementation nodes (CodeAttempt, Evaluation,
AssetArtifact) parented one after the other in creation order.

This module performs no I/O and makes no model calls. All mutations must be
externally serialized (the orchestrator owns the single writer).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterator, Optional

from .errors import (
    EmptyText,
    KindViolation,
    LeafViolation,
    SeedAlreadyExists,
    UnknownNode,
    UnknownParent,
)

NodeId = int


class NodeKind(str, enum.Enum):
    SEED = "Seed"
    PLAN_STEP = "PlanStep"
    TASK = "Task"
    CODE_ATTEMPT = "CodeAttempt"
    EVALUATION = "Evaluation"
    ASSET_ARTIFACT = "AssetArtifact"


class NodeStatus(str, enum.Enum):
    PENDING = "Pending"
    IN_PROGRESS = "InProgress"
    SUCCEEDED = "Succeeded"
    FAILED = "Failed"
    PRUNED = "Pruned"


class Mode(str, enum.Enum):
    PAUSED = "Paused"
    STEP = "Step"
    PLAY = "Play"


PLAN_KINDS = frozenset({NodeKind.SEED, NodeKind.PLAN_STEP})
IMPLEMENTATION_KINDS = frozenset(
    {NodeKind.CODE_ATTEMPT, NodeKind.EVALUATION, NodeKind.ASSET_ARTIFACT}
)


@dataclass(frozen=True)
class SubmoduleDescriptor:
    """One entry of the configured submodule roster."""

    name: str
    description: str


@dataclass
class GardenConfig:
    """Bounds and roster applied to every garden grown with this config."""

    max_depth: int = 3
    max_branching: int = 4
    max_code_attempts: int = 3
    submodule_roster: tuple[SubmoduleDescriptor, ...] = ()

    def __post_init__(self) -> None:
        if self.max_depth < 1 or self.max_branching < 1 or self.max_code_attempts < 1:
            raise ValueError("all config bounds must be >= 1")
        if not self.submodule_roster:
            raise ValueError("submodule_roster must be non-empty")
        self.submodule_roster = tuple(self.submodule_roster)

    def roster_names(self) -> list[str]:
        return [entry.name for entry in self.submodule_roster]

    def find_submodule(self, name: str) -> Optional[SubmoduleDescriptor]:
        """Case-insensitive roster lookup; returns the canonical entry."""
        wanted = name.strip().lower()
        for entry in self.submodule_roster:
            if entry.name.lower() == wanted:
                return entry
        return None


@dataclass
class GardenNode:
    id: NodeId
    kind: NodeKind
    parent: Optional[NodeId]
    child_order: int
    text: str
    is_leaf: bool = False
    assigned_submodule: Optional[str] = None
    status: NodeStatus = NodeStatus.PENDING
    payload: Optional[dict[str, Any]] = None


@dataclass
class Garden:
    config: GardenConfig
    mode: Mode = Mode.PAUSED
    nodes: dict[NodeId, GardenNode] = field(default_factory=dict)
    next_id: NodeId = 1

    # -- lookups -----------------------------------------------------------

    def node(self, node_id: NodeId) -> GardenNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"no node with id {node_id}") from None

    def has_node(self, node_id: NodeId) -> bool:
        return node_id in self.nodes

    def seed_node(self) -> Optional[GardenNode]:
        for node in self.nodes.values():
            if node.kind is NodeKind.SEED:
                return node
        return None

    def children_of(self, node_id: NodeId) -> list[GardenNode]:
        """Direct children sorted by child_order (ties broken by id)."""
        kids = [n for n in self.nodes.values() if n.parent == node_id]
        kids.sort(key=lambda n: (n.child_order, n.id))
        return kids

    def depth(self, node_id: NodeId) -> int:
        """Seed is depth 0; every edge adds one."""
        node = self.node(node_id)
        depth = 0
        while node.parent is not None:
            node = self.node(node.parent)
            depth += 1
        return depth

    def path_key(self, node_id: NodeId) -> tuple[int, ...]:
        """child_order path from the root; lexicographic order = DFS order."""
        node = self.node(node_id)
        path: list[int] = []
        while node.parent is not None:
            path.append(node.child_order)
            node = self.node(node.parent)
        return tuple(reversed(path))

    def task_of_leaf(self, leaf_id: NodeId) -> Optional[GardenNode]:
        for child in self.children_of(leaf_id):
            if child.kind is NodeKind.TASK:
                return child
        return None

    def implementation_chain(self, task_id: NodeId) -> list[GardenNode]:
        """Implementation nodes under a Task in chain (creation) order."""
        task = self.node(task_id)
        if task.kind is not NodeKind.TASK:
            raise KindViolation(f"node {task_id} is {task.kind.value}, not Task")
        chain: list[GardenNode] = []
        cursor: Optional[GardenNode] = task
        while cursor is not None:
            nxt = None
            for child in self.children_of(cursor.id):
                if child.kind in IMPLEMENTATION_KINDS:
                    nxt = child
                    break
            if nxt is not None:
                chain.append(nxt)
            cursor = nxt
        return chain

    def owning_task(self, node_id: NodeId) -> Optional[GardenNode]:
        """Walk up from an implementation node to its Task."""
        node = self.node(node_id)
        while node.parent is not None:
            node = self.node(node.parent)
            if node.kind is NodeKind.TASK:
                return node
        return None

    def _allocate_id(self) -> NodeId:
        allocated = self.next_id
        self.next_id += 1
        return allocated


# -- structural operations ---------------------------------------------------

def add_seed(garden: Garden, text: str) -> NodeId:
    """Create the root Seed node from the user's open-ended prompt."""
    if garden.seed_node() is not None:
        raise SeedAlreadyExists("garden already has a seed node")
    if not text.strip():
        raise EmptyText("seed text must be non-empty")
    node_id = garden._allocate_id()
    garden.nodes[node_id] = GardenNode(
        id=node_id,
        kind=NodeKind.SEED,
        parent=None,
        child_order=0,
        text=text,
    )
    return node_id


_ALLOWED_PARENTS: dict[NodeKind, frozenset[NodeKind]] = {
    NodeKind.PLAN_STEP: frozenset({NodeKind.SEED, NodeKind.PLAN_STEP}),
    NodeKind.TASK: frozenset({NodeKind.PLAN_STEP}),
    NodeKind.CODE_ATTEMPT: frozenset({NodeKind.TASK, NodeKind.EVALUATION}),
    NodeKind.EVALUATION: frozenset({NodeKind.CODE_ATTEMPT}),
    NodeKind.ASSET_ARTIFACT: frozenset({NodeKind.TASK}),
}


def add_child(
    garden: Garden,
    parent: NodeId,
    kind: NodeKind,
    text: str,
    is_leaf: bool = False,
    assigned_submodule: Optional[str] = None,
    payload: Optional[dict[str, Any]] = None,
) -> NodeId:
    """Append a node under `parent`, enforcing kind compatibility.

    child_order is the parent's current child count, so sibling order is the
    order of insertion and survives serialization round trips.
    """
    if parent not in garden.nodes:
        raise UnknownParent(f"no node with id {parent}")
    parent_node = garden.nodes[parent]

    if kind is NodeKind.SEED:
        raise KindViolation("a garden has exactly one Seed and it has no parent")
    allowed = _ALLOWED_PARENTS[kind]
    if parent_node.kind not in allowed:
        raise KindViolation(
            f"{kind.value} cannot attach under {parent_node.kind.value}"
        )
    if kind is NodeKind.PLAN_STEP and parent_node.kind is NodeKind.PLAN_STEP and parent_node.is_leaf:
        raise LeafViolation(f"node {parent} is a leaf; plan children are forbidden")
    if kind is NodeKind.TASK:
        if not parent_node.is_leaf:
            raise KindViolation("Task nodes attach only under leaf PlanSteps")
        if garden.task_of_leaf(parent) is not None:
            raise KindViolation(f"leaf {parent} already has a task node")
    if kind in IMPLEMENTATION_KINDS:
        for sibling in garden.children_of(parent):
            if sibling.kind in IMPLEMENTATION_KINDS:
                raise KindViolation(
                    f"node {parent} already continues the implementation chain"
                )
    if is_leaf and kind is not NodeKind.PLAN_STEP:
        raise KindViolation("is_leaf is meaningful only for PlanStep nodes")
    if assigned_submodule is not None and not is_leaf:
        raise KindViolation("assigned_submodule requires is_leaf=true")

    node_id = garden._allocate_id()
    garden.nodes[node_id] = GardenNode(
        id=node_id,
        kind=kind,
        parent=parent,
        child_order=len(garden.children_of(parent)),
        text=text,
        is_leaf=is_leaf,
        assigned_submodule=assigned_submodule,
        payload=payload,
    )
    return node_id


def descendants(garden: Garden, node_id: NodeId) -> list[NodeId]:
    """All transitive children of node_id in deterministic pre-order.

    Excludes node_id itself.
    """
    garden.node(node_id)
    out: list[NodeId] = []
    stack = [c.id for c in reversed(garden.children_of(node_id))]
    while stack:
        current = stack.pop()
        out.append(current)
        stack.extend(c.id for c in reversed(garden.children_of(current)))
    return out


def _iter_plan_dfs(garden: Garden) -> Iterator[GardenNode]:
    seed = garden.seed_node()
    if seed is None:
        return
    stack = [seed]
    while stack:
        node = stack.pop()
        yield node
        plan_children = [
            c for c in garden.children_of(node.id) if c.kind is NodeKind.PLAN_STEP
        ]
        stack.extend(reversed(plan_children))


def ordered_leaves(garden: Garden) -> list[NodeId]:
    """Leaf PlanSteps in depth-first order respecting child_order.

    This order defines the global task execution order.
    """
    return [
        n.id
        for n in _iter_plan_dfs(garden)
        if n.kind is NodeKind.PLAN_STEP and n.is_leaf
    ]


class WorkKind(str, enum.Enum):
    EXPAND = "expand"
    GENERATE_TASK = "generate_task"
    EXECUTE_TASK = "execute_task"


@dataclass(frozen=True)
class FrontierItem:
    work: WorkKind
    node_id: NodeId


def compute_frontier(garden: Garden) -> list[FrontierItem]:
    """Nodes awaiting work, highest priority first.

    Three phases, strictly ordered garden-wide:
      1. expansion: Pending Seed/PlanStep nodes with no children and
         is_leaf false, breadth-first (depth, then position);
      2. task generation: leaf PlanSteps without a Task node, in
         ordered_leaves order;
      3. implementation: Task nodes still Pending or InProgress, in
         ordered_leaves order of their parent leaves.

    Pure function of garden state; failed nodes drop out of every phase.
    """
    items: list[FrontierItem] = []

    expandable = [
        n
        for n in garden.nodes.values()
        if n.kind in PLAN_KINDS
        and n.status is NodeStatus.PENDING
        and not n.is_leaf
        and not garden.children_of(n.id)
    ]
    expandable.sort(key=lambda n: (garden.depth(n.id), garden.path_key(n.id)))
    items.extend(FrontierItem(WorkKind.EXPAND, n.id) for n in expandable)

    leaf_order = ordered_leaves(garden)
    for leaf_id in leaf_order:
        leaf = garden.nodes[leaf_id]
        if leaf.status in (NodeStatus.FAILED, NodeStatus.PRUNED):
            continue
        if garden.task_of_leaf(leaf_id) is None:
            items.append(FrontierItem(WorkKind.GENERATE_TASK, leaf_id))

    for leaf_id in leaf_order:
        task = garden.task_of_leaf(leaf_id)
        if task is not None and task.status in (
            NodeStatus.PENDING,
            NodeStatus.IN_PROGRESS,
        ):
            items.append(FrontierItem(WorkKind.EXECUTE_TASK, task.id))

    return items


def check_tree(garden: Garden) -> None:
    """Validate the structural invariants; raises on the first violation.

    Intended for tests and load-time validation, not hot paths.
    """
    seeds = [n for n in garden.nodes.values() if n.kind is NodeKind.SEED]
    if garden.nodes and len(seeds) != 1:
        raise KindViolation(f"expected exactly one Seed, found {len(seeds)}")
    for node in garden.nodes.values():
        if node.kind is NodeKind.SEED:
            if node.parent is not None:
                raise KindViolation("Seed must not have a parent")
            continue
        if node.parent is None:
            raise KindViolation(f"non-Seed node {node.id} has no parent")
        if node.parent not in garden.nodes:
            raise UnknownParent(f"node {node.id} references missing parent {node.parent}")
        if node.assigned_submodule is not None and not node.is_leaf:
            raise KindViolation(f"node {node.id} has a submodule but is not a leaf")
    # reachability doubles as the cycle check: every node must hang off the seed
    if seeds:
        reachable = {seeds[0].id, *descendants(garden, seeds[0].id)}
        if reachable != set(garden.nodes):
            raise KindViolation("unreachable nodes present (cycle or orphan)")

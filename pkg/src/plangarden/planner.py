"""Planning: broad plan from the seed, recursive sub-planning with leaf
flagging, and translation of leaves into submodule task specs.

Bounds are enforced mechanically here, never trusted to the model: child
lists are truncated to max_branching and children landing on the depth bound
are force-flagged as leaves, with a follow-up roster query when the model
did not assign a submodule itself.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import prompts
from .errors import ParseFailure, PreconditionViolation, UnknownSubmodule
from .garden import (
    Garden,
    GardenConfig,
    NodeId,
    NodeKind,
    NodeStatus,
    add_child,
    ordered_leaves,
)
from .providers import (
    CompletionProvider,
    CompletionRequest,
    GENERATION_TEMPERATURE,
)

TRUNCATION_NOTE = "[branching limit: dropped {n} steps]"

_STEP_RE = re.compile(r"^\s*\d+\s*[.):]\s+(.*\S)\s*$")
_OUTLINE_RE = re.compile(r"^\s*OUTLINE:\s*(.*\S)\s*$", re.IGNORECASE)
_MARKER_RE = re.compile(r"\[\s*LEAF\s*:\s*([^\]]+?)\s*\]\s*$", re.IGNORECASE)


@dataclass
class PlanParse:
    reformulation: str
    steps: list[str]
    dropped: int = 0


@dataclass(frozen=True)
class LeafMarker:
    submodule: str


@dataclass
class TaskSpec:
    leaf_id: NodeId
    submodule: str
    prompt_parts: dict[str, str]
    order_index: int

    def to_payload(self) -> dict:
        return {
            "leaf_id": self.leaf_id,
            "submodule": self.submodule,
            "prompt_parts": dict(self.prompt_parts),
            "order_index": self.order_index,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "TaskSpec":
        return cls(
            leaf_id=payload["leaf_id"],
            submodule=payload["submodule"],
            prompt_parts=dict(payload["prompt_parts"]),
            order_index=payload["order_index"],
        )


# --- response parsing -------------------------------------------------------

def parse_numbered_steps(text: str) -> list[str]:
    return [m.group(1) for line in text.splitlines() if (m := _STEP_RE.match(line))]


def parse_plan_response(text: str) -> PlanParse:
    """Parse OUTLINE + numbered steps; the outline line is optional."""
    reformulation = ""
    for line in text.splitlines():
        if (m := _OUTLINE_RE.match(line)):
            reformulation = m.group(1)
            break
    steps = parse_numbered_steps(text)
    if not steps:
        raise ParseFailure("no numbered step list in response")
    return PlanParse(reformulation=reformulation, steps=steps)


def parse_leaf_marker(step_text: str, config: GardenConfig) -> Optional[LeafMarker]:
    """Recognize a `[LEAF: <name>]` tail marker; unknown names are errors."""
    m = _MARKER_RE.search(step_text)
    if m is None:
        return None
    entry = config.find_submodule(m.group(1))
    if entry is None:
        raise UnknownSubmodule(f"no submodule named '{m.group(1).strip()}' in roster")
    return LeafMarker(submodule=entry.name)


def split_leaf_marker(step_text: str, config: GardenConfig) -> tuple[str, Optional[LeafMarker]]:
    marker = parse_leaf_marker(step_text, config)
    if marker is None:
        return step_text.strip(), None
    return _MARKER_RE.sub("", step_text).strip(), marker


def render_leaf_marker(text: str, submodule: str) -> str:
    return f"{text} [LEAF: {submodule}]"


# --- provider plumbing ------------------------------------------------------

REPROMPT_SUFFIX = (
    "Your previous reply could not be parsed. Answer again, following the "
    "response format exactly."
)


def _query(
    provider: CompletionProvider,
    role: str,
    system_prompt: str,
    user_text: str,
    parse: Callable[[str], object],
):
    """One provider call with a single reprompt on parse failure."""
    messages = [("user", user_text)]
    for attempt in range(2):
        response = provider.complete(
            CompletionRequest(
                system_prompt=system_prompt,
                messages=list(messages),
                temperature=GENERATION_TEMPERATURE,
                role=role,
            )
        )
        try:
            return parse(response.text)
        except ParseFailure:
            if attempt == 1:
                raise
            messages.append(("assistant", response.text))
            messages.append(("user", REPROMPT_SUFFIX))
    raise AssertionError("unreachable")


# --- operations -------------------------------------------------------------

def make_broad_plan(
    provider: CompletionProvider,
    config: GardenConfig,
    seed_text: str,
    disclaimer: Optional[str] = None,
) -> PlanParse:
    """Reformulate the seed and produce the top-level plan steps."""
    if not seed_text.strip():
        raise PreconditionViolation("seed text must be non-empty")
    system = prompts.BROAD_PLANNER_SYSTEM.format(
        roster=prompts.roster_block(config.submodule_roster),
        max_branching=config.max_branching,
        max_depth=config.max_depth,
        disclaimer=prompts.format_disclaimer(disclaimer),
    )
    parsed: PlanParse = _query(
        provider, prompts.ROLE_BROAD_PLANNER, system, seed_text, parse_plan_response
    )
    if len(parsed.steps) > config.max_branching:
        parsed.dropped = len(parsed.steps) - config.max_branching
        parsed.steps = parsed.steps[: config.max_branching]
    return parsed


def render_plan_tree(
    garden: Garden,
    target_id: Optional[NodeId] = None,
    char_budget: int = 8000,
) -> str:
    """Indented one-line-per-node outline of the plan tree.

    When the full rendering exceeds char_budget, fully-expanded subtrees not
    containing the target are collapsed to their root line.
    """
    seed = garden.seed_node()
    if seed is None:
        return "(empty)"

    target_path: set[NodeId] = set()
    if target_id is not None and garden.has_node(target_id):
        cursor: Optional[NodeId] = target_id
        while cursor is not None:
            target_path.add(cursor)
            cursor = garden.node(cursor).parent

    def plan_children(nid: NodeId):
        return [c for c in garden.children_of(nid) if c.kind is NodeKind.PLAN_STEP]

    def fully_expanded(nid: NodeId) -> bool:
        node = garden.node(nid)
        if node.kind is NodeKind.PLAN_STEP and node.is_leaf:
            return True
        kids = plan_children(nid)
        return bool(kids) and all(fully_expanded(c.id) for c in kids)

    def line_for(node) -> str:
        text = node.text.splitlines()[0] if node.text else ""
        if node.is_leaf and node.assigned_submodule:
            text = render_leaf_marker(text, node.assigned_submodule)
        return text

    def render(collapse: bool) -> str:
        lines: list[str] = []
        stack: list[tuple[NodeId, int]] = [(seed.id, 0)]
        while stack:
            nid, indent = stack.pop()
            node = garden.node(nid)
            prefix = "  " * indent
            kids = plan_children(nid)
            if (
                collapse
                and kids
                and nid not in target_path
                and fully_expanded(nid)
            ):
                lines.append(f"{prefix}- {line_for(node)} (+{len(kids)} sub-steps)")
                continue
            lines.append(f"{prefix}- {line_for(node)}")
            for child in reversed(kids):
                stack.append((child.id, indent + 1))
        return "\n".join(lines)

    full = render(collapse=False)
    if len(full) <= char_budget:
        return full
    return render(collapse=True)


def assign_submodule(
    provider: CompletionProvider,
    config: GardenConfig,
    step_text: str,
) -> str:
    """Follow-up roster query for a forced leaf the model left unassigned."""
    names = config.roster_names()

    def parse(text: str) -> str:
        lowered = text.lower()
        hits = [(lowered.find(n.lower()), n) for n in names if n.lower() in lowered]
        if not hits:
            raise ParseFailure("response names no roster submodule")
        return min(hits)[1]

    system = prompts.ROSTER_ASSIGNMENT_SYSTEM.format(
        roster=prompts.roster_block(config.submodule_roster)
    )
    return _query(
        provider,
        prompts.ROLE_ROSTER_ASSIGNMENT,
        system,
        prompts.ROSTER_ASSIGNMENT_USER.format(step=step_text),
        parse,
    )


def expand_plan_node(
    garden: Garden,
    provider: CompletionProvider,
    node_id: NodeId,
    disclaimer: Optional[str] = None,
) -> list[tuple[str, Optional[LeafMarker]]]:
    """Expand one Pending node into child steps (returned, not attached).

    The seed expands through the broad planner; PlanSteps through the
    sub-planner, which sees the whole rendered tree. Children that would land
    on the depth bound come back force-flagged as leaves. Marks the node
    Succeeded and appends a truncation note to its text when the model
    over-produced.
    """
    node = garden.node(node_id)
    if node.kind not in (NodeKind.SEED, NodeKind.PLAN_STEP):
        raise PreconditionViolation(f"cannot expand a {node.kind.value} node")
    if node.is_leaf:
        raise PreconditionViolation("cannot expand a leaf")
    if garden.children_of(node_id):
        raise PreconditionViolation(f"node {node_id} already has children")
    if node.status is not NodeStatus.PENDING:
        raise PreconditionViolation(f"node {node_id} is {node.status.value}")

    child_depth = garden.depth(node_id) + 1
    if child_depth > garden.config.max_depth:
        raise PreconditionViolation(
            f"children would exceed max_depth {garden.config.max_depth}"
        )

    if node.kind is NodeKind.SEED:
        parsed = make_broad_plan(provider, garden.config, node.text, disclaimer)
        node.payload = dict(node.payload or {}, reformulation=parsed.reformulation)
        dropped = parsed.dropped
        raw_steps = parsed.steps
    else:
        system = prompts.SUB_PLANNER_SYSTEM.format(
            roster=prompts.roster_block(garden.config.submodule_roster),
            max_branching=garden.config.max_branching,
            max_depth=garden.config.max_depth,
            disclaimer=prompts.format_disclaimer(disclaimer),
        )
        user = prompts.SUB_PLANNER_USER.format(
            tree=render_plan_tree(garden, target_id=node_id),
            target=node.text.splitlines()[0] if node.text else "",
        )
        parsed = _query(
            provider, prompts.ROLE_SUB_PLANNER, system, user,
            lambda text: parse_plan_response(text),
        )
        raw_steps = parsed.steps
        dropped = 0
        if len(raw_steps) > garden.config.max_branching:
            dropped = len(raw_steps) - garden.config.max_branching
            raw_steps = raw_steps[: garden.config.max_branching]

    force_leaves = child_depth >= garden.config.max_depth
    children: list[tuple[str, Optional[LeafMarker]]] = []
    for step in raw_steps:
        text, marker = split_leaf_marker(step, garden.config)
        if marker is None and force_leaves:
            marker = LeafMarker(
                submodule=assign_submodule(provider, garden.config, text)
            )
        children.append((text, marker))

    if dropped:
        node.text = f"{node.text}\n{TRUNCATION_NOTE.format(n=dropped)}"
    node.status = NodeStatus.SUCCEEDED
    return children


# --- task generation --------------------------------------------------------

def _parse_actor_spawner(text: str) -> dict[str, str]:
    sections: dict[str, list[str]] = {}
    current: Optional[str] = None
    for line in text.splitlines():
        head = line.strip()
        lowered = head.lower()
        if lowered.startswith("actor:"):
            current = "actor"
            sections[current] = [head[len("actor:"):].strip()]
        elif lowered.startswith("spawner:"):
            current = "spawner"
            sections[current] = [head[len("spawner:"):].strip()]
        elif current is not None:
            sections[current].append(line)
    if "actor" not in sections or "spawner" not in sections:
        raise ParseFailure("response lacks ACTOR/SPAWNER sections")
    actor = "\n".join(sections["actor"]).strip()
    spawner = "\n".join(sections["spawner"]).strip()
    if not actor or not spawner:
        raise ParseFailure("empty ACTOR or SPAWNER section")
    return {"actor": actor, "spawner": spawner}


def _parse_description(text: str) -> dict[str, str]:
    body = text.strip().strip("`").strip()
    if not body:
        raise ParseFailure("empty task description")
    return {"description": body}


@dataclass(frozen=True)
class SubmoduleSchema:
    system_prompt: str
    part_names: tuple[str, ...]
    parse: Callable[[str], dict[str, str]] = field(compare=False)


SUBMODULE_SCHEMAS: dict[str, SubmoduleSchema] = {
    "code_generator": SubmoduleSchema(
        prompts.TASK_GENERATOR_CODE_SYSTEM, ("actor", "spawner"), _parse_actor_spawner
    ),
    "procedural_mesh": SubmoduleSchema(
        prompts.TASK_GENERATOR_PROCEDURAL_SYSTEM, ("description",), _parse_description
    ),
    "mesh_downloader": SubmoduleSchema(
        prompts.TASK_GENERATOR_DOWNLOAD_SYSTEM, ("description",), _parse_description
    ),
    "mesh_generator": SubmoduleSchema(
        prompts.TASK_GENERATOR_GENERATE_SYSTEM, ("description",), _parse_description
    ),
}


def generate_task(
    garden: Garden,
    provider: CompletionProvider,
    leaf_id: NodeId,
    disclaimer: Optional[str] = None,
) -> TaskSpec:
    """Translate one leaf into a TaskSpec and attach the Task node."""
    leaf = garden.node(leaf_id)
    if leaf.kind is not NodeKind.PLAN_STEP or not leaf.is_leaf:
        raise PreconditionViolation(f"node {leaf_id} is not a leaf plan step")
    if leaf.assigned_submodule is None:
        raise PreconditionViolation(f"leaf {leaf_id} has no assigned submodule")
    if garden.task_of_leaf(leaf_id) is not None:
        raise PreconditionViolation(f"leaf {leaf_id} already has a task")
    schema = SUBMODULE_SCHEMAS.get(leaf.assigned_submodule)
    if schema is None:
        raise UnknownSubmodule(leaf.assigned_submodule)

    system = schema.system_prompt.format(
        disclaimer=prompts.format_disclaimer(disclaimer)
    )
    user = prompts.TASK_GENERATOR_USER.format(
        tree=render_plan_tree(garden, target_id=leaf_id),
        leaf_text=leaf.text.splitlines()[0] if leaf.text else "",
        submodule=leaf.assigned_submodule,
    )
    parts = _query(provider, prompts.ROLE_TASK_GENERATOR, system, user, schema.parse)

    spec = TaskSpec(
        leaf_id=leaf_id,
        submodule=leaf.assigned_submodule,
        prompt_parts=parts,
        order_index=ordered_leaves(garden).index(leaf_id),
    )
    first_part = parts[schema.part_names[0]].splitlines()[0]
    add_child(
        garden,
        leaf_id,
        NodeKind.TASK,
        text=f"[{spec.submodule}] {first_part[:100]}",
        payload=spec.to_payload(),
    )
    return spec

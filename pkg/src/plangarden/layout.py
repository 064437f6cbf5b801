"""Spawn layout documents: placement of actor instances in the scene.

Canonical file format (consumed by the engine init script):

    { "actors": [ { "class": str,
                    "position": [x, y, z],      # centimeters
                    "rotation": [p, y, r],      # degrees
                    "scale":    [x, y, z],      # unitless, > 0
                    "properties": { name: scalar or text } } ] }

Serialization is canonical (sorted keys, fixed layout) so that a document
round-trips through serialize -> parse -> serialize bit-exactly.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Union

from .errors import MalformedLayout, NoLayoutFound

Scalar = Union[str, int, float, bool]
Vec3 = tuple[float, float, float]


def _vec3(value: Any, name: str) -> Vec3:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 3
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise MalformedLayout(f"{name} must be a 3-vector of numbers")
    floats = tuple(float(v) for v in value)
    if any(not math.isfinite(v) for v in floats):
        raise MalformedLayout(f"{name} components must be finite")
    return floats  # type: ignore[return-value]


@dataclass
class LayoutActor:
    class_name: str
    position: Vec3 = (0.0, 0.0, 0.0)
    rotation: Vec3 = (0.0, 0.0, 0.0)
    scale: Vec3 = (1.0, 1.0, 1.0)
    properties: dict[str, Scalar] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.class_name:
            raise MalformedLayout("actor class name must be non-empty")
        self.position = _vec3(self.position, "position")
        self.rotation = _vec3(self.rotation, "rotation")
        self.scale = _vec3(self.scale, "scale")
        if any(v <= 0 for v in self.scale):
            raise MalformedLayout("scale components must be > 0")
        for key, value in self.properties.items():
            if not isinstance(value, (str, int, float, bool)):
                raise MalformedLayout(f"property '{key}' must be scalar or text")


@dataclass
class LayoutSpec:
    actors: list[LayoutActor] = field(default_factory=list)


def layout_to_dict(spec: LayoutSpec) -> dict[str, Any]:
    return {
        "actors": [
            {
                "class": a.class_name,
                "position": list(a.position),
                "rotation": list(a.rotation),
                "scale": list(a.scale),
                "properties": dict(a.properties),
            }
            for a in spec.actors
        ]
    }


def serialize_layout(spec: LayoutSpec) -> str:
    return json.dumps(layout_to_dict(spec), sort_keys=True, indent=2) + "\n"


def layout_from_dict(doc: Any) -> LayoutSpec:
    if not isinstance(doc, dict) or not isinstance(doc.get("actors"), list):
        raise MalformedLayout("layout document must contain an 'actors' array")
    actors = []
    for raw in doc["actors"]:
        if not isinstance(raw, dict):
            raise MalformedLayout("each actor must be an object")
        cls = raw.get("class")
        if not isinstance(cls, str) or not cls:
            raise MalformedLayout("actor 'class' must be a non-empty string")
        props = raw.get("properties", {})
        if not isinstance(props, dict):
            raise MalformedLayout("'properties' must be an object")
        actors.append(
            LayoutActor(
                class_name=cls,
                position=_vec3(raw.get("position", [0, 0, 0]), "position"),
                rotation=_vec3(raw.get("rotation", [0, 0, 0]), "rotation"),
                scale=_vec3(raw.get("scale", [1, 1, 1]), "scale"),
                properties=dict(props),
            )
        )
    return LayoutSpec(actors=actors)


_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


def _candidate_documents(text: str) -> list[str]:
    """Fenced blocks first, then any balanced top-level {...} spans."""
    candidates = [m.group(1) for m in _FENCE_RE.finditer(text)]
    depth = 0
    start = -1
    for i, ch in enumerate(text):
        if ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}" and depth > 0:
            depth -= 1
            if depth == 0:
                candidates.append(text[start : i + 1])
    return candidates


def parse_layout(response_text: str) -> LayoutSpec:
    """Extract the first well-formed layout document from model output.

    Unknown class names pass through here; they surface later as placement
    errors at the engine stage.
    """
    saw_actors_doc = False
    for candidate in _candidate_documents(response_text):
        try:
            doc = json.loads(candidate)
        except ValueError:
            continue
        if not isinstance(doc, dict) or "actors" not in doc:
            continue
        saw_actors_doc = True
        try:
            return layout_from_dict(doc)
        except MalformedLayout:
            continue
    if saw_actors_doc:
        raise MalformedLayout("layout document present but invalid")
    raise NoLayoutFound("no layout document in response")


def default_origin_layout(class_name: str) -> LayoutSpec:
    """Single instance at the origin, identity rotation, unit scale."""
    return LayoutSpec(actors=[LayoutActor(class_name=class_name)])

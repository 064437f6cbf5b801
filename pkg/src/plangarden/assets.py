"""Asset submodules: nearest-neighbor retrieval over a thumbnail embedding
index, generative meshes via a text-to-image-to-mesh adapter chain, and the
project asset registry consumed by code generation.

Retrieval is an exact linear scan by design; any acceleration structure would
have to preserve exactness.
"""

from __future__ import annotations

import enum
import json
import math
import shutil
import urllib.parse
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import (
    AdapterError,
    CorruptDocument,
    DuplicateAssetId,
    EmbeddingProviderError,
    EmptyIndex,
    FetchError,
    MissingFile,
    ProviderError,
    VersionMismatch,
)
from .providers import EmbeddingProvider

INDEX_SCHEMA_VERSION = 1

# appended to generative-mesh prompts so the intermediate image suits the
# image-to-mesh stage
MESH_PROMPT_DIRECTIVES = (
    "The object must be fully visible and posed against a blank background, "
    "centered, with no cropping."
)


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("embedding must be non-empty")
        if any(not math.isfinite(v) for v in self.values):
            raise ValueError("embedding values must be finite")

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class IndexEntry:
    asset_id: str
    embedding: EmbeddingVector
    source_uri: str


@dataclass
class AssetIndex:
    entries: list[IndexEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        dims = set()
        for entry in self.entries:
            if entry.asset_id in seen:
                raise DuplicateAssetId(entry.asset_id)
            seen.add(entry.asset_id)
            dims.add(entry.embedding.dim)
        if len(dims) > 1:
            raise ValueError(f"mixed embedding dims in index: {sorted(dims)}")

    @property
    def dim(self) -> Optional[int]:
        return self.entries[0].embedding.dim if self.entries else None

    def to_json(self) -> str:
        doc = {
            "version": INDEX_SCHEMA_VERSION,
            "dim": self.dim,
            "entries": [
                {
                    "asset_id": e.asset_id,
                    "embedding": list(e.embedding.values),
                    "source_uri": e.source_uri,
                }
                for e in self.entries
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "AssetIndex":
        try:
            doc = json.loads(text)
            version = doc["version"]
            raw_entries = doc["entries"]
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptDocument(f"bad index document: {exc}") from exc
        if version != INDEX_SCHEMA_VERSION:
            raise VersionMismatch(f"index version {version}")
        return cls(
            entries=[
                IndexEntry(
                    asset_id=e["asset_id"],
                    embedding=EmbeddingVector(tuple(float(v) for v in e["embedding"])),
                    source_uri=e["source_uri"],
                )
                for e in raw_entries
            ]
        )


def cosine_distance(a: list[float] | tuple[float, ...], b: list[float] | tuple[float, ...]) -> float:
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    dot = sum(x * y for x, y in zip(a, b))
    norm_a = math.sqrt(sum(x * x for x in a))
    norm_b = math.sqrt(sum(y * y for y in b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 1.0
    return 1.0 - dot / (norm_a * norm_b)


def nearest_entry(index: AssetIndex, query: list[float]) -> IndexEntry:
    """Exact argmin by cosine distance; ties break to the smallest asset_id."""
    if not index.entries:
        raise EmptyIndex("asset index is empty")
    best: Optional[tuple[float, str, IndexEntry]] = None
    for entry in index.entries:
        key = (cosine_distance(query, entry.embedding.values), entry.asset_id)
        if best is None or key < (best[0], best[1]):
            best = (key[0], key[1], entry)
    assert best is not None
    return best[2]


class AssetOrigin(str, enum.Enum):
    DOWNLOADED = "Downloaded"
    GENERATED = "Generated"
    PROCEDURAL = "Procedural"


@dataclass
class AssetRecord:
    asset_id: str
    display_name: str
    mesh_path: str  # workspace-relative
    origin: AssetOrigin
    preview_image: Optional[str] = None

    def to_payload(self) -> dict:
        return {
            "asset_id": self.asset_id,
            "display_name": self.display_name,
            "mesh_path": self.mesh_path,
            "origin": self.origin.value,
            "preview_image": self.preview_image,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "AssetRecord":
        return cls(
            asset_id=payload["asset_id"],
            display_name=payload["display_name"],
            mesh_path=payload["mesh_path"],
            origin=AssetOrigin(payload["origin"]),
            preview_image=payload.get("preview_image"),
        )


class AssetRegistry:
    """Append-only project registry; retraction happens only through
    orchestrator invalidation, which backs the records up first."""

    def __init__(self, workspace: Path) -> None:
        self.workspace = Path(workspace)
        self._records: dict[str, AssetRecord] = {}
        self._created_by: dict[str, Optional[int]] = {}

    def register(self, record: AssetRecord, created_by: Optional[int] = None) -> None:
        if record.asset_id in self._records:
            raise DuplicateAssetId(record.asset_id)
        if not (self.workspace / record.mesh_path).exists():
            raise MissingFile(record.mesh_path)
        self._records[record.asset_id] = record
        self._created_by[record.asset_id] = created_by

    def records(self) -> list[AssetRecord]:
        return list(self._records.values())

    def get(self, asset_id: str) -> Optional[AssetRecord]:
        return self._records.get(asset_id)

    def catalog_names(self) -> list[str]:
        return [f"{r.display_name} ({r.origin.value})" for r in self._records.values()]

    def retract_created_by(self, node_ids: set[int]) -> list[tuple[AssetRecord, Optional[int]]]:
        """Remove records created by the given nodes; returns what was removed."""
        removed = []
        for asset_id in list(self._records):
            creator = self._created_by.get(asset_id)
            if creator is not None and creator in node_ids:
                removed.append((self._records.pop(asset_id), self._created_by.pop(asset_id)))
        return removed

    def reinstate(self, record: AssetRecord, created_by: Optional[int]) -> None:
        self._records[record.asset_id] = record
        self._created_by[record.asset_id] = created_by

    def to_json(self) -> str:
        # canonical: sorted by asset_id, so dumps are order-insensitive
        doc = [
            {"record": r.to_payload(), "created_by": self._created_by[r.asset_id]}
            for r in sorted(self._records.values(), key=lambda r: r.asset_id)
        ]
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def load_json(self, text: str) -> None:
        try:
            doc = json.loads(text)
        except ValueError as exc:
            raise CorruptDocument(str(exc)) from exc
        self._records.clear()
        self._created_by.clear()
        for item in doc:
            record = AssetRecord.from_payload(item["record"])
            self._records[record.asset_id] = record
            self._created_by[record.asset_id] = item.get("created_by")


# --- fetching -------------------------------------------------------------------

class AssetFetcher:
    def fetch(self, source_uri: str, dest_dir: Path) -> Path:
        raise NotImplementedError


class FileFetcher(AssetFetcher):
    """Resolves plain paths and file:// URIs, optionally against a base dir."""

    def __init__(self, base_dir: Optional[Path] = None) -> None:
        self.base_dir = Path(base_dir) if base_dir else None

    def fetch(self, source_uri: str, dest_dir: Path) -> Path:
        parsed = urllib.parse.urlparse(source_uri)
        if parsed.scheme == "file":
            source = Path(urllib.parse.unquote(parsed.path))
        elif parsed.scheme in ("", None):
            source = Path(source_uri)
        else:
            raise FetchError(f"unsupported scheme: {parsed.scheme}")
        if not source.is_absolute() and self.base_dir is not None:
            source = self.base_dir / source
        if not source.exists():
            raise FetchError(f"asset source missing: {source}")
        dest_dir.mkdir(parents=True, exist_ok=True)
        dest = dest_dir / source.name
        shutil.copyfile(source, dest)
        return dest


# --- operations -------------------------------------------------------------------

def retrieve_nearest_asset(
    description: str,
    index: AssetIndex,
    embedder: EmbeddingProvider,
    fetcher: AssetFetcher,
    registry: AssetRegistry,
    created_by: Optional[int] = None,
    engine=None,
) -> AssetRecord:
    """Embed the description, pick the closest index entry, fetch, import via
    the engine hook when one is given, and register the record."""
    if not index.entries:
        raise EmptyIndex("asset index is empty")
    try:
        query = embedder.embed_text(description)
    except ProviderError:
        raise
    except Exception as exc:
        raise EmbeddingProviderError(str(exc)) from exc

    entry = nearest_entry(index, query)
    existing = registry.get(entry.asset_id)
    if existing is not None:
        # already fetched by an earlier task; reuse the project copy
        return existing
    assets_dir = registry.workspace / "assets"
    fetched = fetcher.fetch(entry.source_uri, assets_dir)
    if engine is not None:
        engine.import_mesh(fetched)
    record = AssetRecord(
        asset_id=entry.asset_id,
        display_name=description,
        mesh_path=str(fetched.relative_to(registry.workspace)),
        origin=AssetOrigin.DOWNLOADED,
    )
    registry.register(record, created_by=created_by)
    return record


class TextToImageAdapter:
    def generate(self, prompt: str, dest_dir: Path) -> Path:
        raise NotImplementedError


class ImageToMeshAdapter:
    def generate(self, image_path: Path, dest_dir: Path) -> Path:
        raise NotImplementedError


def generate_mesh_chain(
    prompt: str,
    text_to_image: TextToImageAdapter,
    image_to_mesh: ImageToMeshAdapter,
    registry: AssetRegistry,
    asset_id: str,
    created_by: Optional[int] = None,
    engine=None,
) -> AssetRecord:
    """Chain text -> image -> mesh, import the result, register it."""
    augmented = f"{prompt.strip()}\n{MESH_PROMPT_DIRECTIVES}"
    assets_dir = registry.workspace / "assets"
    try:
        image_path = text_to_image.generate(augmented, assets_dir)
    except AdapterError:
        raise
    except Exception as exc:
        raise AdapterError("text_to_image", str(exc)) from exc
    try:
        mesh_path = image_to_mesh.generate(image_path, assets_dir)
    except AdapterError:
        raise
    except Exception as exc:
        raise AdapterError("image_to_mesh", str(exc)) from exc
    if engine is not None:
        engine.import_mesh(mesh_path)

    record = AssetRecord(
        asset_id=asset_id,
        display_name=prompt.strip(),
        mesh_path=str(mesh_path.relative_to(registry.workspace)),
        origin=AssetOrigin.GENERATED,
        preview_image=str(image_path.relative_to(registry.workspace)),
    )
    registry.register(record, created_by=created_by)
    return record


# --- offline index ingestion ---------------------------------------------------------

def build_index_from_manifest(
    manifest_path: Path, embedder: EmbeddingProvider, base_dir: Optional[Path] = None
) -> AssetIndex:
    """Read a line-delimited manifest of {asset_id, thumbnail, source_uri}
    records, embed each thumbnail, and assemble the index."""
    base = Path(base_dir) if base_dir else Path(manifest_path).parent
    entries: list[IndexEntry] = []
    for lineno, line in enumerate(Path(manifest_path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            asset_id = record["asset_id"]
            thumbnail = record["thumbnail"]
            source_uri = record["source_uri"]
        except (ValueError, KeyError) as exc:
            raise CorruptDocument(f"manifest line {lineno}: {exc}") from exc
        thumb_path = Path(thumbnail)
        if not thumb_path.is_absolute():
            thumb_path = base / thumb_path
        if not thumb_path.exists():
            raise MissingFile(str(thumb_path))
        try:
            vector = embedder.embed_image(thumb_path.read_bytes())
        except Exception as exc:
            raise EmbeddingProviderError(str(exc)) from exc
        entries.append(
            IndexEntry(
                asset_id=asset_id,
                embedding=EmbeddingVector(tuple(vector)),
                source_uri=source_uri,
            )
        )
    return AssetIndex(entries=entries)

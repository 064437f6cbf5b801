"""Bundled deterministic scenarios for demos and the acceptance suite."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..assets import AssetIndex, EmbeddingVector, FileFetcher, IndexEntry
from ..engine import CompileReport, MockEngine, MockScenario, ScriptedRun
from ..garden import Garden, GardenConfig, SubmoduleDescriptor
from ..orchestrator import Orchestrator
from ..persistence import BackupStore, EventLog
from ..providers import HashingEmbedder, ReplayProvider

SHEEP_DIR = Path(__file__).parent / "sheep"

SHEEP_SEED = "a sheep grazing on a grassy hillside"

SHEEP_ROSTER = (
    SubmoduleDescriptor("code_generator",
                        "writes engine actor classes and spawn layouts"),
    SubmoduleDescriptor("procedural_mesh",
                        "writes actor code that builds meshes procedurally"),
    SubmoduleDescriptor("mesh_downloader",
                        "retrieves existing 3D assets matching a description"),
    SubmoduleDescriptor("mesh_generator",
                        "creates new textured meshes from a text prompt"),
)


def sheep_config() -> GardenConfig:
    return GardenConfig(
        max_depth=3, max_branching=3, max_code_attempts=3,
        submodule_roster=SHEEP_ROSTER,
    )


def sheep_engine_scenario() -> MockScenario:
    """Compile #2 fails (SheepActor attempt 1); every run completes."""
    return MockScenario(
        compiles=[
            CompileReport(True, "terrain compiled"),
            CompileReport(False,
                          "SheepActor.cpp(9): error C2065: 'USheepMesh': "
                          "undeclared identifier"),
            CompileReport(True, "sheep compiled"),
            CompileReport(True, "grazing compiled"),
        ],
        runs=[ScriptedRun(), ScriptedRun(), ScriptedRun()],
        imports=["/Game/Imported/sheep"],
    )


def sheep_asset_index(embedder: HashingEmbedder) -> AssetIndex:
    return AssetIndex(entries=[
        IndexEntry("sheep-lowpoly",
                   EmbeddingVector(tuple(embedder.embed_text("a low-poly sheep"))),
                   "sheep.glb"),
        IndexEntry("car-sports",
                   EmbeddingVector(tuple(embedder.embed_text("a sports car"))),
                   "car.glb"),
    ])


@dataclass
class SheepFixture:
    orchestrator: Orchestrator
    provider: ReplayProvider
    engine: MockEngine
    manifest: dict


def load_sheep_manifest() -> dict:
    return json.loads((SHEEP_DIR / "manifest.json").read_text())


def build_sheep_orchestrator(workspace: Path,
                             log_path: Path | None = None) -> SheepFixture:
    """Wire the full scenario: replay scripts, scripted engine, toy index."""
    provider = ReplayProvider.from_dir(SHEEP_DIR / "replay")
    engine = MockEngine(workspace, sheep_engine_scenario())
    embedder = HashingEmbedder(dim=32)
    orch = Orchestrator(
        garden=Garden(config=sheep_config()),
        provider=provider,
        engine=engine,
        workspace=workspace,
        log=EventLog(log_path) if log_path else EventLog(),
        backups=BackupStore(workspace / "backups"),
        embedder=embedder,
        asset_index=sheep_asset_index(embedder),
        fetcher=FileFetcher(SHEEP_DIR / "assets"),
        starter_catalog=("StarterGrass", "StarterRock", "StarterWater"),
    )
    return SheepFixture(
        orchestrator=orch, provider=provider, engine=engine,
        manifest=load_sheep_manifest(),
    )

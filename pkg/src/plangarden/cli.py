"""Operator CLI: grow, steer, inspect, and serve gardens from a workspace
directory.

A workspace holds config.json, garden.json, events.log, backups/, and the
engine working directories. State is loaded per invocation and saved on exit,
so the CLI can be driven step by step across processes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from .api import GardenService, serve_forever
from .assets import AssetIndex, FileFetcher, build_index_from_manifest
from .engine import CompileReport, MockEngine, MockScenario, ScriptedRun
from .errors import GardenError
from .garden import Garden, GardenConfig, Mode, NodeStatus, SubmoduleDescriptor, ordered_leaves
from .orchestrator import Orchestrator
from .persistence import BackupStore, EventLog, load_garden, save_garden
from .providers import HashingEmbedder, LiveEmbedder, LiveProvider, ReplayProvider

DEFAULT_CONFIG = {
    "garden": {
        "max_depth": 3,
        "max_branching": 4,
        "max_code_attempts": 3,
        "submodule_roster": [
            {"name": "code_generator",
             "description": "writes engine actor classes and spawn layouts"},
            {"name": "procedural_mesh",
             "description": "writes actor code that builds meshes procedurally"},
            {"name": "mesh_downloader",
             "description": "retrieves existing 3D assets matching a description"},
            {"name": "mesh_generator",
             "description": "creates new textured meshes from a text prompt"},
        ],
    },
    "provider": {"kind": "replay", "script_dir": "replay"},
    "embedder": {"kind": "hashing", "dim": 32},
    "engine": {"kind": "mock"},
    "asset_index": None,
    "starter_catalog": ["StarterGrass", "StarterRock", "StarterWater"],
    "disclaimer": None,
}


def _read_config(workspace: Path) -> dict:
    path = workspace / "config.json"
    if not path.exists():
        raise GardenError(f"{path} not found; run 'plangarden init {workspace}' first")
    return json.loads(path.read_text())


def _garden_config(doc: dict) -> GardenConfig:
    g = doc["garden"]
    return GardenConfig(
        max_depth=g["max_depth"],
        max_branching=g["max_branching"],
        max_code_attempts=g["max_code_attempts"],
        submodule_roster=tuple(
            SubmoduleDescriptor(s["name"], s["description"])
            for s in g["submodule_roster"]
        ),
    )


def _make_provider(doc: dict, workspace: Path):
    cfg = doc.get("provider", {})
    if cfg.get("kind") == "live":
        return LiveProvider.from_env()
    script_dir = workspace / cfg.get("script_dir", "replay")
    if not script_dir.exists():
        script_dir.mkdir(parents=True)
    return ReplayProvider.from_dir(script_dir, state_path=workspace / "replay_state.json")


def _make_embedder(doc: dict):
    cfg = doc.get("embedder", {})
    if cfg.get("kind") == "live":
        return LiveEmbedder.from_env()
    return HashingEmbedder(dim=int(cfg.get("dim", 32)))


def _make_engine(doc: dict, scenario_root: Path,
                 engine_workspace: Optional[Path] = None) -> MockEngine:
    cfg = doc.get("engine", {})
    workspace = engine_workspace or scenario_root
    scenario = MockScenario.all_ok()
    ref = cfg.get("scenario_file")
    if ref and (scenario_root / ref).exists():
        raw = json.loads((scenario_root / ref).read_text())
        scenario = MockScenario(
            compiles=[CompileReport(c["success"], c["log"])
                      for c in raw.get("compiles", [])],
            runs=[ScriptedRun(**r) for r in raw.get("runs", [])],
            imports=list(raw.get("imports", [])),
            default_ok=bool(raw.get("default_ok", False)),
        )
    return MockEngine(workspace, scenario,
                      state_path=workspace / "engine_state.json")


def build_orchestrator(workspace: Path, garden_id: str = "main") -> Orchestrator:
    doc = _read_config(workspace)
    garden_path = workspace / "garden.json"
    if garden_path.exists():
        garden = load_garden(garden_path.read_text())
    else:
        garden = Garden(config=_garden_config(doc))

    index: Optional[AssetIndex] = None
    index_ref = doc.get("asset_index")
    if index_ref:
        index_path = workspace / index_ref
        if index_path.exists():
            index = AssetIndex.from_json(index_path.read_text())

    orch = Orchestrator(
        garden=garden,
        provider=_make_provider(doc, workspace),
        engine=_make_engine(doc, workspace),
        workspace=workspace,
        log=EventLog(workspace / "events.log"),
        backups=BackupStore(workspace / "backups"),
        embedder=_make_embedder(doc),
        asset_index=index,
        fetcher=FileFetcher(workspace),
        starter_catalog=tuple(doc.get("starter_catalog", ())),
        disclaimer=doc.get("disclaimer"),
    )
    registry_path = workspace / "registry.json"
    if registry_path.exists():
        orch.registry.load_json(registry_path.read_text())
    return orch


def save_state(orch: Orchestrator) -> None:
    (orch.workspace / "garden.json").write_text(save_garden(orch.garden))
    (orch.workspace / "registry.json").write_text(orch.registry.to_json())


# --- commands -----------------------------------------------------------------

def cmd_init(args) -> int:
    workspace = Path(args.workspace)
    workspace.mkdir(parents=True, exist_ok=True)
    config_path = workspace / "config.json"
    if config_path.exists() and not args.force:
        print(f"{config_path} already exists (use --force to overwrite)", file=sys.stderr)
        return 1
    if args.config:
        config_path.write_text(Path(args.config).read_text())
    else:
        config_path.write_text(json.dumps(DEFAULT_CONFIG, indent=2) + "\n")
    for sub in ("replay", "backups", "assets"):
        (workspace / sub).mkdir(exist_ok=True)
    print(f"initialized workspace at {workspace}")
    return 0


def cmd_demo(args) -> int:
    """Set up a workspace preloaded with the bundled hillside-sheep scenario."""
    import shutil

    from .fixtures import (
        SHEEP_DIR,
        SHEEP_SEED,
        sheep_asset_index,
        sheep_engine_scenario,
    )

    workspace = Path(args.workspace)
    workspace.mkdir(parents=True, exist_ok=True)

    config = json.loads(json.dumps(DEFAULT_CONFIG))
    config["garden"]["max_branching"] = 3
    config["asset_index"] = "index.json"
    config["engine"]["scenario_file"] = "engine_scenario.json"
    (workspace / "config.json").write_text(json.dumps(config, indent=2) + "\n")

    replay_dir = workspace / "replay"
    if replay_dir.exists():
        shutil.rmtree(replay_dir)
    shutil.copytree(SHEEP_DIR / "replay", replay_dir)

    assets_src = workspace / "demo_assets"
    assets_src.mkdir(exist_ok=True)
    for mesh in (SHEEP_DIR / "assets").iterdir():
        shutil.copyfile(mesh, assets_src / mesh.name)

    embedder = HashingEmbedder(dim=32)
    index = sheep_asset_index(embedder)
    for entry in index.entries:
        object.__setattr__(entry, "source_uri", f"demo_assets/{entry.source_uri}")
    (workspace / "index.json").write_text(index.to_json())

    scenario = sheep_engine_scenario()
    (workspace / "engine_scenario.json").write_text(json.dumps({
        "compiles": [{"success": c.success, "log": c.log} for c in scenario.compiles],
        "runs": [{"outcome": r.outcome, "runtime_log": r.runtime_log}
                 for r in scenario.runs],
        "imports": list(scenario.imports),
        "default_ok": False,
    }, indent=2) + "\n")

    print(f"demo workspace ready at {workspace}; next:")
    print(f'  plangarden -w {workspace} seed "{SHEEP_SEED}"')
    print(f"  plangarden -w {workspace} play")
    print(f"  plangarden -w {workspace} status")
    return 0


def cmd_seed(args) -> int:
    orch = build_orchestrator(Path(args.workspace))
    node_id = orch.seed(args.text)
    save_state(orch)
    print(f"seeded garden with node {node_id}")
    return 0


def cmd_step(args) -> int:
    orch = build_orchestrator(Path(args.workspace))
    orch.set_mode(Mode.STEP)
    done = 0
    for _ in range(args.count):
        outcome = orch.step()
        if outcome.idle:
            print("frontier empty; nothing to do")
            break
        done += 1
        print(f"step {done}: {outcome.unit} on node {outcome.node_id}")
    save_state(orch)
    return 0


def cmd_play(args) -> int:
    orch = build_orchestrator(Path(args.workspace))
    orch.set_mode(Mode.PLAY)
    done = orch.play()
    save_state(orch)
    print(f"played {done} work units; mode {orch.garden.mode.value}")
    return 0


def cmd_pause(args) -> int:
    orch = build_orchestrator(Path(args.workspace))
    orch.set_mode(Mode.PAUSED)
    save_state(orch)
    print("paused")
    return 0


_STATUS_GLYPH = {
    NodeStatus.PENDING: " ",
    NodeStatus.IN_PROGRESS: ">",
    NodeStatus.SUCCEEDED: "+",
    NodeStatus.FAILED: "x",
    NodeStatus.PRUNED: "-",
}


def cmd_status(args) -> int:
    orch = build_orchestrator(Path(args.workspace))
    garden = orch.garden
    print(f"mode: {garden.mode.value}  nodes: {len(garden.nodes)}  "
          f"events: {orch.log.last_seq}")
    seed = garden.seed_node()
    if seed is None:
        print("(no seed yet)")
        return 0
    stack = [(seed.id, 0)]
    while stack:
        nid, indent = stack.pop()
        node = garden.node(nid)
        glyph = _STATUS_GLYPH[node.status]
        label = node.text.splitlines()[0][:70] if node.text else ""
        leaf_mark = f" [leaf:{node.assigned_submodule}]" if node.is_leaf else ""
        print(f"{'  ' * indent}[{glyph}] {node.kind.value} {nid}: {label}{leaf_mark}")
        for child in reversed(garden.children_of(nid)):
            stack.append((child.id, indent + 1))
    leaf_ids = ordered_leaves(garden)
    print("leaves (execution order): " + " ".join(str(i) for i in leaf_ids))
    return 0


def cmd_export(args) -> int:
    orch = build_orchestrator(Path(args.workspace))
    out = Path(args.path)
    out.write_text(save_garden(orch.garden))
    print(f"exported garden to {out}")
    return 0


def cmd_index_build(args) -> int:
    workspace = Path(args.workspace)
    doc = _read_config(workspace)
    embedder = _make_embedder(doc)
    index = build_index_from_manifest(Path(args.manifest), embedder)
    out = Path(args.out) if args.out else workspace / "index.json"
    out.write_text(index.to_json())
    print(f"wrote index of {len(index.entries)} entries to {out}")
    return 0


def cmd_serve(args) -> int:
    workspace = Path(args.workspace)
    _read_config(workspace)  # fail fast on a missing workspace

    def make_orchestrator(garden_id: str) -> Orchestrator:
        garden_dir = workspace / "gardens" / garden_id
        garden_dir.mkdir(parents=True, exist_ok=True)
        doc = _read_config(workspace)
        # provider and engine state live per garden: each served garden
        # consumes the workspace's scripts from the start
        provider_cfg = doc.get("provider", {})
        if provider_cfg.get("kind") == "live":
            provider = LiveProvider.from_env()
        else:
            script_dir = workspace / provider_cfg.get("script_dir", "replay")
            script_dir.mkdir(parents=True, exist_ok=True)
            provider = ReplayProvider.from_dir(
                script_dir, state_path=garden_dir / "replay_state.json")
        orch = Orchestrator(
            garden=Garden(config=_garden_config(doc)),
            provider=provider,
            engine=_make_engine(doc, workspace, engine_workspace=garden_dir),
            workspace=garden_dir,
            log=EventLog(garden_dir / "events.log"),
            backups=BackupStore(garden_dir / "backups"),
            embedder=_make_embedder(doc),
            fetcher=FileFetcher(workspace),
            starter_catalog=tuple(doc.get("starter_catalog", ())),
            disclaimer=doc.get("disclaimer"),
        )
        index_ref = doc.get("asset_index")
        if index_ref and (workspace / index_ref).exists():
            orch.asset_index = AssetIndex.from_json((workspace / index_ref).read_text())
        return orch

    serve_forever(GardenService(make_orchestrator), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plangarden",
        description="Grow a plan-and-action garden from a single seed prompt.",
    )
    parser.add_argument("--workspace", "-w", default=".",
                        help="workspace directory (default: current directory)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create a workspace")
    p.add_argument("workspace_pos", nargs="?", default=None, metavar="workspace")
    p.add_argument("--config", help="seed config.json from this file")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("demo", help="create a workspace preloaded with the demo scenario")
    p.add_argument("workspace_pos", nargs="?", default=None, metavar="workspace")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("seed", help="plant the seed prompt")
    p.add_argument("text")
    p.set_defaults(func=cmd_seed)

    p = sub.add_parser("step", help="run one or more work units")
    p.add_argument("count", nargs="?", type=int, default=1)
    p.set_defaults(func=cmd_step)

    p = sub.add_parser("play", help="run until the frontier empties")
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("pause", help="set the stored mode to Paused")
    p.set_defaults(func=cmd_pause)

    p = sub.add_parser("status", help="print the tree with statuses")
    p.set_defaults(func=cmd_status)

    p = sub.add_parser("export", help="write the garden document to a file")
    p.add_argument("path")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("index", help="asset index operations")
    index_sub = p.add_subparsers(dest="index_command", required=True)
    pb = index_sub.add_parser("build", help="embed a thumbnail manifest into an index")
    pb.add_argument("manifest")
    pb.add_argument("--out")
    pb.set_defaults(func=cmd_index_build)

    p = sub.add_parser("serve", help="serve the HTTP API")
    p.add_argument("--port", type=int, default=8642)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workspace_pos", None):
        args.workspace = args.workspace_pos
    try:
        return args.func(args)
    except GardenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

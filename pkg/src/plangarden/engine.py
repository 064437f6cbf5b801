"""Engine adapter: everything the host game engine does, behind one contract.

The mock adapter is the reference implementation and is fully deterministic:
outcomes come from a scripted scenario consumed FIFO, and screenshot capture
writes fixed 16:9 placeholder images into the workspace. The live adapter
shells out to configured commands and tracks its own process ids so it only
ever kills engine instances it launched.

Workspace layout: source/, layouts/, assets/, screenshots/<task>/<attempt>/.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import (
    LaunchFailure,
    MissingFile,
    ScenarioExhausted,
    ToolchainMissing,
    UnsupportedFormat,
)
from .layout import LayoutSpec, serialize_layout

SCREENSHOT_COUNT = 6
SUPPORTED_MESH_SUFFIXES = (".glb", ".gltf", ".obj", ".fbx")


@dataclass
class CompileReport:
    success: bool
    log: str

    def __post_init__(self) -> None:
        if not self.success and not self.log:
            raise ValueError("failed compile must carry a log")


class RunOutcome:
    RAN = "Ran"
    PLACEMENT_ERROR = "PlacementError"
    CRASHED = "Crashed"


@dataclass
class RunReport:
    outcome: str
    runtime_log: str = ""
    crash_log: Optional[str] = None
    placement_log_excerpt: Optional[str] = None
    screenshots: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.outcome == RunOutcome.RAN and len(self.screenshots) != SCREENSHOT_COUNT:
            raise ValueError(f"a completed run must carry {SCREENSHOT_COUNT} screenshots")
        if self.outcome == RunOutcome.CRASHED and self.crash_log is None:
            raise ValueError("a crashed run must carry a crash log")
        if self.outcome == RunOutcome.PLACEMENT_ERROR and self.placement_log_excerpt is None:
            raise ValueError("a placement error must carry a log excerpt")


class EngineAdapter:
    """Contract consumed by the pipeline and orchestrator."""

    def compile_project(self, bundle) -> CompileReport:
        raise NotImplementedError

    def run_simulation(self, layout: LayoutSpec, capture_tag: str = "adhoc") -> RunReport:
        raise NotImplementedError

    def import_mesh(self, file_path: Path) -> str:
        raise NotImplementedError

    def launch_user_session(self, bundle, layout: LayoutSpec) -> str:
        raise NotImplementedError


# --- deterministic mock -------------------------------------------------------

@dataclass
class ScriptedRun:
    outcome: str = RunOutcome.RAN
    runtime_log: str = "simulation ran"
    crash_log: Optional[str] = None
    placement_log_excerpt: Optional[str] = None


@dataclass
class MockScenario:
    """Per-invocation scripts, consumed FIFO; running dry is a test failure."""

    compiles: list[CompileReport] = field(default_factory=list)
    runs: list[ScriptedRun] = field(default_factory=list)
    imports: list[str] = field(default_factory=list)
    # convenience for long runs: when a queue is empty, synthesize success
    default_ok: bool = False

    @classmethod
    def all_ok(cls) -> "MockScenario":
        return cls(default_ok=True)


def _ppm_placeholder(tag: str, index: int) -> bytes:
    """Tiny deterministic 16:9 PPM image."""
    width, height = 16, 9
    header = f"P6\n{width} {height}\n255\n".encode()
    seedbytes = f"{tag}:{index}".encode()
    body = bytes(
        (seedbytes[(i + c) % len(seedbytes)] + i * 7 + c * 31) % 256
        for i in range(width * height)
        for c in range(3)
    )
    return header + body


class MockEngine(EngineAdapter):
    def __init__(self, workspace: Path, scenario: Optional[MockScenario] = None,
                 state_path: Optional[Path] = None) -> None:
        self.workspace = Path(workspace)
        self.scenario = scenario or MockScenario.all_ok()
        self._compile_calls = 0
        self._run_calls = 0
        self._import_calls = 0
        self._known_classes: set[str] = set()
        self.imported: list[str] = []
        self.user_sessions: list[dict] = []
        # persisted consumption counters let CLI invocations continue a script
        self._state_path = Path(state_path) if state_path else None
        if self._state_path is not None and self._state_path.exists():
            state = json.loads(self._state_path.read_text())
            self._compile_calls = state.get("compiles", 0)
            self._run_calls = state.get("runs", 0)
            self._import_calls = state.get("imports", 0)

    def _save_state(self) -> None:
        if self._state_path is not None:
            self._state_path.write_text(json.dumps({
                "compiles": self._compile_calls,
                "runs": self._run_calls,
                "imports": self._import_calls,
            }))

    def _pop(self, queue: list, count: int, default, what: str):
        if count < len(queue):
            return queue[count]
        if self.scenario.default_ok:
            return default
        raise ScenarioExhausted(f"mock scenario has no {what} entry #{count + 1}")

    def compile_project(self, bundle) -> CompileReport:
        report = self._pop(
            self.scenario.compiles,
            self._compile_calls,
            CompileReport(success=True, log="compile ok"),
            "compile",
        )
        self._compile_calls += 1
        self._save_state()
        if report.success:
            self._known_classes = {Path(p).stem for p in bundle.files}
        return report

    def run_simulation(self, layout: LayoutSpec, capture_tag: str = "adhoc") -> RunReport:
        scripted = self._pop(self.scenario.runs, self._run_calls, ScriptedRun(), "run")
        self._run_calls += 1
        self._save_state()

        if scripted.outcome == RunOutcome.PLACEMENT_ERROR:
            excerpt = scripted.placement_log_excerpt
            if excerpt is None:
                # name the first layout class the compiled code does not define
                missing = next(
                    (a.class_name for a in layout.actors
                     if a.class_name not in self._known_classes),
                    layout.actors[0].class_name if layout.actors else "<none>",
                )
                excerpt = f"init script error: unknown actor class '{missing}'"
            return RunReport(
                outcome=RunOutcome.PLACEMENT_ERROR,
                runtime_log=scripted.runtime_log,
                placement_log_excerpt=excerpt,
            )
        if scripted.outcome == RunOutcome.CRASHED:
            return RunReport(
                outcome=RunOutcome.CRASHED,
                runtime_log=scripted.runtime_log,
                crash_log=scripted.crash_log or "",
            )

        shots = []
        shot_dir = self.workspace / "screenshots" / capture_tag
        shot_dir.mkdir(parents=True, exist_ok=True)
        for i in range(1, SCREENSHOT_COUNT + 1):
            rel = Path("screenshots") / capture_tag / f"shot_{i}.ppm"
            (self.workspace / rel).write_bytes(_ppm_placeholder(capture_tag, i))
            shots.append(str(rel))
        return RunReport(
            outcome=RunOutcome.RAN,
            runtime_log=scripted.runtime_log,
            screenshots=shots,
        )

    def import_mesh(self, file_path: Path) -> str:
        file_path = Path(file_path)
        if not file_path.exists():
            raise MissingFile(str(file_path))
        if file_path.suffix.lower() not in SUPPORTED_MESH_SUFFIXES:
            raise UnsupportedFormat(file_path.suffix)
        ref = self._pop(
            self.scenario.imports,
            self._import_calls,
            f"/Game/Imported/{file_path.stem}",
            "import",
        )
        self._import_calls += 1
        self._save_state()
        self.imported.append(str(file_path))
        return ref

    def launch_user_session(self, bundle, layout: LayoutSpec) -> str:
        handle = f"session-{len(self.user_sessions) + 1}"
        self.user_sessions.append(
            {"handle": handle, "files": dict(bundle.files), "layout": serialize_layout(layout)}
        )
        return handle


# --- live adapter skeleton ------------------------------------------------------

@dataclass
class LiveEngineSettings:
    compile_command: str = ""
    run_command: str = ""       # receives the layout path as its last argument
    import_command: str = ""    # receives the mesh path as its last argument
    timeout_s: float = 1800.0


class LiveEngine(EngineAdapter):
    """External-process adapter. Not exercised by the test suite; the mock is
    the contract's reference implementation."""

    def __init__(self, workspace: Path, settings: LiveEngineSettings) -> None:
        self.workspace = Path(workspace)
        self.settings = settings
        self._owned_pids: set[int] = set()

    def _run(self, command: str, extra: list[str]) -> subprocess.CompletedProcess:
        if not command:
            raise ToolchainMissing("engine command not configured")
        argv = shlex.split(command) + extra
        try:
            proc = subprocess.Popen(
                argv, cwd=self.workspace, stdout=subprocess.PIPE,
                stderr=subprocess.STDOUT, text=True,
            )
        except OSError as exc:
            raise LaunchFailure(str(exc)) from exc
        self._owned_pids.add(proc.pid)
        try:
            out, _ = proc.communicate(timeout=self.settings.timeout_s)
        except subprocess.TimeoutExpired:
            proc.kill()
            out, _ = proc.communicate()
        finally:
            self._owned_pids.discard(proc.pid)
        return subprocess.CompletedProcess(argv, proc.returncode, stdout=out or "")

    def compile_project(self, bundle) -> CompileReport:
        source_root = self.workspace / "source"
        for rel, content in bundle.files.items():
            target = source_root / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(content)
        result = self._run(self.settings.compile_command, [])
        return CompileReport(
            success=result.returncode == 0,
            log=result.stdout or f"exit status {result.returncode}",
        )

    def run_simulation(self, layout: LayoutSpec, capture_tag: str = "adhoc") -> RunReport:
        layout_path = self.workspace / "layouts" / f"{capture_tag.replace('/', '_')}.json"
        layout_path.parent.mkdir(parents=True, exist_ok=True)
        layout_path.write_text(serialize_layout(layout))
        result = self._run(self.settings.run_command, [str(layout_path)])
        log = result.stdout
        if "INIT_SCRIPT_ERROR" in log:
            marker = log.index("INIT_SCRIPT_ERROR")
            return RunReport(
                outcome=RunOutcome.PLACEMENT_ERROR,
                runtime_log=log,
                placement_log_excerpt=log[marker : marker + 2000],
            )
        if result.returncode != 0:
            return RunReport(outcome=RunOutcome.CRASHED, runtime_log=log, crash_log=log[-4000:])
        shot_dir = self.workspace / "screenshots" / capture_tag
        shots = sorted(str(p.relative_to(self.workspace)) for p in shot_dir.glob("*"))
        return RunReport(outcome=RunOutcome.RAN, runtime_log=log, screenshots=shots)

    def import_mesh(self, file_path: Path) -> str:
        file_path = Path(file_path)
        if not file_path.exists():
            raise MissingFile(str(file_path))
        result = self._run(self.settings.import_command, [str(file_path)])
        if result.returncode != 0:
            raise UnsupportedFormat(result.stdout[-500:])
        return result.stdout.strip().splitlines()[-1] if result.stdout.strip() else file_path.stem

    def launch_user_session(self, bundle, layout: LayoutSpec) -> str:
        raise LaunchFailure("live user sessions require a configured editor command")

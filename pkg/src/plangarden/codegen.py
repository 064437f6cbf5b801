"""Code-generation pipeline: generate actor code and a spawn layout, drive
compile / place / run / visual evaluation, and route stage feedback back into
the next attempt. Also hosts the procedural-mesh variant, which skips layout
generation in favor of a single instance at the origin.
"""

from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import prompts
from .engine import EngineAdapter, RunOutcome, SCREENSHOT_COUNT
from .errors import (
    EngineUnavailable,
    MalformedLayout,
    NoFilesFound,
    NoLayoutFound,
    PathViolation,
    PreconditionViolation,
    ProviderError,
)
from .garden import GardenConfig
from .layout import LayoutSpec, default_origin_layout, parse_layout, serialize_layout
from .planner import TaskSpec
from .providers import (
    CompletionProvider,
    CompletionRequest,
    EVALUATOR_TEMPERATURE,
    GENERATION_TEMPERATURE,
)


class Stage(str, enum.Enum):
    GENERATED = "Generated"
    COMPILED = "Compiled"
    PLACED = "Placed"
    RAN = "Ran"
    VISUALLY_EVALUATED = "VisuallyEvaluated"


class Verdict(str, enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"
    PENDING = "Pending"


class SourceStage(str, enum.Enum):
    COMPILE = "Compile"
    PLACEMENT = "Placement"
    CRASH = "Crash"
    VISUAL = "Visual"


@dataclass
class CodeBundle:
    files: dict[str, str] = field(default_factory=dict)
    summary: Optional[str] = None

    def primary_class(self) -> str:
        for path in self.files:
            return Path(path).stem
        return "GeneratedActor"

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        for path in sorted(self.files):
            digest.update(path.encode("utf-8"))
            digest.update(b"\x00")
            digest.update(self.files[path].encode("utf-8"))
            digest.update(b"\x00")
        return digest.hexdigest()


@dataclass
class EvaluationReport:
    verdict: Verdict
    feedback: str
    source_stage: SourceStage

    def __post_init__(self) -> None:
        if self.verdict is Verdict.FAIL and not self.feedback:
            raise ValueError("a Fail verdict must carry feedback")


@dataclass
class PipelineAttempt:
    index: int
    bundle: CodeBundle
    layout: Optional[LayoutSpec]
    stage_reached: Stage
    verdict: Verdict
    feedback: str
    screenshots: list[str] = field(default_factory=list)
    report: Optional[EvaluationReport] = None
    snapshot_hash: Optional[str] = None


@dataclass
class PipelineResult:
    verdict: Verdict
    attempts: list[PipelineAttempt]


@dataclass
class PriorAttempt:
    """Context threaded from the previous attempt into the next generation."""

    bundle: CodeBundle
    layout: Optional[LayoutSpec]
    feedback: str


@dataclass
class ProjectContext:
    provider: CompletionProvider
    engine: EngineAdapter
    workspace: Path
    config: GardenConfig
    registry: Optional[object] = None  # AssetRegistry; duck-typed to avoid a cycle
    starter_catalog: tuple[str, ...] = ()
    disclaimer: Optional[str] = None

    def catalog_text(self) -> str:
        names = list(self.starter_catalog)
        if self.registry is not None:
            names.extend(self.registry.catalog_names())
        return "\n".join(f"- {name}" for name in names) if names else "(none)"


# --- parsing model output ----------------------------------------------------

_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
_FILE_HEADER_RE = re.compile(r"^\s*//\s*FILE:\s*(\S.*)$")
_PRECEDING_PATH_RE = re.compile(r"^\s*#{1,6}\s*`?([\w./\\-]+\.[A-Za-z0-9]+)`?\s*$")


def validate_relative_path(path: str) -> str:
    cleaned = path.strip().strip("`").strip()
    if not cleaned:
        raise PathViolation("empty file path")
    if cleaned.startswith(("/", "\\")) or re.match(r"^[A-Za-z]:", cleaned):
        raise PathViolation(f"absolute path not allowed: {cleaned}")
    parts = [p for p in re.split(r"[/\\]+", cleaned) if p != "."]
    if any(p in ("", "..") for p in parts):
        raise PathViolation(f"path traversal not allowed: {cleaned}")
    return "/".join(parts)


def parse_code_files(response_text: str) -> CodeBundle:
    """Extract annotated fenced code blocks into a file map.

    Two annotation forms are accepted: a `// FILE: <path>` header line inside
    the fence, or a markdown heading naming the path immediately before it.
    """
    files: dict[str, str] = {}
    last_end = 0
    for match in _FENCE_RE.finditer(response_text):
        body = match.group(1)
        lines = body.splitlines()
        path: Optional[str] = None
        header = _FILE_HEADER_RE.match(lines[0]) if lines else None
        if header is not None:
            path = header.group(1)
            body = "\n".join(lines[1:])
        else:
            preceding = response_text[last_end : match.start()].rstrip().splitlines()
            if preceding:
                heading = _PRECEDING_PATH_RE.match(preceding[-1])
                if heading is not None:
                    path = heading.group(1)
        last_end = match.end()
        if path is None:
            continue
        files[validate_relative_path(path)] = body.strip("\n") + "\n"
    if not files:
        raise NoFilesFound("no annotated code files in response")
    return CodeBundle(files=files)


def render_bundle(bundle: CodeBundle) -> str:
    blocks = [
        f"// FILE: {path}\n{content}" for path, content in bundle.files.items()
    ]
    return "\n".join(blocks) if blocks else "(no files)"


# --- evaluators ----------------------------------------------------------------

_VERDICT_RE = re.compile(r"^\s*VERDICT:\s*(PASS|FAIL)\s*$", re.IGNORECASE)


def parse_verdict(text: str) -> tuple[Optional[Verdict], str]:
    """First matching `VERDICT: PASS|FAIL` line; feedback is what follows."""
    lines = text.splitlines()
    for i, line in enumerate(lines):
        m = _VERDICT_RE.match(line)
        if m is not None:
            verdict = Verdict.PASS if m.group(1).upper() == "PASS" else Verdict.FAIL
            feedback = "\n".join(lines[i + 1 :]).strip()
            return verdict, feedback
    return None, text.strip()


def _excerpt(text: str, limit: int = 800) -> str:
    cleaned = text.strip()
    if not cleaned:
        return "no diagnostic available"
    return cleaned[:limit]


def _evaluate(
    provider: CompletionProvider,
    role: str,
    system: str,
    user: str,
    source_stage: SourceStage,
    fallback_log: str,
    images: Optional[list[bytes]] = None,
) -> EvaluationReport:
    """Run one evaluator; unparseable or failed calls degrade to Fail."""
    request = CompletionRequest(
        system_prompt=system,
        messages=[("user", user)],
        images=list(images or []),
        temperature=EVALUATOR_TEMPERATURE,
        role=role,
    )
    try:
        if images:
            response = provider.complete_vision(request)
        else:
            response = provider.complete(request)
    except ProviderError as exc:
        return EvaluationReport(
            verdict=Verdict.FAIL,
            feedback=f"evaluator unavailable ({exc}); log excerpt:\n{_excerpt(fallback_log)}",
            source_stage=source_stage,
        )
    verdict, feedback = parse_verdict(response.text)
    if verdict is None:
        return EvaluationReport(
            verdict=Verdict.FAIL,
            feedback=_excerpt(fallback_log if fallback_log.strip() else response.text),
            source_stage=source_stage,
        )
    if verdict is Verdict.FAIL and not feedback:
        feedback = _excerpt(fallback_log)
    return EvaluationReport(verdict=verdict, feedback=feedback, source_stage=source_stage)


def eval_compile_log(
    provider: CompletionProvider, log: str, bundle: CodeBundle, task_prompt: str
) -> EvaluationReport:
    return _evaluate(
        provider,
        prompts.ROLE_COMPILE_EVAL,
        prompts.COMPILE_EVAL_SYSTEM,
        prompts.COMPILE_EVAL_USER.format(
            log=log, files=render_bundle(bundle), task_prompt=task_prompt
        ),
        SourceStage.COMPILE,
        fallback_log=log,
    )


def eval_placement_log(
    provider: CompletionProvider,
    log: str,
    bundle: CodeBundle,
    layout: LayoutSpec,
    task_prompt: str,
) -> EvaluationReport:
    return _evaluate(
        provider,
        prompts.ROLE_PLACEMENT_EVAL,
        prompts.PLACEMENT_EVAL_SYSTEM,
        prompts.PLACEMENT_EVAL_USER.format(
            log=log,
            layout=serialize_layout(layout),
            files=render_bundle(bundle),
            task_prompt=task_prompt,
        ),
        SourceStage.PLACEMENT,
        fallback_log=log,
    )


def eval_crash_log(
    provider: CompletionProvider,
    crash_log: str,
    bundle: CodeBundle,
    layout: Optional[LayoutSpec],
    task_prompt: str,
) -> EvaluationReport:
    if not crash_log.strip():
        return EvaluationReport(
            verdict=Verdict.FAIL,
            feedback="no diagnostic available",
            source_stage=SourceStage.CRASH,
        )
    return _evaluate(
        provider,
        prompts.ROLE_CRASH_EVAL,
        prompts.CRASH_EVAL_SYSTEM,
        prompts.CRASH_EVAL_USER.format(
            log=crash_log,
            layout=serialize_layout(layout) if layout else "(none)",
            files=render_bundle(bundle),
            task_prompt=task_prompt,
        ),
        SourceStage.CRASH,
        fallback_log=crash_log,
    )


def eval_visual(
    provider: CompletionProvider,
    screenshots: list[bytes],
    runtime_log: str,
    bundle: CodeBundle,
    layout: Optional[LayoutSpec],
    task_prompt: str,
) -> EvaluationReport:
    if len(screenshots) != SCREENSHOT_COUNT:
        raise PreconditionViolation(
            f"visual evaluation requires exactly {SCREENSHOT_COUNT} screenshots, "
            f"got {len(screenshots)}"
        )
    return _evaluate(
        provider,
        prompts.ROLE_VISUAL_EVAL,
        prompts.VISUAL_EVAL_SYSTEM,
        prompts.VISUAL_EVAL_USER.format(
            log=runtime_log,
            layout=serialize_layout(layout) if layout else "(none)",
            files=render_bundle(bundle),
            task_prompt=task_prompt,
        ),
        SourceStage.VISUAL,
        fallback_log="",
        images=screenshots,
    )


# --- the attempt state machine ----------------------------------------------------

def _task_prompt_text(task: TaskSpec) -> str:
    return "\n\n".join(f"{k.upper()}:\n{v}" for k, v in task.prompt_parts.items())


def _generation_request(
    task: TaskSpec, ctx: ProjectContext, prior: Optional[PriorAttempt], procedural: bool
) -> CompletionRequest:
    if procedural:
        system = prompts.PROCEDURAL_MESH_SYSTEM.format(
            cube_example=prompts.PROCEDURAL_CUBE_EXAMPLE,
            catalog=ctx.catalog_text(),
            disclaimer=prompts.format_disclaimer(ctx.disclaimer),
        )
        actor_prompt = task.prompt_parts.get("description", _task_prompt_text(task))
    else:
        system = prompts.CODE_GENERATOR_SYSTEM.format(
            catalog=ctx.catalog_text(),
            disclaimer=prompts.format_disclaimer(ctx.disclaimer),
        )
        actor_prompt = task.prompt_parts.get("actor", _task_prompt_text(task))

    history = ""
    if prior is not None:
        history = prompts.CODE_HISTORY_BLOCK.format(
            prior_files=render_bundle(prior.bundle),
            prior_layout=serialize_layout(prior.layout) if prior.layout else "(none)",
            feedback=prior.feedback,
        )
    user = prompts.CODE_GENERATOR_USER.format(actor_prompt=actor_prompt, history=history)
    return CompletionRequest(
        system_prompt=system,
        messages=[("user", user)],
        temperature=GENERATION_TEMPERATURE,
        role=prompts.ROLE_CODE_GENERATOR,
    )


def _write_bundle(ctx: ProjectContext, task_tag: str, index: int, bundle: CodeBundle) -> None:
    root = ctx.workspace / "source" / task_tag / f"attempt{index}"
    for rel, content in bundle.files.items():
        target = root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(content)


def _write_layout(ctx: ProjectContext, task_tag: str, index: int, layout: LayoutSpec) -> None:
    path = ctx.workspace / "layouts" / f"{task_tag}_attempt{index}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_layout(layout))


def _failed(
    index: int,
    bundle: CodeBundle,
    layout: Optional[LayoutSpec],
    stage: Stage,
    feedback: str,
    report: Optional[EvaluationReport] = None,
    screenshots: Optional[list[str]] = None,
) -> PipelineAttempt:
    return PipelineAttempt(
        index=index,
        bundle=bundle,
        layout=layout,
        stage_reached=stage,
        verdict=Verdict.FAIL,
        feedback=feedback,
        screenshots=list(screenshots or []),
        report=report,
        snapshot_hash=bundle.content_hash() if bundle.files else None,
    )


def run_single_attempt(
    task: TaskSpec,
    ctx: ProjectContext,
    index: int,
    prior: Optional[PriorAttempt] = None,
    procedural: bool = False,
    task_tag: str = "task",
) -> PipelineAttempt:
    """One full iteration of the state machine: generate through evaluate.

    Every failure path produces a Fail attempt carrying feedback for the next
    iteration; only provider/engine availability errors at generation time
    are non-recoverable enough to surface as diagnostic feedback too.
    """
    task_prompt = _task_prompt_text(task)

    try:
        response = ctx.provider.complete(_generation_request(task, ctx, prior, procedural))
    except ProviderError as exc:
        return _failed(index, CodeBundle(), None, Stage.GENERATED,
                       f"code generation failed: {exc}")
    try:
        bundle = parse_code_files(response.text)
    except (NoFilesFound, PathViolation) as exc:
        return _failed(index, CodeBundle(), None, Stage.GENERATED,
                       f"no usable code files in response: {exc}")

    _write_bundle(ctx, task_tag, index, bundle)

    try:
        compile_report = ctx.engine.compile_project(bundle)
    except EngineUnavailable as exc:
        return _failed(index, bundle, None, Stage.GENERATED, f"engine unavailable: {exc}")
    if not compile_report.success:
        report = eval_compile_log(ctx.provider, compile_report.log, bundle, task_prompt)
        return _failed(index, bundle, None, Stage.GENERATED, report.feedback, report)

    if procedural:
        layout = default_origin_layout(bundle.primary_class())
    else:
        layout_request = CompletionRequest(
            system_prompt=prompts.LAYOUT_GENERATOR_SYSTEM.format(
                disclaimer=prompts.format_disclaimer(ctx.disclaimer)
            ),
            messages=[
                (
                    "user",
                    prompts.LAYOUT_GENERATOR_USER.format(
                        files=render_bundle(bundle),
                        spawner_prompt=task.prompt_parts.get("spawner", task_prompt),
                    ),
                )
            ],
            temperature=GENERATION_TEMPERATURE,
            role=prompts.ROLE_LAYOUT_GENERATOR,
        )
        try:
            layout = parse_layout(ctx.provider.complete(layout_request).text)
        except ProviderError as exc:
            return _failed(index, bundle, None, Stage.COMPILED,
                           f"layout generation failed: {exc}")
        except (NoLayoutFound, MalformedLayout) as exc:
            return _failed(index, bundle, None, Stage.COMPILED,
                           f"layout could not be parsed: {exc}")
    _write_layout(ctx, task_tag, index, layout)

    try:
        run_report = ctx.engine.run_simulation(layout, capture_tag=f"{task_tag}/attempt{index}")
    except EngineUnavailable as exc:
        return _failed(index, bundle, layout, Stage.COMPILED, f"engine unavailable: {exc}")

    if run_report.outcome == RunOutcome.PLACEMENT_ERROR:
        report = eval_placement_log(
            ctx.provider, run_report.placement_log_excerpt or "", bundle, layout, task_prompt
        )
        return _failed(index, bundle, layout, Stage.COMPILED, report.feedback, report)
    if run_report.outcome == RunOutcome.CRASHED:
        report = eval_crash_log(
            ctx.provider, run_report.crash_log or "", bundle, layout, task_prompt
        )
        return _failed(index, bundle, layout, Stage.PLACED, report.feedback, report)

    screenshots = list(run_report.screenshots)
    blobs = [(ctx.workspace / rel).read_bytes() for rel in screenshots]
    report = eval_visual(ctx.provider, blobs, run_report.runtime_log, bundle, layout, task_prompt)
    return PipelineAttempt(
        index=index,
        bundle=bundle,
        layout=layout,
        stage_reached=Stage.VISUALLY_EVALUATED,
        verdict=report.verdict,
        feedback=report.feedback,
        screenshots=screenshots,
        report=report,
        snapshot_hash=bundle.content_hash(),
    )


def _run_task(task: TaskSpec, ctx: ProjectContext, procedural: bool, task_tag: str) -> PipelineResult:
    attempts: list[PipelineAttempt] = []
    prior: Optional[PriorAttempt] = None
    for index in range(1, ctx.config.max_code_attempts + 1):
        attempt = run_single_attempt(
            task, ctx, index, prior=prior, procedural=procedural, task_tag=task_tag
        )
        attempts.append(attempt)
        if attempt.verdict is Verdict.PASS:
            return PipelineResult(verdict=Verdict.PASS, attempts=attempts)
        prior = PriorAttempt(
            bundle=attempt.bundle, layout=attempt.layout, feedback=attempt.feedback
        )
    return PipelineResult(verdict=Verdict.FAIL, attempts=attempts)


def run_code_task(task: TaskSpec, ctx: ProjectContext, task_tag: str = "task") -> PipelineResult:
    if task.submodule not in ("code_generator", "procedural_mesh"):
        raise PreconditionViolation(f"not a coding submodule: {task.submodule}")
    return _run_task(task, ctx, procedural=task.submodule == "procedural_mesh",
                     task_tag=task_tag)


def run_procedural_mesh_task(task: TaskSpec, ctx: ProjectContext,
                             task_tag: str = "task") -> PipelineResult:
    return _run_task(task, ctx, procedural=True, task_tag=task_tag)

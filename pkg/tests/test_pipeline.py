"""Code-generation pipeline state machine, traced against scripted mocks."""

import pytest

from plangarden.codegen import (
    PipelineAttempt,
    ProjectContext,
    Stage,
    Verdict,
    run_code_task,
    run_procedural_mesh_task,
    run_single_attempt,
)
from plangarden.engine import CompileReport, MockEngine, MockScenario, RunOutcome, ScriptedRun
from plangarden.garden import GardenConfig, SubmoduleDescriptor
from plangarden.planner import TaskSpec
from plangarden.providers import ReplayProvider

ROSTER = (
    SubmoduleDescriptor("code_generator", "writes actor code"),
    SubmoduleDescriptor("procedural_mesh", "writes mesh code"),
)

CODE_RESPONSE = """\
```cpp
// FILE: SheepActor.h
class ASheepActor {};
```
"""

LAYOUT_RESPONSE = """\
```json
{"actors": [{"class": "SheepActor", "position": [0,0,0], "rotation": [0,0,0],
             "scale": [1,1,1], "properties": {}}]}
```
"""


def make_ctx(tmp_path, provider, scenario):
    return ProjectContext(
        provider=provider,
        engine=MockEngine(tmp_path, scenario),
        workspace=tmp_path,
        config=GardenConfig(max_code_attempts=3, submodule_roster=ROSTER),
        starter_catalog=("StarterGrass", "StarterRock"),
    )


def code_task():
    return TaskSpec(
        leaf_id=1,
        submodule="code_generator",
        prompt_parts={"actor": "Write a sheep actor.", "spawner": "Place one sheep."},
        order_index=0,
    )


def mesh_task():
    return TaskSpec(
        leaf_id=1,
        submodule="procedural_mesh",
        prompt_parts={"description": "hilly terrain with smooth noise"},
        order_index=0,
    )


def test_compile_fail_then_pass_traces_state_machine(tmp_path):
    """Hand-traced: attempt 1 fails at compile with compile feedback; attempt 2
    compiles, runs, and passes visual evaluation."""
    provider = ReplayProvider(
        {
            "code_generator": [CODE_RESPONSE, CODE_RESPONSE],
            "layout_generator": [LAYOUT_RESPONSE],
            "compile_eval": ["VERDICT: FAIL\nMissing include in SheepActor.h."],
            "visual_eval": ["VERDICT: PASS"],
        }
    )
    scenario = MockScenario(
        compiles=[CompileReport(False, "error C2065"), CompileReport(True, "ok")],
        runs=[ScriptedRun()],
    )
    result = run_code_task(code_task(), make_ctx(tmp_path, provider, scenario))

    assert result.verdict is Verdict.PASS
    assert len(result.attempts) == 2
    first, second = result.attempts
    assert first.stage_reached is Stage.GENERATED
    assert first.report.source_stage.value == "Compile"
    assert first.feedback == "Missing include in SheepActor.h."
    assert second.stage_reached is Stage.VISUALLY_EVALUATED
    assert second.verdict is Verdict.PASS
    assert len(second.screenshots) == 6


def test_compile_fails_forever_respects_bound(tmp_path):
    provider = ReplayProvider(
        {
            "code_generator": [CODE_RESPONSE] * 3,
            "compile_eval": ["VERDICT: FAIL\nstill broken"] * 3,
        }
    )
    scenario = MockScenario(compiles=[CompileReport(False, "error")] * 3)
    result = run_code_task(code_task(), make_ctx(tmp_path, provider, scenario))
    assert result.verdict is Verdict.FAIL
    assert len(result.attempts) == 3
    assert [a.index for a in result.attempts] == [1, 2, 3]


def test_screenshots_are_exactly_six(tmp_path):
    provider = ReplayProvider(
        {
            "code_generator": [CODE_RESPONSE],
            "layout_generator": [LAYOUT_RESPONSE],
            "visual_eval": ["VERDICT: PASS"],
        }
    )
    result = run_code_task(code_task(), make_ctx(tmp_path, provider, MockScenario.all_ok()))
    assert len(result.attempts[0].screenshots) == 6
    # and the vision request carried all six
    visual_requests = [r for r in provider.requests if r.role == "visual_eval"]
    assert visual_requests[0].image_count == 6


def test_prior_context_threaded_into_next_attempt(tmp_path):
    """Attempt 2's generation request must contain attempt 1's code, layout,
    task prompt, and feedback."""
    provider = ReplayProvider(
        {
            "code_generator": [CODE_RESPONSE, CODE_RESPONSE],
            "layout_generator": [LAYOUT_RESPONSE, LAYOUT_RESPONSE],
            "crash_eval": ["VERDICT: FAIL\nGuard the null pointer in Tick."],
            "visual_eval": ["VERDICT: PASS"],
        }
    )
    scenario = MockScenario(
        compiles=[CompileReport(True, "ok")] * 2,
        runs=[ScriptedRun(outcome=RunOutcome.CRASHED, crash_log="Access violation"),
              ScriptedRun()],
    )
    result = run_code_task(code_task(), make_ctx(tmp_path, provider, scenario))
    assert result.verdict is Verdict.PASS

    second_gen = [r for r in provider.requests if r.role == "code_generator"][1]
    body = second_gen.messages[0][1]
    assert "class ASheepActor" in body               # prior code
    assert '"SheepActor"' in body                    # prior layout
    assert "Guard the null pointer in Tick." in body  # feedback, verbatim
    assert "Write a sheep actor." in body            # task prompt


def test_placement_error_feeds_placement_eval(tmp_path):
    provider = ReplayProvider(
        {
            "code_generator": [CODE_RESPONSE],
            "layout_generator": [LAYOUT_RESPONSE.replace("SheepActor", "GhostActor")],
            "placement_eval": ["VERDICT: FAIL\nGhostActor does not exist; use SheepActor."],
        }
    )
    scenario = MockScenario(
        compiles=[CompileReport(True, "ok")],
        runs=[ScriptedRun(outcome=RunOutcome.PLACEMENT_ERROR)],
    )
    ctx = make_ctx(tmp_path, provider, scenario)
    ctx.config = GardenConfig(max_code_attempts=1, submodule_roster=ROSTER)
    result = run_code_task(code_task(), ctx)
    attempt = result.attempts[0]
    assert attempt.stage_reached is Stage.COMPILED
    assert attempt.report.source_stage.value == "Placement"
    assert "GhostActor" in attempt.feedback
    # the placement evaluator saw the engine's log excerpt naming the class
    placement_req = [r for r in provider.requests if r.role == "placement_eval"][0]
    assert "GhostActor" in placement_req.messages[0][1]


def test_unparseable_generation_counts_as_failed_attempt(tmp_path):
    provider = ReplayProvider({"code_generator": ["no code here, sorry"]})
    ctx = make_ctx(tmp_path, provider, MockScenario.all_ok())
    ctx.config = GardenConfig(max_code_attempts=1, submodule_roster=ROSTER)
    result = run_code_task(code_task(), ctx)
    assert result.verdict is Verdict.FAIL
    assert "no usable code files" in result.attempts[0].feedback


def test_procedural_mesh_uses_default_origin_layout(tmp_path):
    provider = ReplayProvider(
        {
            "code_generator": [
                "```cpp\n// FILE: TerrainActor.h\nclass ATerrainActor {};\n```"
            ],
            "visual_eval": ["VERDICT: PASS"],
        }
    )
    result = run_procedural_mesh_task(mesh_task(), make_ctx(tmp_path, provider,
                                                            MockScenario.all_ok()))
    assert result.verdict is Verdict.PASS
    layout = result.attempts[0].layout
    assert len(layout.actors) == 1
    actor = layout.actors[0]
    assert actor.class_name == "TerrainActor"
    assert actor.position == (0.0, 0.0, 0.0)
    assert actor.rotation == (0.0, 0.0, 0.0)
    assert actor.scale == (1.0, 1.0, 1.0)
    # no layout generator call happened
    assert all(r.role != "layout_generator" for r in provider.requests)


def test_procedural_prompt_includes_cube_example(tmp_path):
    provider = ReplayProvider(
        {
            "code_generator": [
                "```cpp\n// FILE: TerrainActor.h\nclass ATerrainActor {};\n```"
            ],
            "visual_eval": ["VERDICT: PASS"],
        }
    )
    run_procedural_mesh_task(mesh_task(), make_ctx(tmp_path, provider, MockScenario.all_ok()))
    gen = [r for r in provider.requests if r.role == "code_generator"][0]
    assert "CubeMeshActor" in gen.system_prompt


def test_procedural_compile_fail_to_bound(tmp_path):
    provider = ReplayProvider(
        {
            "code_generator": ["```cpp\n// FILE: T.h\nx\n```"] * 3,
            "compile_eval": ["VERDICT: FAIL\nnope"] * 3,
        }
    )
    scenario = MockScenario(compiles=[CompileReport(False, "err")] * 3)
    result = run_procedural_mesh_task(mesh_task(), make_ctx(tmp_path, provider, scenario))
    assert result.verdict is Verdict.FAIL
    assert len(result.attempts) == 3


def test_catalog_appears_in_generation_prompt(tmp_path):
    provider = ReplayProvider(
        {
            "code_generator": [CODE_RESPONSE],
            "layout_generator": [LAYOUT_RESPONSE],
            "visual_eval": ["VERDICT: PASS"],
        }
    )
    run_code_task(code_task(), make_ctx(tmp_path, provider, MockScenario.all_ok()))
    gen = [r for r in provider.requests if r.role == "code_generator"][0]
    assert "StarterGrass" in gen.system_prompt


def test_registered_assets_forwarded_into_generation_prompt(tmp_path):
    from plangarden.assets import AssetOrigin, AssetRecord, AssetRegistry

    provider = ReplayProvider(
        {
            "code_generator": [CODE_RESPONSE],
            "layout_generator": [LAYOUT_RESPONSE],
            "visual_eval": ["VERDICT: PASS"],
        }
    )
    ctx = make_ctx(tmp_path, provider, MockScenario.all_ok())
    registry = AssetRegistry(tmp_path)
    (tmp_path / "sheep.glb").write_bytes(b"glTF")
    registry.register(AssetRecord("sheep", "a low-poly sheep", "sheep.glb",
                                  AssetOrigin.DOWNLOADED), created_by=1)
    ctx.registry = registry
    run_code_task(code_task(), ctx)
    gen = [r for r in provider.requests if r.role == "code_generator"][0]
    assert "a low-poly sheep" in gen.system_prompt


def test_stage_monotonicity_within_attempts(tmp_path):
    order = [Stage.GENERATED, Stage.COMPILED, Stage.PLACED, Stage.RAN,
             Stage.VISUALLY_EVALUATED]
    provider = ReplayProvider(
        {
            "code_generator": [CODE_RESPONSE] * 3,
            "layout_generator": [LAYOUT_RESPONSE] * 2,
            "compile_eval": ["VERDICT: FAIL\na"],
            "crash_eval": ["VERDICT: FAIL\nb"],
            "visual_eval": ["VERDICT: PASS"],
        }
    )
    scenario = MockScenario(
        compiles=[CompileReport(False, "e"), CompileReport(True, "ok"),
                  CompileReport(True, "ok")],
        runs=[ScriptedRun(outcome=RunOutcome.CRASHED, crash_log="boom"), ScriptedRun()],
    )
    result = run_code_task(code_task(), make_ctx(tmp_path, provider, scenario))
    reached = [a.stage_reached for a in result.attempts]
    assert reached == [Stage.GENERATED, Stage.PLACED, Stage.VISUALLY_EVALUATED]
    for stage in reached:
        assert stage in order

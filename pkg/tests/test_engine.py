"""Mock engine determinism and report invariants."""

import pytest

from plangarden import errors
from plangarden.codegen import CodeBundle
from plangarden.engine import (
    CompileReport,
    MockEngine,
    MockScenario,
    RunOutcome,
    RunReport,
    ScriptedRun,
)
from plangarden.layout import LayoutActor, LayoutSpec, default_origin_layout


def bundle(*names):
    return CodeBundle(files={f"{n}.h": f"class A{n} {{}};\n" for n in names})


def test_scripted_compile_success(tmp_path):
    engine = MockEngine(tmp_path, MockScenario(compiles=[CompileReport(True, "ok")]))
    assert engine.compile_project(bundle("Sheep")).success


def test_scripted_compile_failure_log(tmp_path):
    engine = MockEngine(
        tmp_path, MockScenario(compiles=[CompileReport(False, "error C2065")])
    )
    report = engine.compile_project(bundle("Sheep"))
    assert not report.success
    assert report.log == "error C2065"


def test_compile_entries_consumed_fifo(tmp_path):
    engine = MockEngine(
        tmp_path,
        MockScenario(
            compiles=[CompileReport(False, "first"), CompileReport(True, "second")]
        ),
    )
    assert engine.compile_project(bundle("A")).log == "first"
    assert engine.compile_project(bundle("A")).log == "second"


def test_scenario_exhaustion_is_explicit(tmp_path):
    engine = MockEngine(tmp_path, MockScenario(compiles=[CompileReport(True, "ok")]))
    engine.compile_project(bundle("A"))
    with pytest.raises(errors.ScenarioExhausted):
        engine.compile_project(bundle("A"))


def test_run_ran_produces_six_screenshots(tmp_path):
    engine = MockEngine(tmp_path, MockScenario.all_ok())
    engine.compile_project(bundle("Sheep"))
    report = engine.run_simulation(default_origin_layout("Sheep"), capture_tag="t1/a1")
    assert report.outcome == RunOutcome.RAN
    assert len(report.screenshots) == 6
    for rel in report.screenshots:
        data = (tmp_path / rel).read_bytes()
        assert data.startswith(b"P6\n16 9\n")


def test_screenshots_deterministic(tmp_path):
    engine = MockEngine(tmp_path, MockScenario.all_ok())
    engine.compile_project(bundle("Sheep"))
    r1 = engine.run_simulation(default_origin_layout("Sheep"), capture_tag="t/a")
    first = [(tmp_path / s).read_bytes() for s in r1.screenshots]
    r2 = engine.run_simulation(default_origin_layout("Sheep"), capture_tag="t/a")
    second = [(tmp_path / s).read_bytes() for s in r2.screenshots]
    assert first == second


def test_placement_error_names_unknown_class(tmp_path):
    engine = MockEngine(
        tmp_path, MockScenario(runs=[ScriptedRun(outcome=RunOutcome.PLACEMENT_ERROR)],
                               default_ok=True)
    )
    engine.compile_project(bundle("KnownActor"))
    layout = LayoutSpec(actors=[LayoutActor(class_name="GhostActor")])
    report = engine.run_simulation(layout)
    assert report.outcome == RunOutcome.PLACEMENT_ERROR
    assert "GhostActor" in report.placement_log_excerpt


def test_crash_report(tmp_path):
    engine = MockEngine(
        tmp_path,
        MockScenario(runs=[ScriptedRun(outcome=RunOutcome.CRASHED, crash_log="nullptr")],
                     default_ok=True),
    )
    engine.compile_project(bundle("A"))
    report = engine.run_simulation(default_origin_layout("A"))
    assert report.outcome == RunOutcome.CRASHED
    assert report.crash_log == "nullptr"
    assert report.screenshots == []


def test_import_mesh(tmp_path):
    engine = MockEngine(tmp_path, MockScenario.all_ok())
    mesh = tmp_path / "sheep.glb"
    mesh.write_bytes(b"glTF")
    ref = engine.import_mesh(mesh)
    assert ref.endswith("sheep")
    assert engine.imported == [str(mesh)]


def test_import_missing_file(tmp_path):
    engine = MockEngine(tmp_path, MockScenario.all_ok())
    with pytest.raises(errors.MissingFile):
        engine.import_mesh(tmp_path / "ghost.glb")


def test_import_unsupported_format(tmp_path):
    engine = MockEngine(tmp_path, MockScenario.all_ok())
    bad = tmp_path / "sheep.tar"
    bad.write_bytes(b"x")
    with pytest.raises(errors.UnsupportedFormat):
        engine.import_mesh(bad)


def test_run_report_invariants():
    with pytest.raises(ValueError):
        RunReport(outcome=RunOutcome.RAN, screenshots=["one"])
    with pytest.raises(ValueError):
        RunReport(outcome=RunOutcome.CRASHED)
    with pytest.raises(ValueError):
        CompileReport(success=False, log="")


def test_user_session_recorded(tmp_path):
    engine = MockEngine(tmp_path, MockScenario.all_ok())
    handle = engine.launch_user_session(bundle("A"), default_origin_layout("A"))
    assert handle == "session-1"
    assert engine.user_sessions[0]["files"] == bundle("A").files

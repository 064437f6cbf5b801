"""File extraction from model output and evaluator verdict parsing."""

import pytest

from plangarden import errors
from plangarden.codegen import (
    CodeBundle,
    SourceStage,
    Verdict,
    eval_compile_log,
    eval_crash_log,
    eval_visual,
    parse_code_files,
    parse_verdict,
)
from plangarden.providers import ReplayProvider

TWO_FILE_RESPONSE = """\
Here are the files you asked for.

```cpp
// FILE: SheepActor.h
#pragma once
class ASheepActor {};
```

```cpp
// FILE: SheepActor.cpp
#include "SheepActor.h"
```
"""


def test_parse_two_annotated_fences():
    bundle = parse_code_files(TWO_FILE_RESPONSE)
    assert list(bundle.files) == ["SheepActor.h", "SheepActor.cpp"]
    assert "#pragma once" in bundle.files["SheepActor.h"]
    # header lines are annotation, not file content
    assert "// FILE:" not in bundle.files["SheepActor.h"]


def test_parse_heading_annotation():
    text = "### GrassActor.h\n```cpp\nclass AGrassActor {};\n```\n"
    bundle = parse_code_files(text)
    assert list(bundle.files) == ["GrassActor.h"]


def test_traversal_path_rejected():
    text = "```cpp\n// FILE: ../escape.h\nboom\n```"
    with pytest.raises(errors.PathViolation):
        parse_code_files(text)


def test_absolute_path_rejected():
    text = "```cpp\n// FILE: /etc/passwd\nboom\n```"
    with pytest.raises(errors.PathViolation):
        parse_code_files(text)


def test_prose_only_response():
    with pytest.raises(errors.NoFilesFound):
        parse_code_files("I think you should write the code yourself.")


def test_unannotated_fences_ignored():
    text = "```cpp\nint snippet = 1;\n```\n\n```cpp\n// FILE: Real.h\nreal\n```"
    bundle = parse_code_files(text)
    assert list(bundle.files) == ["Real.h"]


def test_primary_class_from_first_file():
    bundle = parse_code_files(TWO_FILE_RESPONSE)
    assert bundle.primary_class() == "SheepActor"


# --- verdict parsing -----------------------------------------------------------

def test_parse_verdict_fail_with_feedback():
    verdict, feedback = parse_verdict("VERDICT: FAIL\nUndeclared identifier 'USheepMesh'.")
    assert verdict is Verdict.FAIL
    assert feedback == "Undeclared identifier 'USheepMesh'."


def test_parse_verdict_pass():
    verdict, feedback = parse_verdict("VERDICT: PASS")
    assert verdict is Verdict.PASS
    assert feedback == ""


def test_parse_verdict_first_matching_line_wins():
    verdict, _ = parse_verdict("thinking...\nVERDICT: PASS\nVERDICT: FAIL")
    assert verdict is Verdict.PASS


def test_parse_verdict_missing():
    verdict, feedback = parse_verdict("the code looks fine to me")
    assert verdict is None
    assert feedback == "the code looks fine to me"


# --- evaluators ------------------------------------------------------------------

def bundle():
    return CodeBundle(files={"A.h": "class A {};\n"})


def test_eval_compile_scripted_fail():
    provider = ReplayProvider({"compile_eval": ["VERDICT: FAIL\nUndeclared identifier x."]})
    report = eval_compile_log(provider, "error C2065: x", bundle(), "task")
    assert report.verdict is Verdict.FAIL
    assert report.feedback == "Undeclared identifier x."
    assert report.source_stage is SourceStage.COMPILE


def test_eval_compile_pass_on_warnings():
    provider = ReplayProvider({"compile_eval": ["VERDICT: PASS"]})
    report = eval_compile_log(provider, "warning C4100 only", bundle(), "task")
    assert report.verdict is Verdict.PASS


def test_eval_compile_degrades_on_unparseable_output():
    provider = ReplayProvider({"compile_eval": ["no verdict here at all"]})
    report = eval_compile_log(provider, "error C2065: raw log body", bundle(), "task")
    assert report.verdict is Verdict.FAIL
    assert "error C2065" in report.feedback


def test_eval_compile_degrades_on_provider_exhaustion():
    provider = ReplayProvider({})
    report = eval_compile_log(provider, "error: broken", bundle(), "task")
    assert report.verdict is Verdict.FAIL
    assert "error: broken" in report.feedback


def test_eval_crash_empty_log():
    provider = ReplayProvider({})
    report = eval_crash_log(provider, "   ", bundle(), None, "task")
    assert report.verdict is Verdict.FAIL
    assert report.feedback == "no diagnostic available"
    assert report.source_stage is SourceStage.CRASH
    assert provider.requests == []  # degenerate input short-circuits


def test_eval_crash_scripted_diagnosis():
    provider = ReplayProvider(
        {"crash_eval": ["VERDICT: FAIL\nNull reference in Tick; guard the pointer."]}
    )
    report = eval_crash_log(provider, "Access violation 0x0", bundle(), None, "task")
    assert "guard the pointer" in report.feedback


def test_eval_visual_requires_six_screenshots():
    provider = ReplayProvider({"visual_eval": ["VERDICT: PASS"]})
    with pytest.raises(errors.PreconditionViolation):
        eval_visual(provider, [b"x"] * 5, "log", bundle(), None, "task")


def test_eval_visual_pass():
    provider = ReplayProvider({"visual_eval": ["VERDICT: PASS"]})
    report = eval_visual(provider, [b"x"] * 6, "log", bundle(), None, "task")
    assert report.verdict is Verdict.PASS
    assert provider.requests[-1].image_count == 6


def test_eval_visual_through_live_provider_sends_six_image_parts():
    import json
    import threading
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

    from plangarden.providers import LiveProvider

    bodies = []

    class Recorder(BaseHTTPRequestHandler):
        def do_POST(self):
            body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            bodies.append(body)
            data = json.dumps({"choices": [{"message": {"content": "VERDICT: PASS"},
                                            "finish_reason": "stop"}]}).encode()
            self.send_response(200)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Recorder)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    try:
        provider = LiveProvider(f"http://127.0.0.1:{server.server_port}",
                                backoff_base=0.01)
        report = eval_visual(provider, [b"shot"] * 6, "log", bundle(), None, "task")
        assert report.verdict is Verdict.PASS
        content = bodies[-1]["messages"][-1]["content"]
        image_parts = [p for p in content if p["type"] == "image_url"]
        assert len(image_parts) == 6
    finally:
        server.shutdown()

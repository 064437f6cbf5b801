"""Versioned prompt templates for every model-facing role.

Templates are plain format strings assembled by the planner and pipeline
modules. Response grammars the parsers rely on:

  broad/sub planner   OUTLINE: <one line>   then numbered steps `1. ...`
  leaf markers        `[LEAF: <submodule>]` appended to a step line
  task generator      ACTOR:/SPAWNER: sections, or a bare description
  evaluators          first line matching `VERDICT: PASS|FAIL`, feedback after
  code generator      fenced blocks with `// FILE: <path>` headers
  layout generator    one JSON document with an "actors" array
"""

from __future__ import annotations

PROMPT_VERSION = 2

ROLE_BROAD_PLANNER = "broad_planner"
ROLE_SUB_PLANNER = "sub_planner"
ROLE_ROSTER_ASSIGNMENT = "roster_assignment"
ROLE_TASK_GENERATOR = "task_generator"
ROLE_CODE_GENERATOR = "code_generator"
ROLE_LAYOUT_GENERATOR = "layout_generator"
ROLE_COMPILE_EVAL = "compile_eval"
ROLE_PLACEMENT_EVAL = "placement_eval"
ROLE_CRASH_EVAL = "crash_eval"
ROLE_VISUAL_EVAL = "visual_eval"


def roster_block(roster) -> str:
    return "\n".join(f"- {entry.name}: {entry.description}" for entry in roster)


BROAD_PLANNER_SYSTEM = """\
You are the broad planner of a simulation-building assistant. The user gives
you a single open-ended idea: a dream, a memory, or a rough game sketch.
Reformulate it as an outline for a small 3D simulation built inside a game
engine, then write a broad, high-level implementation plan.

Available implementation submodules (plans must eventually bottom out in
tasks one of these can perform):
{roster}

Respond in exactly this format:
OUTLINE: <one-line reformulation of the idea as a buildable simulation>
1. <first broad step>
2. <second broad step>
...

Produce at most {max_branching} steps. The plan tree may grow to depth
{max_depth} at most, so keep top-level steps broad.
{disclaimer}"""

SUB_PLANNER_SYSTEM = """\
You are the sub-planner of a simulation-building assistant. You are shown the
full plan tree grown so far and one target step. Re-articulate the target in
more detail and break it into a numbered list of sub-steps.

Available implementation submodules:
{roster}

If a sub-step is concrete enough to hand to one submodule directly, mark it a
leaf by appending `[LEAF: <submodule_name>]` to its line. Every branch must
ultimately terminate in leaf steps. Use at most {max_branching} sub-steps;
the tree may not exceed depth {max_depth}.

Respond with only the numbered list:
1. <sub-step> [LEAF: <submodule_name>]  (marker only where applicable)
2. <sub-step>
{disclaimer}"""

SUB_PLANNER_USER = """\
Current plan tree:
{tree}

Expand this step into sub-steps: "{target}"
"""

ROSTER_ASSIGNMENT_SYSTEM = """\
You assign implementation steps to submodules. Reply with exactly one
submodule name from this roster, nothing else:
{roster}"""

ROSTER_ASSIGNMENT_USER = 'Which submodule should perform this step: "{step}"'

TASK_GENERATOR_CODE_SYSTEM = """\
You turn one plan leaf into a concrete prompt package for the code-writing
submodule, which generates engine actor classes plus a spawn layout.

Respond in exactly this format:
ACTOR:
<instructions for the actor code generator: classes to write, behavior,
properties to expose>
SPAWNER:
<instructions for the layout generator: what to place where, scales, counts>
{disclaimer}"""

TASK_GENERATOR_PROCEDURAL_SYSTEM = """\
You turn one plan leaf into instructions for the procedural-mesh submodule,
which writes actor code that builds a mesh in code (terrain, structures).
Respond with a single detailed description of the mesh to generate: geometry,
dimensions, surface character. No headings.
{disclaimer}"""

TASK_GENERATOR_DOWNLOAD_SYSTEM = """\
You turn one plan leaf into a retrieval query for the asset-download
submodule, which matches text against a database of existing 3D assets.
Respond with one concise description of the desired asset (a short noun
phrase, e.g. "a low-poly sheep"). No headings, no extra prose.
{disclaimer}"""

TASK_GENERATOR_GENERATE_SYSTEM = """\
You turn one plan leaf into a prompt for the generative-mesh submodule, which
chains a text-to-image model into an image-to-3D model.
Respond with one detailed visual description of the object to create. No
headings, no extra prose.
{disclaimer}"""

TASK_GENERATOR_USER = """\
Plan tree context:
{tree}

Leaf step to translate: "{leaf_text}"
Target submodule: {submodule}
"""

# A minimal procedural cube built inside an actor, included verbatim in the
# procedural-mesh system prompt as a worked example of the expected shape.
PROCEDURAL_CUBE_EXAMPLE = """\
// FILE: CubeMeshActor.h
#pragma once
#include "ProceduralMeshComponent.h"

class ACubeMeshActor : public AActor {
public:
    ACubeMeshActor();
    void BuildCube(float Size);
private:
    UProceduralMeshComponent* Mesh;
};

// FILE: CubeMeshActor.cpp
#include "CubeMeshActor.h"

ACubeMeshActor::ACubeMeshActor() {
    Mesh = CreateDefaultSubobject<UProceduralMeshComponent>(TEXT("Mesh"));
    RootComponent = Mesh;
    BuildCube(100.0f);
}

void ACubeMeshActor::BuildCube(float Size) {
    TArray<FVector> Vertices;
    TArray<int32> Triangles;
    const float H = Size * 0.5f;
    Vertices = { {-H,-H,-H}, {H,-H,-H}, {H,H,-H}, {-H,H,-H},
                 {-H,-H, H}, {H,-H, H}, {H,H, H}, {-H,H, H} };
    Triangles = { 0,1,2, 0,2,3,  4,6,5, 4,7,6,  0,4,5, 0,5,1,
                  1,5,6, 1,6,2,  2,6,7, 2,7,3,  3,7,4, 3,4,0 };
    Mesh->CreateMeshSection(0, Vertices, Triangles, {}, {}, {}, {}, false);
}
"""

CODE_GENERATOR_SYSTEM = """\
You write complete C++ actor classes for a game engine simulation. Units are
centimeters. Do not write or modify any camera class; a protected capture
camera already exists.

Assets available for reference by name:
{catalog}

Output every file as a fenced code block whose first line is a header
comment `// FILE: <relative path>`. Emit complete files only, no fragments.
{disclaimer}"""

PROCEDURAL_MESH_SYSTEM = """\
You write complete C++ actor classes that build procedural meshes in code for
a game engine simulation. Units are centimeters. Here is a worked example of
a procedural cube actor in the expected format:

{cube_example}

Assets available for reference by name:
{catalog}

Output every file as a fenced code block whose first line is a header
comment `// FILE: <relative path>`. Emit complete files only, no fragments.
{disclaimer}"""

CODE_GENERATOR_USER = """\
Task:
{actor_prompt}
{history}"""

CODE_HISTORY_BLOCK = """
Previous attempt did not succeed. Prior code:
{prior_files}

Prior layout:
{prior_layout}

Feedback to address:
{feedback}
"""

LAYOUT_GENERATOR_SYSTEM = """\
You place actor instances in a scene by writing a layout document. Engine
units are centimeters; rotations are degrees; scale is unitless.

Respond with a single JSON document of this exact shape:
{{
  "actors": [
    {{"class": "<actor class name>",
      "position": [x, y, z],
      "rotation": [pitch, yaw, roll],
      "scale": [x, y, z],
      "properties": {{}} }}
  ]
}}
Reference only classes that exist in the generated code or the asset list.
{disclaimer}"""

LAYOUT_GENERATOR_USER = """\
Generated code files:
{files}

Placement instructions:
{spawner_prompt}
"""

_EVAL_FORMAT = """\
Respond in exactly this format:
VERDICT: PASS or VERDICT: FAIL
<feedback: what went wrong and concrete guidance to fix it; required on FAIL>"""

COMPILE_EVAL_SYSTEM = (
    "You read compiler output for generated game actor code and judge whether "
    "compilation succeeded. Warnings alone are not failures.\n" + _EVAL_FORMAT
)

COMPILE_EVAL_USER = """\
Compilation log:
{log}

Generated code:
{files}

Original task:
{task_prompt}
"""

PLACEMENT_EVAL_SYSTEM = (
    "You read the editor log section produced by the scene initialization "
    "script and diagnose why actor placement failed.\n" + _EVAL_FORMAT
)

PLACEMENT_EVAL_USER = """\
Init script log section:
{log}

Layout document:
{layout}

Generated code:
{files}

Original task:
{task_prompt}
"""

CRASH_EVAL_SYSTEM = (
    "You read an engine crash log produced while running generated actor code "
    "and diagnose the runtime fault.\n" + _EVAL_FORMAT
)

CRASH_EVAL_USER = """\
Crash log:
{log}

Layout document:
{layout}

Generated code:
{files}

Original task:
{task_prompt}
"""

VISUAL_EVAL_SYSTEM = (
    "You judge screenshots of the first seconds of a running simulation "
    "against the task that produced it. Judge both function and appearance.\n"
    + _EVAL_FORMAT
)

VISUAL_EVAL_USER = """\
Runtime log:
{log}

Layout document:
{layout}

Generated code:
{files}

Original task:
{task_prompt}

The attached images are 6 screenshots captured over the first 6 seconds.
"""


def format_disclaimer(disclaimer: str | None) -> str:
    return f"\n{disclaimer.strip()}\n" if disclaimer else ""

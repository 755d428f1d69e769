"""The agent-centric action DSL: parsing, diagnostics, validation, compilation.

Run: python demos/04_action_dsl.py
"""
from demoforge.actionlang import compile as compile_program
from demoforge.actionlang import parse, pretty_print, validate
from demoforge.errors import DslSyntaxError
from demoforge.geometry import Pose6D
from demoforge.world import DEFAULT_WORKSPACE

source = """
# approach, close, and retreat with a quarter turn
move_rel(dz=-0.05);
gripper(close);
move_rel(dz=0.10);
rotate(yaw=90);   # the classic
pause(0.5)
"""
program = parse(source)
print("parsed", len(program.statements), "statements")
print("canonical form:", pretty_print(program))

for bad in ("move_rel(dz=)", "fly(dz=0.1)", "gripper(shut)"):
    try:
        parse(bad)
    except DslSyntaxError as e:
        print(f"  {bad!r:24s} -> {e}")

home = Pose6D((0.0, -0.25, 0.30), (0.0, 1.0, 0.0, 0.0))
report = validate(program, DEFAULT_WORKSPACE, home)
print("\nvalidation ok:", report.ok)

bad_report = validate(parse("move_rel(dx=0.9); move_abs(z=2.0)"), DEFAULT_WORKSPACE, home)
for v in bad_report.violations:
    print(f"  violation {v.kind} at line {v.span.line} col {v.span.col}: {v.detail}")

waypoints = compile_program(program, home)
print("\ncompiled waypoints:")
for wp in waypoints:
    name = type(wp).__name__
    detail = getattr(wp, "pose", None) or getattr(wp, "action", None) or getattr(wp, "seconds", "")
    if hasattr(wp, "pose"):
        detail = tuple(round(c, 3) for c in wp.pose.position)
    print(f"  {name:14s} {detail}")

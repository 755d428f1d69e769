"""The agent-centric action DSL: grammar, parser, validator, waypoint compiler.

Grammar (whitespace-insensitive, `#` comments to end of line)::

    program   := statement (";" statement)* [";"]
    statement := name "(" [arg ("," arg)*] ")"
    name      := "move_rel" | "move_abs" | "rotate" | "gripper" | "pause"
    arg       := key "=" value          (move_rel: dx dy dz; move_abs: x y z;
                                         rotate: roll pitch yaw)
               | "open" | "close"       (gripper only, exactly one)
               | value                  (pause only, seconds)
    value     := ["-"] digits ["." digits]

Units are meters and degrees in source text; omitted keys default to 0.
Rotations compose onto the current orientation as intrinsic roll(x) ->
pitch(y) -> yaw(z).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .errors import DslSyntaxError
from .geometry import Pose6D, quat_angle, quat_from_rpy_degrees, quat_mul, quat_normalize

MAX_STEP_TRANSLATION = 0.5
MAX_STEP_ROTATION_DEG = 180.0

STATEMENT_KEYS = {
    "move_rel": ("dx", "dy", "dz"),
    "move_abs": ("x", "y", "z"),
    "rotate": ("roll", "pitch", "yaw"),
}


@dataclass(frozen=True)
class Span:
    line: int
    col: int


@dataclass(frozen=True)
class MoveRel:
    dx: float = 0.0
    dy: float = 0.0
    dz: float = 0.0
    span: Span = field(default=Span(1, 1), compare=False)


@dataclass(frozen=True)
class MoveAbs:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    span: Span = field(default=Span(1, 1), compare=False)


@dataclass(frozen=True)
class Rotate:
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0
    span: Span = field(default=Span(1, 1), compare=False)


@dataclass(frozen=True)
class Gripper:
    action: str = "open"  # open | close
    span: Span = field(default=Span(1, 1), compare=False)


@dataclass(frozen=True)
class Pause:
    seconds: float = 0.0
    span: Span = field(default=Span(1, 1), compare=False)


Statement = MoveRel | MoveAbs | Rotate | Gripper | Pause


@dataclass(frozen=True)
class ActionProgram:
    statements: tuple[Statement, ...]

    def __post_init__(self):
        if not self.statements:
            raise DslSyntaxError("program must contain at least one statement", 1, 1)
        for stmt in self.statements:
            for name in stmt.__dataclass_fields__:
                v = getattr(stmt, name)
                if isinstance(v, float) and not math.isfinite(v):
                    raise DslSyntaxError(
                        f"non-finite value in {type(stmt).__name__}", stmt.span.line, stmt.span.col
                    )


_TOKEN_RE = re.compile(
    r"""(?P<ws>[ \t\r]+)
      | (?P<comment>\#[^\n]*)
      | (?P<newline>\n)
      | (?P<number>-?[0-9]+(?:\.[0-9]+)?)
      | (?P<word>[A-Za-z_][A-Za-z_0-9]*)
      | (?P<sym>[();,=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number | word | sym | eof
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DslSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind == "newline":
            line += 1
            col = 1
        elif kind in ("ws", "comment"):
            col += len(value)
        else:
            tokens.append(_Token(kind if kind != "sym" else value, value, line, col))
            col += len(value)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, expected: tuple[str, ...]) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            what = tok.text if tok.kind != "eof" else "end of input"
            raise DslSyntaxError(f"unexpected {what!r}", tok.line, tok.col, expected)
        return self.next()

    def parse_program(self) -> ActionProgram:
        statements = [self.parse_statement()]
        while self.peek().kind == ";":
            self.next()
            if self.peek().kind == "eof":
                break
            statements.append(self.parse_statement())
        tok = self.peek()
        if tok.kind != "eof":
            raise DslSyntaxError(f"unexpected {tok.text!r}", tok.line, tok.col, (";",))
        return ActionProgram(tuple(statements))

    def parse_statement(self) -> Statement:
        name_tok = self.expect("word", ("statement name",))
        name = name_tok.text
        span = Span(name_tok.line, name_tok.col)
        if name not in ("move_rel", "move_abs", "rotate", "gripper", "pause"):
            raise DslSyntaxError(
                f"unknown statement {name!r}", name_tok.line, name_tok.col,
                ("move_rel", "move_abs", "rotate", "gripper", "pause"),
            )
        self.expect("(", ("(",))
        if name == "gripper":
            stmt = self._parse_gripper(span)
        elif name == "pause":
            stmt = self._parse_pause(span)
        else:
            stmt = self._parse_kv_statement(name, span)
        self.expect(")", (")",))
        return stmt

    def _parse_gripper(self, span: Span) -> Gripper:
        tok = self.expect("word", ("open", "close"))
        if tok.text not in ("open", "close"):
            raise DslSyntaxError(
                f"invalid gripper action {tok.text!r}", tok.line, tok.col, ("open", "close")
            )
        return Gripper(tok.text, span=span)

    def _parse_pause(self, span: Span) -> Pause:
        tok = self.expect("number", ("number",))
        return Pause(float(tok.text), span=span)

    def _parse_kv_statement(self, name: str, span: Span) -> Statement:
        keys = STATEMENT_KEYS[name]
        values: dict[str, float] = {}
        if self.peek().kind != ")":
            while True:
                key_tok = self.expect("word", keys)
                if key_tok.text not in keys:
                    raise DslSyntaxError(
                        f"invalid key {key_tok.text!r} for {name}", key_tok.line,
                        key_tok.col, keys,
                    )
                if key_tok.text in values:
                    raise DslSyntaxError(
                        f"duplicate key {key_tok.text!r}", key_tok.line, key_tok.col
                    )
                self.expect("=", ("=",))
                num_tok = self.expect("number", ("number",))
                values[key_tok.text] = float(num_tok.text)
                if self.peek().kind != ",":
                    break
                self.next()
        cls = {"move_rel": MoveRel, "move_abs": MoveAbs, "rotate": Rotate}[name]
        return cls(**{k: values.get(k, 0.0) for k in keys}, span=span)


def parse(text: str) -> ActionProgram:
    """Parse DSL text into an ActionProgram; raises DslSyntaxError with location."""
    tokens = _tokenize(text)
    if tokens[0].kind == "eof":
        raise DslSyntaxError("empty program", 1, 1, ("statement name",))
    return _Parser(tokens).parse_program()


def _format_number(v: float) -> str:
    """Grammar-compatible decimal rendering that round-trips the float exactly."""
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    r = repr(v)
    if "e" not in r and "E" not in r:
        return r
    s = format(v, ".17f").rstrip("0")
    return s + "0" if s.endswith(".") else s


def pretty_print(program: ActionProgram) -> str:
    out = []
    for stmt in program.statements:
        if isinstance(stmt, MoveRel):
            args = [f"{k}={_format_number(getattr(stmt, k))}" for k in ("dx", "dy", "dz")]
            out.append(f"move_rel({', '.join(args)})")
        elif isinstance(stmt, MoveAbs):
            args = [f"{k}={_format_number(getattr(stmt, k))}" for k in ("x", "y", "z")]
            out.append(f"move_abs({', '.join(args)})")
        elif isinstance(stmt, Rotate):
            args = [f"{k}={_format_number(getattr(stmt, k))}" for k in ("roll", "pitch", "yaw")]
            out.append(f"rotate({', '.join(args)})")
        elif isinstance(stmt, Gripper):
            out.append(f"gripper({stmt.action})")
        else:
            out.append(f"pause({_format_number(stmt.seconds)})")
    return "; ".join(out)


@dataclass(frozen=True)
class Violation:
    kind: str  # out_of_workspace | step_too_large | rotation_too_large
    span: Span
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(program: ActionProgram, workspace, current: Pose6D) -> ValidationReport:
    """Statement-by-statement pose bookkeeping against the workspace box.

    Flags poses leaving the workspace, single translations beyond 0.5 m, and
    per-statement rotation magnitude (euclidean norm of roll/pitch/yaw) beyond
    180 degrees. Does not mutate anything; the engine rejects programs whose
    report is not ok.
    """
    (lx, ly, lz), (hx, hy, hz) = workspace
    pos = list(current.position)
    violations = []
    for stmt in program.statements:
        if isinstance(stmt, (MoveRel, MoveAbs)):
            if isinstance(stmt, MoveRel):
                step = (stmt.dx, stmt.dy, stmt.dz)
                new = [pos[0] + stmt.dx, pos[1] + stmt.dy, pos[2] + stmt.dz]
            else:
                new = [stmt.x, stmt.y, stmt.z]
                step = (new[0] - pos[0], new[1] - pos[1], new[2] - pos[2])
            if math.sqrt(sum(c * c for c in step)) > MAX_STEP_TRANSLATION:
                violations.append(
                    Violation("step_too_large", stmt.span,
                              f"translation {math.sqrt(sum(c * c for c in step)):.3f} m")
                )
            pos = new
            if not (lx <= pos[0] <= hx and ly <= pos[1] <= hy and lz <= pos[2] <= hz):
                violations.append(
                    Violation("out_of_workspace", stmt.span,
                              f"pose ({pos[0]:.3f}, {pos[1]:.3f}, {pos[2]:.3f})")
                )
        elif isinstance(stmt, Rotate):
            mag = math.sqrt(stmt.roll ** 2 + stmt.pitch ** 2 + stmt.yaw ** 2)
            if mag > MAX_STEP_ROTATION_DEG:
                violations.append(
                    Violation("rotation_too_large", stmt.span, f"magnitude {mag:.1f} deg")
                )
    return ValidationReport(tuple(violations))


@dataclass(frozen=True)
class PoseWaypoint:
    pose: Pose6D
    span: Span


@dataclass(frozen=True)
class GripperCommand:
    action: str
    span: Span


@dataclass(frozen=True)
class Hold:
    seconds: float
    span: Span


Waypoint = PoseWaypoint | GripperCommand | Hold


def compile(program: ActionProgram, current: Pose6D) -> list[Waypoint]:
    """One waypoint per statement; rotations compose intrinsically in degrees."""
    pos = current.position
    quat = current.orientation
    out: list[Waypoint] = []
    for stmt in program.statements:
        if isinstance(stmt, MoveRel):
            pos = (pos[0] + stmt.dx, pos[1] + stmt.dy, pos[2] + stmt.dz)
            out.append(PoseWaypoint(Pose6D(pos, quat), stmt.span))
        elif isinstance(stmt, MoveAbs):
            pos = (stmt.x, stmt.y, stmt.z)
            out.append(PoseWaypoint(Pose6D(pos, quat), stmt.span))
        elif isinstance(stmt, Rotate):
            quat = quat_normalize(
                quat_mul(quat, quat_from_rpy_degrees(stmt.roll, stmt.pitch, stmt.yaw))
            )
            out.append(PoseWaypoint(Pose6D(pos, quat), stmt.span))
        elif isinstance(stmt, Gripper):
            out.append(GripperCommand(stmt.action, stmt.span))
        else:
            out.append(Hold(stmt.seconds, stmt.span))
    return out


def rotation_magnitude_deg(stmt: Rotate) -> float:
    """Composed rotation angle of a Rotate statement, degrees."""
    return math.degrees(quat_angle(quat_from_rpy_degrees(stmt.roll, stmt.pitch, stmt.yaw)))

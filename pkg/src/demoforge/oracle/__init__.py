"""Decision-oracle backends: scripted (privileged), remote endpoint, human bridge."""
from .bridge import HumanBackend, OracleBridge, make_human
from .injection import (
    CORRUPTION_MARKER,
    ErrorInjection,
    Injector,
    NO_INJECTION,
    PROGRAM_CORRUPTION_TOKEN,
)
from .remote import RemoteBackend, RemoteConfig, make_remote
from .scripted import ScriptedBackend, WorldHandle, make_scripted, part_bbox, part_pixel_mask
from .types import (
    Decompose,
    DetectPart,
    EXPECTED_DECISION,
    GenerateAction,
    ListObjects,
    Objects,
    OracleDecision,
    OracleQuery,
    PERCEPTION_KINDS,
    PROTOCOL_VERSION,
    PartBox,
    Plan,
    PlanEntry,
    Program,
    QUERY_KINDS,
    QueryMeta,
    REASONING_KINDS,
    SelectView,
    Verdict,
    Verify,
    ViewIndex,
    decision_from_wire,
    decision_to_wire,
    query_summary,
    query_to_wire,
)

__all__ = [
    "CORRUPTION_MARKER", "Decompose", "DetectPart", "ErrorInjection", "EXPECTED_DECISION",
    "GenerateAction", "HumanBackend", "Injector", "ListObjects", "NO_INJECTION",
    "Objects", "OracleBridge", "OracleDecision", "OracleQuery", "PERCEPTION_KINDS",
    "PROGRAM_CORRUPTION_TOKEN", "PROTOCOL_VERSION", "PartBox", "Plan", "PlanEntry",
    "Program", "QUERY_KINDS", "QueryMeta", "REASONING_KINDS", "RemoteBackend",
    "RemoteConfig", "ScriptedBackend", "SelectView", "Verdict", "Verify", "ViewIndex",
    "WorldHandle", "decision_from_wire", "decision_to_wire", "make_human", "make_remote",
    "make_scripted", "part_bbox", "part_pixel_mask", "query_summary", "query_to_wire",
]

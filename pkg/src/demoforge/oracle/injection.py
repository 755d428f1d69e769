"""Seeded error injection for the scripted oracle.

Per-query-kind Bernoulli rates decide whether a ground-truth decision is
perturbed. The draw stream is consumed once per query (even at rate 0), so two
runs with the same rates and seeds see identical perturbation sequences; the
perception/reasoning split follows the error-attribution protocol.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .types import (
    Objects,
    OracleDecision,
    OracleQuery,
    PERCEPTION_KINDS,
    Plan,
    PlanEntry,
    Program,
    QUERY_KINDS,
    REASONING_KINDS,
    Verdict,
    ViewIndex,
)

CORRUPTION_MARKER = " [corrupted]"
PROGRAM_CORRUPTION_TOKEN = "@@corrupt@@ "


@dataclass(frozen=True)
class ErrorInjection:
    """Rates keyed by query kind; missing kinds default to 0."""

    rates: dict[str, float] = field(default_factory=dict)
    seed: int = 0
    bbox_shift_px: int = 32

    def __post_init__(self):
        for kind, rate in self.rates.items():
            if kind not in QUERY_KINDS:
                raise ValueError(f"unknown query kind {kind!r}")
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"rate {rate} for {kind!r} outside [0, 1]")

    def rate(self, kind: str) -> float:
        return self.rates.get(kind, 0.0)

    def zeroed(self, kinds) -> "ErrorInjection":
        rates = {k: (0.0 if k in kinds else r) for k, r in self.rates.items()}
        return replace(self, rates=rates)

    def zero_perception(self) -> "ErrorInjection":
        return self.zeroed(PERCEPTION_KINDS)

    def zero_reasoning(self) -> "ErrorInjection":
        return self.zeroed(REASONING_KINDS)


NO_INJECTION = ErrorInjection()


class Injector:
    """Per-episode perturbation stream derived from (config seed, episode seed)."""

    def __init__(self, config: ErrorInjection, episode_seed: int = 0):
        self.config = config
        self.rng = np.random.default_rng([config.seed, episode_seed])

    def perturb(self, query: OracleQuery, decision: OracleDecision) -> tuple[OracleDecision, bool]:
        u = float(self.rng.random())
        if u >= self.config.rate(query.kind):
            return decision, False
        return self._apply(query, decision), True

    def _apply(self, query: OracleQuery, decision: OracleDecision) -> OracleDecision:
        if isinstance(decision, Objects):
            names = list(decision.names)
            if len(names) >= 2:
                names.pop(int(self.rng.integers(0, len(names))))
            else:
                names.append("phantom_object")
            return Objects(tuple(names))
        if isinstance(decision, Plan):
            return Plan(tuple(
                PlanEntry(e.description, e.condition + CORRUPTION_MARKER, e.task_kind, e.target)
                for e in decision.entries
            ))
        if isinstance(decision, ViewIndex):
            k = query.k
            if k <= 1:
                return decision
            wrong = [i for i in range(1, k + 1) if i != decision.index]
            return ViewIndex(wrong[int(self.rng.integers(0, len(wrong)))])
        if decision.kind == "part_box":
            bbox = decision.bbox
            w, h = query.view.camera.width, query.view.camera.height
            s = self.config.bbox_shift_px
            dx = float(self.rng.integers(-s, s + 1))
            dy = float(self.rng.integers(-s, s + 1))
            bw = bbox.x_max - bbox.x_min
            bh = bbox.y_max - bbox.y_min
            x0 = min(max(bbox.x_min + dx, 0.0), w - bw)
            y0 = min(max(bbox.y_min + dy, 0.0), h - bh)
            from ..grasp import BBox2D

            return type(decision)(BBox2D(bbox.view, x0, y0, x0 + bw, y0 + bh))
        if isinstance(decision, Verdict):
            return Verdict(not decision.value, decision.rationale)
        if isinstance(decision, Program):
            return Program(PROGRAM_CORRUPTION_TOKEN + decision.text, offset=None)
        return decision

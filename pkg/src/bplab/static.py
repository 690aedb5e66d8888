"""Decode-stage static prediction for instruction streams never seen before."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .isa import CtKind, DecodedCt


@dataclass(frozen=True, slots=True)
class StaticPrediction:
    redirect: Optional[int]

    @property
    def predicted_taken(self) -> bool:
        return self.redirect is not None


def predict_at_decode(ct: DecodedCt, pc: int) -> StaticPrediction:
    # Direct jumps are exact; branches are backward-taken/forward-not-taken
    # (a zero offset counts as forward); indirect jumps fall through unstalled.
    if ct.kind is CtKind.DIRECT_JUMP:
        return StaticPrediction((pc + ct.imm) & 0xFFFFFFFF)
    if ct.kind is CtKind.COND_BRANCH and ct.imm < 0:
        return StaticPrediction((pc + ct.imm) & 0xFFFFFFFF)
    return StaticPrediction(None)

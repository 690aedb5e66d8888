"""Direct-mapped branch target buffer, partitioned into jump and branch memories.

The branch memory stores only the 12-bit ``imm[12:1]`` offset; the target is
rebuilt from the looked-up pc. Entries are written at retirement only, and
only for control transfers that were taken.
"""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from typing import Optional

from .core import RetireEvent
from .isa import CtKind, sext


class BtbKind(enum.Enum):
    BRANCH = "branch"
    JUMP = "jump"
    RETURN = "return"


@dataclass(frozen=True, slots=True)
class BtbHit:
    kind: BtbKind
    target: Optional[int]


@dataclass(frozen=True)
class BtbConfig:
    jump_entries: int = 512
    branch_entries: int = 512
    tag_bits: int = 12

    def __post_init__(self):
        for name in ("jump_entries", "branch_entries"):
            n = getattr(self, name)
            if n < 1 or n & (n - 1):
                raise ValueError(f"{name} must be a power of two")
        if self.tag_bits < 1:
            raise ValueError("tag_bits must be >= 1")


class Btb:
    def __init__(self, config: BtbConfig = BtbConfig()):
        self.config = config
        # jump slots: (tag, kind, target); branch slots: (tag, offset12)
        self.jumps: list[Optional[tuple[int, BtbKind, Optional[int]]]] = [None] * config.jump_entries
        self.branches: list[Optional[tuple[int, int]]] = [None] * config.branch_entries
        self._tag_mask = (1 << config.tag_bits) - 1

    def _split(self, pc: int, entries: int) -> tuple[int, int]:
        word = pc >> 2
        return word & (entries - 1), (word >> (entries.bit_length() - 1)) & self._tag_mask

    def lookup(self, pc: int) -> Optional[BtbHit]:
        idx, tag = self._split(pc, self.config.jump_entries)
        slot = self.jumps[idx]
        if slot is not None and slot[0] == tag:
            return BtbHit(slot[1], slot[2])
        idx, tag = self._split(pc, self.config.branch_entries)
        bslot = self.branches[idx]
        if bslot is not None and bslot[0] == tag:
            return BtbHit(BtbKind.BRANCH, (pc + (sext(bslot[1], 12) << 1)) & 0xFFFFFFFF)
        return None

    def insert_on_retire(self, ev: RetireEvent) -> None:
        ct = ev.ct
        if ct is None:
            raise ValueError("BTB insertion needs a control-transfer event")
        if ct.kind is CtKind.COND_BRANCH:
            if not ev.taken:
                return
            idx, tag = self._split(ev.pc, self.config.branch_entries)
            self.branches[idx] = (tag, (ct.imm >> 1) & 0xFFF)
            return
        idx, tag = self._split(ev.pc, self.config.jump_entries)
        if ct.is_return:
            self.jumps[idx] = (tag, BtbKind.RETURN, None)
        else:
            self.jumps[idx] = (tag, BtbKind.JUMP, ev.target)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr([(s[0], s[1].value, s[2]) if s else None for s in self.jumps]).encode())
        h.update(repr(self.branches).encode())
        return h.hexdigest()

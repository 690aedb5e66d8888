"""Control-transfer trace files (CSV).

Layout::

    # retired=12345
    retire_index,pc,kind,taken,target,call
    17,0x00000040,B,1,0x00000030,0

``kind`` is ``B`` (conditional branch), ``J`` (direct jump), ``I`` (indirect
jump) or ``R`` (return). For ``B`` rows ``target`` is the branch's encoded
target whatever the outcome, so static rules can be replayed; for jumps it is
the address jumped to. ``call`` marks rows that push a return address and may
be omitted (defaults to 0). Non-transfer instructions are not listed; the
header's ``retired`` count accounts for them.
"""
from __future__ import annotations

import csv
import io
from typing import Iterable, TextIO

from .core import RetireEvent
from .isa import CtKind, DecodedCt

COLUMNS = ("retire_index", "pc", "kind", "taken", "target", "call")


def _kind_code(ct: DecodedCt) -> str:
    if ct.kind is CtKind.COND_BRANCH:
        return "B"
    if ct.kind is CtKind.DIRECT_JUMP:
        return "J"
    return "R" if ct.is_return else "I"


def write_trace(events: Iterable[RetireEvent], retired: int, out: TextIO) -> int:
    """Write the control transfers among ``events``; returns the rows written."""
    out.write(f"# retired={retired}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(COLUMNS)
    rows = 0
    for ev in events:
        ct = ev.ct
        if ct is None:
            continue
        target = (ev.pc + ct.imm) & 0xFFFFFFFF if ct.kind is CtKind.COND_BRANCH else ev.target
        w.writerow((ev.retire_index, f"0x{ev.pc:08x}", _kind_code(ct), int(ev.taken),
                    f"0x{target:08x}", int(ct.is_call)))
        rows += 1
    return rows


def _event(index: int, pc: int, kind: str, taken: bool, target: int, call: bool) -> RetireEvent:
    offset = (target - pc) & 0xFFFFFFFF
    offset = offset - (1 << 32) if offset >> 31 else offset
    if kind == "B":
        if call:
            raise ValueError("a branch cannot be a call")
        ct = DecodedCt(CtKind.COND_BRANCH, offset)
        return RetireEvent(index, pc, ct, taken, target if taken else (pc + 4) & 0xFFFFFFFF)
    if not taken:
        raise ValueError("jumps are always taken")
    if kind == "J":
        ct = DecodedCt(CtKind.DIRECT_JUMP, offset, rd=1 if call else 0, is_call=call)
    elif kind == "I":
        ct = DecodedCt(CtKind.INDIRECT_JUMP, 0, rd=1 if call else 0, rs1=6, is_call=call)
    elif kind == "R":
        ct = DecodedCt(CtKind.INDIRECT_JUMP, 0, rd=5 if call else 0, rs1=1,
                       is_call=call, is_return=True)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return RetireEvent(index, pc, ct, True, target)


def read_trace(src: TextIO | str) -> tuple[list[RetireEvent], int]:
    """Parse a trace; returns ``(events, retired)``."""
    text = src if isinstance(src, str) else src.read()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# retired="):
        raise ValueError("line 1: missing '# retired=N' header")
    try:
        retired = int(lines[0].split("=", 1)[1])
    except ValueError:
        raise ValueError("line 1: bad retired count") from None
    reader = csv.reader(io.StringIO("\n".join(lines[1:])))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header[:5]) != COLUMNS[:5]:
        raise ValueError(f"line 2: expected column header {','.join(COLUMNS)}")
    events = []
    for lineno, row in enumerate(reader, start=3):
        if not row:
            continue
        try:
            if len(row) not in (5, 6):
                raise ValueError(f"expected 5 or 6 fields, got {len(row)}")
            index, pc, kind, taken, target = row[:5]
            call = row[5].strip() == "1" if len(row) == 6 else False
            if taken.strip() not in ("0", "1"):
                raise ValueError(f"taken must be 0 or 1, got {taken!r}")
            events.append(_event(int(index), int(pc, 16), kind.strip(), taken.strip() == "1",
                                 int(target, 16), call))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if len(events) > retired:
        raise ValueError(f"header says {retired} retired but {len(events)} rows are listed")
    return events, retired

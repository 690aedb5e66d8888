"""Functional (untimed) RV32IM interpreter producing a retirement trace."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import ImageError
from .isa import (
    OP_AUIPC, OP_BRANCH, OP_FENCE, OP_IMM, OP_JAL, OP_JALR, OP_LOAD, OP_LUI,
    OP_REG, OP_STORE, DecodedCt, decode_control_transfer, imm_b, imm_i,
    imm_j, imm_s, imm_u,
)

UART_TX = 0x1000_0000
HALT_ADDR = 0x1000_0008
MMIO_BASE = 0x1000_0000
MMIO_END = 0x1000_0010

MASK32 = 0xFFFFFFFF
INT_MIN = 0x80000000

_HEX8 = re.compile(r"[0-9A-Fa-f]{8}")


@dataclass(frozen=True, slots=True)
class RetireEvent:
    retire_index: int
    pc: int
    ct: Optional[DecodedCt]
    taken: bool
    target: int


@dataclass
class MachineState:
    pc: int = 0
    regs: list[int] = field(default_factory=lambda: [0] * 32)
    mem: dict[int, int] = field(default_factory=dict)  # word address -> word
    halted: bool = False
    exit_code: int = 0
    uart_out: bytearray = field(default_factory=bytearray)
    trap: Optional[str] = None
    retired: int = 0

    def copy(self) -> "MachineState":
        return MachineState(
            self.pc, list(self.regs), dict(self.mem), self.halted, self.exit_code,
            bytearray(self.uart_out), self.trap, self.retired,
        )

    def read_word(self, addr: int) -> int:
        return self.mem[addr & ~3]


@dataclass
class RunResult:
    trace: list[RetireEvent]
    state: MachineState
    truncated: bool


def parse_image(text: str) -> tuple[dict[int, int], Optional[int]]:
    """Parse the memory-image grammar into ``{word_address: word}``.

    Returns the memory map and the address of the first ``@`` directive.
    """
    mem: dict[int, int] = {}
    cursor = 0
    first: Optional[int] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("@"):
            body = line[1:]
            if not _HEX8.fullmatch(body):
                raise ImageError(f"bad address directive {line!r}", lineno)
            cursor = int(body, 16)
            if cursor % 4:
                raise ImageError(f"address {cursor:#x} is not word aligned", lineno)
            if first is None:
                first = cursor
            continue
        if not _HEX8.fullmatch(line):
            raise ImageError(f"expected 8 hex digits, got {line!r}", lineno)
        if cursor in mem:
            raise ImageError(f"overlapping region at {cursor:#010x}", lineno)
        if cursor > MASK32:
            raise ImageError("cursor ran past the 32-bit address space", lineno)
        mem[cursor] = int(line, 16)
        cursor += 4
    return mem, first


def load_image(text: str, entry: Optional[int] = None) -> MachineState:
    mem, first = parse_image(text)
    if entry is None:
        entry = first if first is not None else 0
    if entry % 4:
        raise ImageError(f"entry point {entry:#x} is not word aligned")
    return MachineState(pc=entry, mem=mem)


class _Trap(Exception):
    pass


def _signed(v: int) -> int:
    return v - (1 << 32) if v & 0x80000000 else v


def _load(state: MachineState, addr: int, size: int, signed: bool) -> int:
    if addr % size:
        raise _Trap(f"misaligned {size}-byte load at {addr:#010x}")
    if MMIO_BASE <= addr < MMIO_END:
        return 0
    word = state.mem.get(addr & ~3)
    if word is None:
        raise _Trap(f"load from unmapped address {addr:#010x}")
    shift = (addr & 3) * 8
    bits = size * 8
    value = (word >> shift) & ((1 << bits) - 1)
    if signed and value >> (bits - 1):
        value -= 1 << bits
    return value & MASK32


def _store(state: MachineState, addr: int, size: int, value: int) -> None:
    if addr % size:
        raise _Trap(f"misaligned {size}-byte store at {addr:#010x}")
    if MMIO_BASE <= addr < MMIO_END:
        base = addr & ~3
        if base == UART_TX:
            state.uart_out.append(value & 0xFF)
        elif base == HALT_ADDR:
            state.halted = True
            state.exit_code = value & ((1 << (size * 8)) - 1)
        return
    waddr = addr & ~3
    word = state.mem.get(waddr)
    if word is None:
        raise _Trap(f"store to unmapped address {addr:#010x}")
    shift = (addr & 3) * 8
    mask = ((1 << (size * 8)) - 1) << shift
    state.mem[waddr] = (word & ~mask) | ((value << shift) & mask)


def _div(a: int, b: int, signed: bool) -> tuple[int, int]:
    """Return (quotient, remainder) with the ISA's divide-by-zero/overflow rules."""
    if b == 0:
        return MASK32, a
    if not signed:
        return a // b, a % b
    if a == INT_MIN and b == MASK32:
        return INT_MIN, 0
    sa, sb = _signed(a), _signed(b)
    q = abs(sa) // abs(sb)
    if (sa < 0) != (sb < 0):
        q = -q
    r = sa - q * sb
    return q & MASK32, r & MASK32


def _alu(funct3: int, funct7: int, a: int, b: int) -> int:
    if funct7 == 0x01:
        if funct3 == 0:
            return (a * b) & MASK32
        if funct3 == 1:
            return ((_signed(a) * _signed(b)) >> 32) & MASK32
        if funct3 == 2:
            return ((_signed(a) * b) >> 32) & MASK32
        if funct3 == 3:
            return ((a * b) >> 32) & MASK32
        if funct3 in (4, 6):
            q, r = _div(a, b, signed=True)
            return q if funct3 == 4 else r
        q, r = _div(a, b, signed=False)
        return q if funct3 == 5 else r
    if funct7 not in (0, 0x20) or (funct7 == 0x20 and funct3 not in (0, 5)):
        raise _Trap("illegal OP encoding")
    if funct3 == 0:
        return (a - b if funct7 == 0x20 else a + b) & MASK32
    if funct3 == 1:
        return (a << (b & 31)) & MASK32
    if funct3 == 2:
        return int(_signed(a) < _signed(b))
    if funct3 == 3:
        return int(a < b)
    if funct3 == 4:
        return a ^ b
    if funct3 == 5:
        if funct7 == 0x20:
            return (_signed(a) >> (b & 31)) & MASK32
        return a >> (b & 31)
    if funct3 == 6:
        return a | b
    return a & b


def _branch_taken(funct3: int, a: int, b: int) -> bool:
    if funct3 == 0:
        return a == b
    if funct3 == 1:
        return a != b
    if funct3 == 4:
        return _signed(a) < _signed(b)
    if funct3 == 5:
        return _signed(a) >= _signed(b)
    if funct3 == 6:
        return a < b
    if funct3 == 7:
        return a >= b
    raise _Trap("illegal branch funct3")


def _execute(state: MachineState, pc: int, word: int) -> tuple[int, bool]:
    """Apply one instruction's architectural effect; return (next pc, taken)."""
    regs = state.regs
    opcode = word & 0x7F
    rd = (word >> 7) & 0x1F
    funct3 = (word >> 12) & 0x7
    rs1 = regs[(word >> 15) & 0x1F]
    rs2 = regs[(word >> 20) & 0x1F]
    funct7 = word >> 25
    nxt = (pc + 4) & MASK32
    taken = False
    result = None

    if opcode == OP_IMM:
        imm = imm_i(word) & MASK32
        if funct3 == 1:
            if funct7 != 0:
                raise _Trap("illegal SLLI encoding")
            result = (rs1 << ((word >> 20) & 31)) & MASK32
        elif funct3 == 5:
            if funct7 not in (0, 0x20):
                raise _Trap("illegal shift-right encoding")
            result = _alu(5, funct7, rs1, (word >> 20) & 31)
        else:
            result = _alu(funct3, 0, rs1, imm)
    elif opcode == OP_REG:
        result = _alu(funct3, funct7, rs1, rs2)
    elif opcode == OP_LUI:
        result = imm_u(word)
    elif opcode == OP_AUIPC:
        result = (pc + imm_u(word)) & MASK32
    elif opcode == OP_LOAD:
        addr = (rs1 + imm_i(word)) & MASK32
        sizes = {0: (1, True), 1: (2, True), 2: (4, False), 4: (1, False), 5: (2, False)}
        if funct3 not in sizes:
            raise _Trap("illegal load funct3")
        size, signed = sizes[funct3]
        result = _load(state, addr, size, signed)
    elif opcode == OP_STORE:
        if funct3 > 2:
            raise _Trap("illegal store funct3")
        _store(state, (rs1 + imm_s(word)) & MASK32, 1 << funct3, rs2)
    elif opcode == OP_BRANCH:
        if _branch_taken(funct3, rs1, rs2):
            taken = True
            nxt = (pc + imm_b(word)) & MASK32
    elif opcode == OP_JAL:
        result, taken = nxt, True
        nxt = (pc + imm_j(word)) & MASK32
    elif opcode == OP_JALR:
        if funct3 != 0:
            raise _Trap("illegal JALR funct3")
        result, taken = nxt, True
        nxt = (rs1 + imm_i(word)) & MASK32 & ~1
    elif opcode == OP_FENCE:
        pass
    else:
        raise _Trap(f"illegal instruction {word:#010x}")

    if nxt % 4:
        raise _Trap(f"misaligned jump target {nxt:#010x}")
    if result is not None and rd:
        regs[rd] = result
    return nxt, taken


def step(state: MachineState) -> Optional[RetireEvent]:
    """Execute one instruction in place.

    Returns the retirement event, or ``None`` when the instruction traps; a
    trap halts the machine and records the diagnostic in ``state.trap``.
    """
    if state.halted:
        raise RuntimeError("step() on a halted machine")
    pc = state.pc
    word = state.mem.get(pc)
    if word is None:
        state.halted = True
        state.trap = f"instruction fetch from unmapped address {pc:#010x}"
        return None
    try:
        nxt, taken = _execute(state, pc, word)
    except _Trap as exc:
        state.halted = True
        state.trap = f"pc={pc:#010x}: {exc}"
        return None
    ct = decode_control_transfer(word)
    event = RetireEvent(state.retired, pc, ct, taken, nxt)
    state.retired += 1
    state.pc = nxt
    return event


def run(state: MachineState, max_steps: int) -> RunResult:
    if max_steps <= 0:
        raise ValueError("max_steps must be positive")
    trace: list[RetireEvent] = []
    while len(trace) < max_steps and not state.halted:
        event = step(state)
        if event is None:
            break
        trace.append(event)
    return RunResult(trace, state, truncated=not state.halted)

"""RV32IM instruction fields, control-transfer classification and encoders.

Only the control-transfer view of an instruction lives here; full execution
semantics are in :mod:`bplab.core`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

OP_LUI = 0x37
OP_AUIPC = 0x17
OP_JAL = 0x6F
OP_JALR = 0x67
OP_BRANCH = 0x63
OP_LOAD = 0x03
OP_STORE = 0x23
OP_IMM = 0x13
OP_REG = 0x33
OP_FENCE = 0x0F
OP_SYSTEM = 0x73

BRANCH_FUNCT3 = {"beq": 0, "bne": 1, "blt": 4, "bge": 5, "bltu": 6, "bgeu": 7}

# x1 (ra) and x5 (t0) are the link registers of the standard calling convention.
LINK_REGS = frozenset((1, 5))

ABI_NAMES = (
    "zero ra sp gp tp t0 t1 t2 s0 s1 a0 a1 a2 a3 a4 a5 a6 a7 "
    "s2 s3 s4 s5 s6 s7 s8 s9 s10 s11 t3 t4 t5 t6"
).split()


class CtKind(enum.Enum):
    COND_BRANCH = "B"
    DIRECT_JUMP = "J"
    INDIRECT_JUMP = "I"


@dataclass(frozen=True, slots=True)
class DecodedCt:
    kind: CtKind
    imm: int
    rd: int = 0
    rs1: int = 0
    is_call: bool = False
    is_return: bool = False

    @property
    def stat_class(self) -> str:
        """Statistics bucket: returns are tracked apart from other indirect jumps."""
        if self.kind is CtKind.COND_BRANCH:
            return "cond_branch"
        if self.kind is CtKind.DIRECT_JUMP:
            return "direct_jump"
        return "ret" if self.is_return else "indirect_jump"


def sext(value: int, bits: int) -> int:
    value &= (1 << bits) - 1
    return value - (1 << bits) if value >> (bits - 1) else value


def imm_i(word: int) -> int:
    return sext(word >> 20, 12)


def imm_s(word: int) -> int:
    return sext(((word >> 25) << 5) | ((word >> 7) & 0x1F), 12)


def imm_b(word: int) -> int:
    v = (
        ((word >> 31) & 1) << 12
        | ((word >> 7) & 1) << 11
        | ((word >> 25) & 0x3F) << 5
        | ((word >> 8) & 0xF) << 1
    )
    return sext(v, 13)


def imm_u(word: int) -> int:
    return word & 0xFFFFF000


def imm_j(word: int) -> int:
    v = (
        ((word >> 31) & 1) << 20
        | ((word >> 12) & 0xFF) << 12
        | ((word >> 20) & 1) << 11
        | ((word >> 21) & 0x3FF) << 1
    )
    return sext(v, 21)


def decode_control_transfer(word: int) -> Optional[DecodedCt]:
    """Classify ``word`` as a control transfer, or return ``None``.

    Call/return roles follow the link-register hint table of the unprivileged
    ISA manual (x1 and x5 are link registers):

    ====================  =========================
    JAL, rd link          push
    JALR rd !link rs1 !l  none
    JALR rd !link rs1 l   pop
    JALR rd link rs1 !l   push
    JALR rd l, rs1 l, !=  pop, then push
    JALR rd l, rs1 l, ==  push
    ====================  =========================
    """
    word &= 0xFFFFFFFF
    opcode = word & 0x7F
    rd = (word >> 7) & 0x1F
    funct3 = (word >> 12) & 0x7
    rs1 = (word >> 15) & 0x1F
    if opcode == OP_BRANCH:
        if funct3 in (2, 3):
            return None
        return DecodedCt(CtKind.COND_BRANCH, imm_b(word), rd=0, rs1=rs1)
    if opcode == OP_JAL:
        return DecodedCt(CtKind.DIRECT_JUMP, imm_j(word), rd=rd, is_call=rd in LINK_REGS)
    if opcode == OP_JALR:
        if funct3 != 0:
            return None
        rd_link = rd in LINK_REGS
        rs1_link = rs1 in LINK_REGS
        return DecodedCt(
            CtKind.INDIRECT_JUMP,
            imm_i(word),
            rd=rd,
            rs1=rs1,
            is_call=rd_link,
            is_return=rs1_link and (not rd_link or rd != rs1),
        )
    return None


# -- encoders -----------------------------------------------------------------


def _reg(r: int) -> int:
    if not 0 <= r < 32:
        raise ValueError(f"register index out of range: {r}")
    return r


def _check_imm(imm: int, bits: int, align: int = 1) -> None:
    lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    if not lo <= imm <= hi:
        raise ValueError(f"immediate {imm} does not fit in {bits} signed bits")
    if imm % align:
        raise ValueError(f"immediate {imm} is not a multiple of {align}")


def encode_r(opcode: int, rd: int, funct3: int, rs1: int, rs2: int, funct7: int) -> int:
    return (
        (funct7 << 25) | (_reg(rs2) << 20) | (_reg(rs1) << 15)
        | (funct3 << 12) | (_reg(rd) << 7) | opcode
    )


def encode_i(opcode: int, rd: int, funct3: int, rs1: int, imm: int) -> int:
    _check_imm(imm, 12)
    return ((imm & 0xFFF) << 20) | (_reg(rs1) << 15) | (funct3 << 12) | (_reg(rd) << 7) | opcode


def encode_s(funct3: int, rs1: int, rs2: int, imm: int) -> int:
    _check_imm(imm, 12)
    imm &= 0xFFF
    return (
        ((imm >> 5) << 25) | (_reg(rs2) << 20) | (_reg(rs1) << 15)
        | (funct3 << 12) | ((imm & 0x1F) << 7) | OP_STORE
    )


def encode_b(funct3: int, rs1: int, rs2: int, imm: int) -> int:
    _check_imm(imm, 13, 2)
    imm &= 0x1FFF
    return (
        ((imm >> 12) & 1) << 31
        | ((imm >> 5) & 0x3F) << 25
        | _reg(rs2) << 20
        | _reg(rs1) << 15
        | funct3 << 12
        | ((imm >> 1) & 0xF) << 8
        | ((imm >> 11) & 1) << 7
        | OP_BRANCH
    )


def encode_u(opcode: int, rd: int, imm: int) -> int:
    return (imm & 0xFFFFF000) | (_reg(rd) << 7) | opcode


def encode_j(rd: int, imm: int) -> int:
    _check_imm(imm, 21, 2)
    imm &= 0x1FFFFF
    return (
        ((imm >> 20) & 1) << 31
        | ((imm >> 1) & 0x3FF) << 21
        | ((imm >> 11) & 1) << 20
        | ((imm >> 12) & 0xFF) << 12
        | _reg(rd) << 7
        | OP_JAL
    )


def encode_jal(rd: int, imm: int) -> int:
    return encode_j(rd, imm)


def encode_jalr(rd: int, rs1: int, imm: int) -> int:
    return encode_i(OP_JALR, rd, 0, rs1, imm)


def encode_branch(name: str, rs1: int, rs2: int, imm: int) -> int:
    return encode_b(BRANCH_FUNCT3[name], rs1, rs2, imm)

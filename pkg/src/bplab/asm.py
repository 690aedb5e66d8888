"""Minimal two-pass RV32IM assembler used to build the bundled fixtures.

Supports the base and M-extension mnemonics, the common pseudo-instructions
(``li la mv j jr ret call beqz bnez ...``), labels and the directives
``.org .word .zero .asciz .equ``. Comments start with ``#`` or ``;``.
"""
from __future__ import annotations

import ast
import re
from dataclasses import dataclass

from . import isa
from .isa import (
    ABI_NAMES, OP_AUIPC, OP_IMM, OP_LOAD, OP_LUI, OP_REG, encode_b, encode_i,
    encode_j, encode_r, encode_s, encode_u,
)

_REGS = {name: i for i, name in enumerate(ABI_NAMES)}
_REGS.update({f"x{i}": i for i in range(32)})
_REGS["fp"] = 8

_RTYPE = {
    "add": (0, 0x00), "sub": (0, 0x20), "sll": (1, 0x00), "slt": (2, 0x00),
    "sltu": (3, 0x00), "xor": (4, 0x00), "srl": (5, 0x00), "sra": (5, 0x20),
    "or": (6, 0x00), "and": (7, 0x00),
    "mul": (0, 0x01), "mulh": (1, 0x01), "mulhsu": (2, 0x01), "mulhu": (3, 0x01),
    "div": (4, 0x01), "divu": (5, 0x01), "rem": (6, 0x01), "remu": (7, 0x01),
}
_ITYPE = {"addi": 0, "slti": 2, "sltiu": 3, "xori": 4, "ori": 6, "andi": 7}
_SHIFTI = {"slli": (1, 0x00), "srli": (5, 0x00), "srai": (5, 0x20)}
_LOADS = {"lb": 0, "lh": 1, "lw": 2, "lbu": 4, "lhu": 5}
_STORES = {"sb": 0, "sh": 1, "sw": 2}
_BRANCH_ZERO = {"beqz": ("beq", False), "bnez": ("bne", False), "bltz": ("blt", False),
                "bgez": ("bge", False), "blez": ("bge", True), "bgtz": ("blt", True)}
_BRANCH_SWAP = {"bgt": "blt", "ble": "bge", "bgtu": "bltu", "bleu": "bgeu"}
_MEMOP = re.compile(r"^(.*)\((\w+)\)$")


class AsmError(ValueError):
    pass


@dataclass
class Word:
    addr: int
    value: int
    source: str


def _split_args(text: str) -> list[str]:
    return [a.strip() for a in text.split(",")] if text.strip() else []


def _hi_lo(value: int) -> tuple[int, int]:
    value &= 0xFFFFFFFF
    lo = isa.sext(value, 12)
    hi = (value - lo) & 0xFFFFFFFF
    return hi, lo


class _Assembler:
    def __init__(self) -> None:
        self.symbols: dict[str, int] = {}

    def reg(self, name: str) -> int:
        try:
            return _REGS[name.strip()]
        except KeyError:
            raise AsmError(f"unknown register {name!r}") from None

    def value(self, text: str, final: bool) -> int | None:
        text = text.strip()
        try:
            return int(text, 0)
        except ValueError:
            pass
        if text in self.symbols:
            return self.symbols[text]
        if final:
            raise AsmError(f"undefined symbol {text!r}")
        return None

    def size_of(self, op: str, args: list[str]) -> int:
        if op == "la":
            return 8
        if op == "li":
            v = self.value(args[1], final=False)
            return 4 if v is not None and -2048 <= isa.sext(v, 32) <= 2047 else 8
        return 4

    def encode(self, op: str, args: list[str], pc: int) -> list[int]:
        r, v = self.reg, lambda t: self.value(t, final=True)

        def rel(t: str) -> int:
            return v(t) - pc

        if op in _RTYPE:
            f3, f7 = _RTYPE[op]
            return [encode_r(OP_REG, r(args[0]), f3, r(args[1]), r(args[2]), f7)]
        if op in _ITYPE:
            return [encode_i(OP_IMM, r(args[0]), _ITYPE[op], r(args[1]), isa.sext(v(args[2]), 32))]
        if op in _SHIFTI:
            f3, f7 = _SHIFTI[op]
            return [encode_r(OP_IMM, r(args[0]), f3, r(args[1]), v(args[2]) & 31, f7)]
        if op in _LOADS or op in _STORES or op == "jalr" and len(args) == 2:
            m = _MEMOP.match(args[1])
            if not m:
                raise AsmError(f"expected offset(reg), got {args[1]!r}")
            off = v(m.group(1)) if m.group(1).strip() else 0
            base = r(m.group(2))
            if op in _LOADS:
                return [encode_i(OP_LOAD, r(args[0]), _LOADS[op], base, off)]
            if op in _STORES:
                return [encode_s(_STORES[op], base, r(args[0]), off)]
            return [isa.encode_jalr(r(args[0]), base, off)]
        if op in isa.BRANCH_FUNCT3:
            return [encode_b(isa.BRANCH_FUNCT3[op], r(args[0]), r(args[1]), rel(args[2]))]
        if op in _BRANCH_SWAP:
            return [encode_b(isa.BRANCH_FUNCT3[_BRANCH_SWAP[op]], r(args[1]), r(args[0]), rel(args[2]))]
        if op in _BRANCH_ZERO:
            base, swap = _BRANCH_ZERO[op]
            a, b = (0, r(args[0])) if swap else (r(args[0]), 0)
            return [encode_b(isa.BRANCH_FUNCT3[base], a, b, rel(args[1]))]
        if op == "lui":
            return [encode_u(OP_LUI, r(args[0]), v(args[1]) << 12)]
        if op == "auipc":
            return [encode_u(OP_AUIPC, r(args[0]), v(args[1]) << 12)]
        if op == "jal":
            if len(args) == 1:
                return [encode_j(1, rel(args[0]))]
            return [encode_j(r(args[0]), rel(args[1]))]
        if op == "jalr":
            if len(args) == 1:
                return [isa.encode_jalr(1, r(args[0]), 0)]
            return [isa.encode_jalr(r(args[0]), r(args[1]), v(args[2]))]
        if op == "nop":
            return [encode_i(OP_IMM, 0, 0, 0, 0)]
        if op == "mv":
            return [encode_i(OP_IMM, r(args[0]), 0, r(args[1]), 0)]
        if op == "not":
            return [encode_i(OP_IMM, r(args[0]), 4, r(args[1]), -1)]
        if op == "neg":
            return [encode_r(OP_REG, r(args[0]), 0, 0, r(args[1]), 0x20)]
        if op == "seqz":
            return [encode_i(OP_IMM, r(args[0]), 3, r(args[1]), 1)]
        if op == "snez":
            return [encode_r(OP_REG, r(args[0]), 3, 0, r(args[1]), 0)]
        if op == "j":
            return [encode_j(0, rel(args[0]))]
        if op == "call":
            return [encode_j(1, rel(args[0]))]
        if op == "jr":
            return [isa.encode_jalr(0, r(args[0]), 0)]
        if op == "ret":
            return [isa.encode_jalr(0, 1, 0)]
        if op in ("li", "la"):
            rd, value = r(args[0]), v(args[1])
            if op == "li" and self.size_of(op, args) == 4:
                return [encode_i(OP_IMM, rd, 0, 0, isa.sext(value, 32))]
            hi, lo = _hi_lo(value)
            return [encode_u(OP_LUI, rd, hi), encode_i(OP_IMM, rd, 0, rd, lo)]
        raise AsmError(f"unknown mnemonic {op!r}")


def _parse_lines(source: str):
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = re.split(r"[#;]", raw, maxsplit=1)[0].strip()
        labels = []
        while True:
            m = re.match(r"^([A-Za-z_.][\w.]*):\s*(.*)$", line)
            if not m:
                break
            labels.append(m.group(1))
            line = m.group(2)
        op, _, rest = line.partition(" ")
        yield lineno, raw.rstrip(), labels, op.lower(), rest.strip()


def assemble(source: str, origin: int = 0) -> list[Word]:
    """Assemble ``source``; returns one :class:`Word` per emitted 32-bit word."""
    asm = _Assembler()
    lines = list(_parse_lines(source))

    def directive_words(op: str, rest: str, final: bool) -> list[int]:
        if op == ".word":
            return [(asm.value(a, final) or 0) & 0xFFFFFFFF for a in _split_args(rest)]
        if op == ".zero":
            n = asm.value(rest, True)
            if n % 4:
                raise AsmError(".zero size must be a multiple of 4")
            return [0] * (n // 4)
        if op == ".asciz":
            data = ast.literal_eval(rest).encode() + b"\0"
            data += b"\0" * (-len(data) % 4)
            return [int.from_bytes(data[i:i + 4], "little") for i in range(0, len(data), 4)]
        raise AsmError(f"unknown directive {op!r}")

    # pass 1: addresses
    pc = origin
    for lineno, _, labels, op, rest in lines:
        try:
            if op == ".org":
                pc = asm.value(rest, True)
            for label in labels:
                if label in asm.symbols:
                    raise AsmError(f"duplicate label {label!r}")
                asm.symbols[label] = pc
            if not op or op == ".org":
                continue
            if op == ".equ":
                name, val = _split_args(rest)
                asm.symbols[name] = asm.value(val, True)
            elif op.startswith("."):
                pc += 4 * len(directive_words(op, rest, False))
            else:
                pc += asm.size_of(op, _split_args(rest))
        except AsmError as exc:
            raise AsmError(f"line {lineno}: {exc}") from None

    # pass 2: encode
    out: list[Word] = []
    pc = origin
    for lineno, raw, _, op, rest in lines:
        try:
            if op == ".org":
                pc = asm.value(rest, True)
                continue
            if not op or op == ".equ":
                continue
            if op.startswith("."):
                words = directive_words(op, rest, True)
            else:
                words = asm.encode(op, _split_args(rest), pc)
        except (AsmError, ValueError, IndexError) as exc:
            raise AsmError(f"line {lineno}: {exc}") from None
        for i, w in enumerate(words):
            out.append(Word(pc, w, raw.strip() if i == 0 else ""))
            pc += 4
    return out


def to_image(words: list[Word], header: str = "") -> str:
    """Render assembled words in the memory-image format, source as comments."""
    lines = [f"# {h}" if h else "#" for h in header.splitlines()]
    expected = None
    for w in words:
        if w.addr != expected:
            lines.append(f"@{w.addr:08X}")
        text = f"{w.value:08X}"
        if w.source:
            text += f"  # {w.source}"
        lines.append(text)
        expected = w.addr + 4
    return "\n".join(lines) + "\n"

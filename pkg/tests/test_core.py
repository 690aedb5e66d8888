import random

import pytest
from hypothesis import given, settings, strategies as st

from bplab import fixtures
from bplab.asm import assemble, to_image
from bplab.core import HALT_ADDR, MachineState, load_image, parse_image, run, step
from bplab.errors import ImageError
from bplab.isa import CtKind, OP_IMM, OP_REG, encode_i, encode_r, encode_s, encode_u, OP_LUI
from tests.conftest import fixture_run

unicorn = pytest.importorskip("unicorn")
from unicorn import riscv_const as rc  # noqa: E402

M_OPS = {"mul": 0, "mulh": 1, "mulhsu": 2, "mulhu": 3, "div": 4, "divu": 5, "rem": 6, "remu": 7}
ALU_OPS = {"add": (0, 0), "sub": (0, 0x20), "sll": (1, 0), "slt": (2, 0), "sltu": (3, 0),
           "xor": (4, 0), "srl": (5, 0), "sra": (5, 0x20), "or": (6, 0), "and": (7, 0)}
EDGE = [0, 1, 2, 0xFFFFFFFF, 0x80000000, 0x7FFFFFFF, 0xFFFFFFFE, 7, 3]


def _state(words, regs=None, origin=0):
    s = MachineState(pc=origin)
    for k, w in enumerate(words):
        s.mem[origin + 4 * k] = w
    for r, v in (regs or {}).items():
        s.regs[r] = v
    return s


def _unicorn(mem, regs=None):
    uc = unicorn.Uc(unicorn.UC_ARCH_RISCV, unicorn.UC_MODE_RISCV32)
    uc.mem_map(0, 0x100000)
    uc.mem_map(0x10000000, 0x1000)
    for addr, w in mem.items():
        uc.mem_write(addr, w.to_bytes(4, "little"))
    for r, v in (regs or {}).items():
        uc.reg_write(rc.UC_RISCV_REG_X0 + r, v)
    return uc


def _uc_regs(uc):
    return [uc.reg_read(rc.UC_RISCV_REG_X0 + r) & 0xFFFFFFFF for r in range(32)]


# -- examples ---------------------------------------------------------------

def test_nop_image():
    s = load_image("@00000000\n00000013")
    assert s.mem == {0: 0x13} and s.pc == 0


def test_cursor_directive():
    s = load_image("@00000100\n008000EF")
    assert s.mem[0x100] == 0x008000EF and s.pc == 0x100


@pytest.mark.parametrize("text", ["@00000000\n0013", "@0000000\n00000013", "@00000002\n00000013",
                                  "zz\n", "@00000000\n00000013\n@00000000\n00000013"])
def test_bad_images(text):
    with pytest.raises(ImageError):
        load_image(text)


def test_image_error_carries_line():
    with pytest.raises(ImageError) as info:
        parse_image("# hdr\n@00000000\n00000013\n123\n")
    assert info.value.line == 4


def test_div_by_zero():
    s = _state([encode_r(OP_REG, 3, 4, 1, 2, 1)], {1: 7, 2: 0})
    step(s)
    assert s.regs[3] == 0xFFFFFFFF


def test_addi():
    s = _state([encode_i(OP_IMM, 1, 0, 0, 5)])
    step(s)
    assert s.regs[1] == 5


def test_beq_taken_backwards():
    s = MachineState(pc=0x40)
    s.mem[0x40] = 0xFE0008E3
    ev = step(s)
    assert ev.taken and ev.target == 0x30 and s.pc == 0x30
    assert ev.ct.kind is CtKind.COND_BRANCH


def test_not_taken_branch_targets_fallthrough():
    s = _state([0x00100463])  # beq x0, x1, +8 with x1 = 1
    s.regs[1] = 1
    ev = step(s)
    assert not ev.taken and ev.target == 4


def test_plus_four_branch_is_taken():
    s = _state([0x00000263])  # beq x0, x0, +4
    ev = step(s)
    assert ev.taken and ev.target == 4


def test_non_transfer_event():
    ev = step(_state([0x13]))
    assert ev.ct is None and not ev.taken and ev.target == 4


def test_empty_program_halts_in_one():
    # t2 preloaded with the MMIO base; the single store halts
    s = _state([encode_s(2, 7, 0, 8)], {7: HALT_ADDR - 8})
    res = run(s, 10)
    assert len(res.trace) == 1 and res.state.halted and not res.truncated


def test_infinite_loop_truncates():
    res = run(_state([0x0000006F]), 1000)  # j .
    assert len(res.trace) == 1000 and res.truncated


def test_run_rejects_zero_budget():
    with pytest.raises(ValueError):
        run(_state([0x13]), 0)


def test_step_after_halt_raises():
    s = _state([0x13])
    s.halted = True
    with pytest.raises(RuntimeError):
        step(s)


def test_misaligned_load_traps():
    s = _state([encode_i(0x03, 1, 2, 0, 2)])  # lw x1, 2(x0)
    assert step(s) is None and s.trap and s.halted


def test_unmapped_fetch_traps():
    s = _state([0x0100006F])  # j +16
    res = run(s, 10)
    assert len(res.trace) == 1 and "unmapped" in res.state.trap


def test_uart_and_halt_code():
    res = fixture_run("strsort_small")
    assert res.state.uart_out.decode() == "apple\napricot\nbanana\ncherry\nfig\npear\n"


@pytest.mark.parametrize("name,code", [("program1", 25), ("fib_recursive", 144),
                                       ("loop_parity_1000", 333), ("btb_regression", 100)])
def test_fixture_exit_codes(name, code):
    assert fixture_run(name).state.exit_code == code


def test_program1_studied_branch_alternates():
    outcomes = [ev.taken for ev in fixture_run("program1").trace if ev.pc == 8]
    assert len(outcomes) == 50
    assert all(a != b for a, b in zip(outcomes, outcomes[1:]))
    assert outcomes[0] is False


def test_determinism():
    a, b = run(fixtures.load("fib_recursive"), 10**6), run(fixtures.load("fib_recursive"), 10**6)
    assert a.trace == b.trace and a.state.regs == b.state.regs


def test_retired_indices_dense():
    tr = fixture_run("loop_parity_1000").trace
    assert [ev.retire_index for ev in tr] == list(range(len(tr)))


# -- reference emulator --------------------------------------------------------

@pytest.mark.parametrize("name", fixtures.FIXTURES)
def test_lockstep_with_unicorn(name):
    state = fixtures.load(name)
    uc = _unicorn(state.mem)
    steps = 0
    while not state.halted:
        pc = state.pc
        ev = step(state)
        assert ev is not None, state.trap
        if state.halted:
            break  # the halt store has no architectural effect to compare
        uc.emu_start(pc, 0xFFFFFFFF, count=1)
        assert uc.reg_read(rc.UC_RISCV_REG_PC) == state.pc, f"step {steps} pc {pc:#x}"
        assert _uc_regs(uc) == state.regs, f"step {steps} pc {pc:#x}"
        steps += 1
    assert steps + 1 == len(fixture_run(name).trace)


def test_alu_and_m_extension_against_unicorn():
    r = random.Random(11)
    ops = [(f3, f7) for f3, f7 in ALU_OPS.values()] + [(f3, 1) for f3 in M_OPS.values()]
    for _ in range(3000):
        f3, f7 = r.choice(ops)
        a = r.choice(EDGE + [r.getrandbits(32)])
        b = r.choice(EDGE + [r.getrandbits(32)])
        word = encode_r(OP_REG, 3, f3, 1, 2, f7)
        s = _state([word], {1: a, 2: b})
        step(s)
        uc = _unicorn({0: word}, {1: a, 2: b})
        uc.emu_start(0, 0xFFFFFFFF, count=1)
        assert s.regs[3] == uc.reg_read(rc.UC_RISCV_REG_X3) & 0xFFFFFFFF, (hex(word), a, b)


@pytest.mark.parametrize("op,a,b,want", [
    ("div", 0x80000000, 0xFFFFFFFF, 0x80000000),
    ("rem", 0x80000000, 0xFFFFFFFF, 0),
    ("divu", 5, 0, 0xFFFFFFFF),
    ("rem", 0xFFFFFFF9, 0, 0xFFFFFFF9),
    ("remu", 9, 0, 9),
    ("mulh", 0x80000000, 0x80000000, 0x40000000),
    ("mulhu", 0xFFFFFFFF, 0xFFFFFFFF, 0xFFFFFFFE),
    ("mulhsu", 0xFFFFFFFF, 0xFFFFFFFF, 0xFFFFFFFF),
])
def test_m_extension_edges(op, a, b, want):
    s = _state([encode_r(OP_REG, 3, M_OPS[op], 1, 2, 1)], {1: a, 2: b})
    step(s)
    assert s.regs[3] == want


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 31), st.integers(0, 31), st.integers(-2048, 2047)),
                min_size=1, max_size=30))
def test_x0_stays_zero(instrs):
    words = [encode_i(OP_IMM, rd, 0, rs1, imm) for rd, rs1, imm in instrs]
    words.append(encode_u(OP_LUI, 0, 0xABCDE))
    s = _state(words)
    for _ in words:
        step(s)
        assert s.regs[0] == 0
        assert s.pc % 4 == 0


# -- assembler -------------------------------------------------------------------

def test_assembler_labels_and_pseudos():
    words = assemble("start:\n  li a0, 0x12345678\n  call f\n  j start\nf:\n  ret\n")
    image = to_image(words)
    s = load_image(image)
    assert run(s, 3).state.regs[10] == 0x12345678


def test_fixture_images_are_current():
    for name in fixtures.FIXTURES:
        assert fixtures.build_image(name) == fixtures.image_text(name)

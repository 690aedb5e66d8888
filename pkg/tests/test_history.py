import random

import pytest
from hypothesis import given, strategies as st

from bplab.errors import ContractViolation
from bplab.history import GlobalHistory
from tests.conftest import fixture_run

FOLDS = [(4, 10), (7, 10), (13, 9), (24, 10), (43, 9), (78, 10), (141, 9), (256, 10), (5, 3)]


def oracle_folds(bits, folds):
    """Fold from a plain list (oldest first) without touching the buffer."""
    out = []
    for length, width in folds:
        v = 0
        for age, b in enumerate(reversed(bits[-length:])):
            v ^= b << (age % width)
        out.append(v)
    return out


def run_random_sequence(rng, ops, folds=FOLDS):
    h = GlobalHistory(256, folds)
    bits, stack = [], []
    for _ in range(ops):
        r = rng.random()
        if r < 0.15:
            stack.append((h.checkpoint(), len(bits)))
        elif r < 0.3 and stack:
            cp, n = stack.pop()
            if h._writes - cp.writes > h.size - h.max_length:
                with pytest.raises(ContractViolation):
                    h.restore(cp)
                continue
            h.restore(cp)
            del bits[n:]
        else:
            b = rng.random() < 0.5
            h.push(b)
            bits.append(int(b))
        if h.folds != oracle_folds(bits, folds):
            return False
        # checkpoints older than the buffer margin can no longer be honoured
        stack = stack[-4:]
    return True


def test_buffer_size():
    h = GlobalHistory(256, FOLDS)
    assert h.size == 512 and h.size > 256 + 3


def test_zero_absorption():
    h = GlobalHistory(256, FOLDS)
    for _ in range(10):
        h.push(True)
    for _ in range(256):
        h.push(False)
    assert h.folds == [0] * len(FOLDS)


def test_single_undo():
    h = GlobalHistory(256, FOLDS)
    for b in (1, 0, 1, 1):
        h.push(b)
    before = list(h.folds)
    cp = h.checkpoint()
    h.push(True)
    h.restore(cp)
    assert h.folds == before


def test_replay_after_restore():
    a, b = GlobalHistory(64, FOLDS[:3]), GlobalHistory(64, FOLDS[:3])
    for x in (1, 1, 0):
        a.push(x)
        b.push(x)
    cp = a.checkpoint()
    for x in (0, 0, 1):
        a.push(x)
    a.restore(cp)
    for x in (1, 0, 1):
        a.push(x)
        b.push(x)
    assert a.folds == b.folds and a.recent(6) == b.recent(6)


def test_stale_checkpoint_rejected():
    h = GlobalHistory(8, [(8, 3)])
    cp = h.checkpoint()
    for _ in range(h.size - h.max_length + 1):
        h.push(True)
    with pytest.raises(ContractViolation):
        h.restore(cp)


def test_bit_ages_and_int_view():
    h = GlobalHistory(16)
    for b in (1, 0, 0, 1, 1):
        h.push(b)
    assert h.recent(5) == [1, 1, 0, 0, 1]
    assert h.as_int(5) == 0b10011
    assert h.bit(0) == 1 and h.bit(2) == 0


def test_invalid_fold():
    with pytest.raises(ValueError):
        GlobalHistory(16, [(0, 4)])


def test_random_recovery_sequences():
    rng = random.Random(8)
    for _ in range(100):
        assert run_random_sequence(rng, 100)


@given(st.lists(st.booleans(), max_size=600))
def test_incremental_equals_scratch(bits):
    folds = [(3, 2), (17, 5), (40, 7), (300, 11)]
    h = GlobalHistory(300, folds)
    for b in bits:
        h.push(b)
    assert h.folds == oracle_folds([int(b) for b in bits], folds)
    assert h.folds == h.scratch_folds()


def test_program1_history_pattern():
    from bplab.pipeline import Frontend, simulate
    log = []
    simulate(fixture_run("program1").trace, Frontend.for_level("+batage"), log=log)
    bits = "".join(str(r.history_bit) for r in log)
    groups = [bits[i:i + 3] for i in range(0, 49 * 3, 3)]
    assert groups == ["011", "111"] * 24 + ["011"]

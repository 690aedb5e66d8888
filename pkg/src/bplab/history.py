"""Speculative global history: a circular bit buffer plus folded registers.

Each fold compresses the newest ``length`` outcome bits into ``width`` bits,
with the bit of age ``k`` (0 = newest) landing at position ``k % width``. The
folds are maintained incrementally by rotate-and-inject on every push, and a
checkpoint is just the write pointer plus the fold values.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import ContractViolation

SPECULATION_MARGIN = 8


@dataclass(frozen=True, slots=True)
class FoldSpec:
    length: int
    width: int


@dataclass(frozen=True, slots=True)
class HistoryCheckpoint:
    wptr: int
    writes: int
    folds: tuple[int, ...]


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


class GlobalHistory:
    def __init__(self, max_length: int, folds: Iterable[tuple[int, int]] = (),
                 margin: int = SPECULATION_MARGIN):
        specs = [FoldSpec(int(length), int(width)) for length, width in folds]
        for s in specs:
            if s.length < 1 or s.width < 1:
                raise ValueError(f"invalid fold {s}")
        self.max_length = max([max_length, *(s.length for s in specs)])
        self.size = _next_pow2(self.max_length + margin)
        self.specs: tuple[FoldSpec, ...] = tuple(specs)
        self.folds = [0] * len(specs)
        self._bits = bytearray(self.size)
        self._mask = self.size - 1
        self.wptr = 0
        self._writes = 0
        # (length, rotate-out position, width, mask) per fold, for the hot loop
        self._plan = [(s.length, s.length % s.width, s.width, (1 << s.width) - 1) for s in specs]

    def push(self, taken: bool) -> None:
        bit = 1 if taken else 0
        bits, mask = self._bits, self._mask
        w = self.wptr
        bits[w] = bit
        self.wptr = w = (w + 1) & mask
        self._writes += 1
        folds = self.folds
        for j, (length, out_pos, width, fmask) in enumerate(self._plan):
            f = (folds[j] << 1) | bit
            f ^= bits[(w - 1 - length) & mask] << out_pos
            f ^= f >> width
            folds[j] = f & fmask

    def bit(self, age: int) -> int:
        """Outcome bit pushed ``age`` pushes ago (0 = newest)."""
        if not 0 <= age < self.size:
            raise IndexError(age)
        return self._bits[(self.wptr - 1 - age) & self._mask]

    def recent(self, n: int) -> list[int]:
        """Newest ``n`` bits, newest first."""
        return [self.bit(a) for a in range(n)]

    def as_int(self, n: int) -> int:
        """Newest ``n`` bits packed with the newest at bit 0."""
        v = 0
        for a in range(n - 1, -1, -1):
            v = (v << 1) | self.bit(a)
        return v

    def checkpoint(self) -> HistoryCheckpoint:
        return HistoryCheckpoint(self.wptr, self._writes, tuple(self.folds))

    def restore(self, cp: HistoryCheckpoint) -> None:
        since = self._writes - cp.writes
        if since < 0:
            raise ContractViolation("checkpoint is from the future")
        if since > self.size - self.max_length:
            raise ContractViolation(
                f"{since} pushes since checkpoint overwrite live history "
                f"(buffer {self.size}, longest window {self.max_length})"
            )
        self.wptr = cp.wptr
        self.folds[:] = cp.folds

    def scratch_folds(self) -> list[int]:
        """Recompute every fold directly from the buffer (for self-checks)."""
        out = []
        for s in self.specs:
            v = 0
            for age in range(s.length):
                v ^= self.bit(age) << (age % s.width)
            out.append(v)
        return out


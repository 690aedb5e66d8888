"""Table of 2-bit saturating counters indexed by pc."""
from __future__ import annotations


class Bimodal:
    def __init__(self, entries: int = 4096, init: int = 1):
        if entries < 1 or entries & (entries - 1):
            raise ValueError("entries must be a power of two")
        if not 0 <= init <= 3:
            raise ValueError("init must be in [0, 3]")
        self.counters = [init] * entries
        self._mask = entries - 1

    def index(self, pc: int) -> int:
        return (pc >> 2) & self._mask

    def predict(self, pc: int) -> bool:
        return self.counters[self.index(pc)] >= 2

    def update(self, pc: int, taken: bool) -> None:
        i = self.index(pc)
        c = self.counters[i]
        self.counters[i] = min(c + 1, 3) if taken else max(c - 1, 0)

"""Circular return address stack with top-of-stack pointer recovery."""
from __future__ import annotations


class Ras:
    """Fixed-capacity circular stack.

    Overflow silently overwrites the oldest entry and underflow returns
    whatever the slot holds (zero if never written). Recovery restores only
    the top-of-stack pointer, so the sole destructive sequence after a
    checkpoint is a pop followed by a push.
    """

    def __init__(self, capacity: int = 16):
        if capacity < 1 or capacity & (capacity - 1):
            raise ValueError("capacity must be a power of two")
        self.capacity = capacity
        self.entries = [0] * capacity
        self.tos = 0

    def push(self, addr: int) -> None:
        self.tos = (self.tos + 1) % self.capacity
        self.entries[self.tos] = addr & 0xFFFFFFFF

    def pop(self) -> int:
        value = self.entries[self.tos]
        self.tos = (self.tos - 1) % self.capacity
        return value

    def peek(self) -> int:
        return self.entries[self.tos]

    def snapshot(self) -> int:
        return self.tos

    def restore(self, checkpoint: int) -> None:
        if not 0 <= checkpoint < self.capacity:
            raise ValueError(f"checkpoint {checkpoint} out of range")
        self.tos = checkpoint

    def __repr__(self) -> str:
        return f"Ras(capacity={self.capacity}, tos={self.tos})"

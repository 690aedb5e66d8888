"""BATAGE conditional branch predictor.

A bimodal base table plus ``num_banks`` tagged banks indexed by hashes of the
pc and geometrically longer slices of global history. Each tagged entry holds
a dual counter ``(n_t, n_nt)``; the prediction comes from the most confident
hitting entry, ties going to the longest history. Training happens at
retirement from the :class:`PredictMeta` captured at prediction time.

Confidence is the estimated miss probability ``p = (m + 1) / (s + 2)`` with
``m = min(n_t, n_nt)`` and ``s = n_t + n_nt``: high when ``p <= 1/6``, medium
when ``p <= 1/3``, low otherwise. The bimodal base reports medium when
saturated and low otherwise, so it never outranks a high-confidence entry.

Five xorshift32 generators drive the randomized policies:

* #1 picks the first bank tried for allocation,
* #2 is compared against the allocation throttle (CAT),
* #3 decides whether a skipped high-confidence victim decays,
* #4 and #5 are reserved.
"""
from __future__ import annotations

import enum
import functools
import hashlib
import itertools
import sys
from array import array
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import ContractViolation
from .history import GlobalHistory

MASK32 = 0xFFFFFFFF
SEEDS = (2463534242, 1850600128, 3837179466, 4290344314, 614373416)

RNG_ALLOC_BANK, RNG_THROTTLE, RNG_DECAY = 0, 1, 2


def rng_next(x: int) -> tuple[int, int]:
    """One xorshift32 step; returns ``(new_state, output)`` (they are equal)."""
    x ^= (x << 13) & MASK32
    x ^= x >> 17
    x ^= (x << 5) & MASK32
    return x, x


class Xorshift32:
    __slots__ = ("x",)

    def __init__(self, seed: int):
        if seed & MASK32 == 0:
            raise ValueError("xorshift32 state must be non-zero")
        self.x = seed & MASK32

    def next(self) -> int:
        self.x, out = rng_next(self.x)
        return out


class Confidence(enum.IntEnum):
    LOW = 0
    MEDIUM = 1
    HIGH = 2


def confidence(n_t: int, n_nt: int) -> Confidence:
    m = min(n_t, n_nt)
    s2 = n_t + n_nt + 2
    if 6 * (m + 1) <= s2:
        return Confidence.HIGH
    if 3 * (m + 1) <= s2:
        return Confidence.MEDIUM
    return Confidence.LOW


def base_confidence(counter: int) -> Confidence:
    return Confidence.MEDIUM if counter in (0, 3) else Confidence.LOW


def geometric_lengths(num_banks: int, shortest: int, longest: int) -> tuple[int, ...]:
    if num_banks == 1:
        return (longest,)
    ratio = (longest / shortest) ** (1 / (num_banks - 1))
    out: list[int] = []
    for i in range(num_banks):
        length = int(round(shortest * ratio**i))
        if out and length <= out[-1]:
            length = out[-1] + 1
        out.append(length)
    out[-1] = max(out[-1], longest)
    return tuple(out)


@dataclass(frozen=True)
class BatageConfig:
    num_banks: int = 8
    history_lengths: Optional[tuple[int, ...]] = None
    entries_per_bank: int = 1024
    tag_bits: int = 10
    counter_max: int = 7
    cat_max: int = 255
    base_entries: int = 4096
    min_history: int = 4
    max_history: int = 256

    def __post_init__(self):
        lengths = self.history_lengths
        if lengths is None:
            lengths = geometric_lengths(self.num_banks, self.min_history, self.max_history)
        lengths = tuple(int(x) for x in lengths)
        object.__setattr__(self, "history_lengths", lengths)
        if len(lengths) != self.num_banks:
            raise ValueError("history_lengths must have num_banks entries")
        if any(b <= a for a, b in zip(lengths, lengths[1:])) or lengths[0] < 1:
            raise ValueError("history_lengths must be positive and strictly increasing")
        for name in ("entries_per_bank", "base_entries"):
            n = getattr(self, name)
            if n < 2 or n & (n - 1):
                raise ValueError(f"{name} must be a power of two >= 2")
        if self.tag_bits < 2:
            raise ValueError("tag_bits must be >= 2")
        if self.counter_max < 1 or self.cat_max < 1:
            raise ValueError("counter_max and cat_max must be >= 1")

    @property
    def index_bits(self) -> int:
        return self.entries_per_bank.bit_length() - 1

    @functools.cached_property
    def fold_layout(self) -> tuple[tuple[tuple[int, int], ...], tuple[tuple[int, int, int], ...]]:
        """Distinct ``(length, width)`` folds, and per bank the slots of its
        index, tag and shifted-tag folds (index and tag share a slot when
        their widths match)."""
        specs: list[tuple[int, int]] = []
        slots = []
        for length in self.history_lengths:
            bank = []
            for spec in ((length, self.index_bits), (length, self.tag_bits), (length, self.tag_bits - 1)):
                if spec not in specs:
                    specs.append(spec)
                bank.append(specs.index(spec))
            slots.append(tuple(bank))
        return tuple(specs), tuple(slots)

    def fold_specs(self) -> list[tuple[int, int]]:
        return list(self.fold_layout[0])


def new_history(cfg: BatageConfig) -> GlobalHistory:
    return GlobalHistory(max(cfg.history_lengths), cfg.fold_specs())


def compute_keys(cfg: BatageConfig, pc: int, history: GlobalHistory) -> list[tuple[int, int]]:
    """Per-bank ``(index, tag)`` from the pc and the history's folded registers."""
    word = pc >> 2
    ibits, tbits = cfg.index_bits, cfg.tag_bits
    imask, tmask = (1 << ibits) - 1, (1 << tbits) - 1
    pc_index = (word ^ (word >> ibits)) & imask
    pc_tag = (word ^ (word >> tbits)) & tmask
    folds = history.folds
    keys = []
    for si, st, st2 in cfg.fold_layout[1]:
        f_idx, f_tag, f_tag2 = folds[si], folds[st], folds[st2]
        keys.append(((pc_index ^ f_idx) & imask, (pc_tag ^ f_tag ^ (f_tag2 << 1)) & tmask))
    return keys


@dataclass(frozen=True, slots=True)
class PredictMeta:
    pc: int
    indices: tuple[int, ...]
    tags: tuple[int, ...]
    hits: tuple[bool, ...]
    chosen: int  # bank number, or -1 for the bimodal base
    confidence: Confidence
    taken: bool
    base_index: int
    epoch: int = field(compare=False)

    @property
    def from_tagged(self) -> bool:
        return self.chosen >= 0


def canonical_digest(base: Sequence[int], entries: Iterable[tuple[int, int, int, int, int]],
                     cat: int, rng_states: Sequence[int]) -> str:
    """Digest of a predictor state; ``entries`` are ``(bank, index, tag, n_t, n_nt)``.

    Slots with a zero tag and zero counters are treated as never written.
    """
    live = array("I", itertools.chain.from_iterable(sorted(e for e in entries if e[2] or e[3] or e[4])))
    if sys.byteorder == "big":
        live.byteswap()
    h = hashlib.sha256(bytes(base))
    h.update(live.tobytes())
    h.update(b"cat=%d;rng=" % cat + b",".join(b"%d" % s for s in rng_states))
    return h.hexdigest()


class Batage:
    def __init__(self, config: BatageConfig = BatageConfig()):
        self.config = config
        n, e = config.num_banks, config.entries_per_bank
        self.tags = [[0] * e for _ in range(n)]
        self.n_t = [[0] * e for _ in range(n)]
        self.n_nt = [[0] * e for _ in range(n)]
        self.base = [1] * config.base_entries
        self.cat = 0
        self.rngs = [Xorshift32(s) for s in SEEDS]
        self.updates = 0

    def new_history(self) -> GlobalHistory:
        return new_history(self.config)

    def _choose(self, candidates: list[tuple[Confidence, int, int]]) -> tuple[Confidence, int, int]:
        # (confidence, history length, bank); longest history breaks ties
        return max(candidates, key=lambda c: (c[0], c[1]))

    def predict(self, pc: int, history: GlobalHistory) -> tuple[bool, PredictMeta]:
        cfg = self.config
        keys = compute_keys(cfg, pc, history)
        base_index = (pc >> 2) & (cfg.base_entries - 1)
        counter = self.base[base_index]
        candidates = [(base_confidence(counter), 0, -1)]
        hits = []
        for b, (i, t) in enumerate(keys):
            nt, nnt = self.n_t[b][i], self.n_nt[b][i]
            hit = self.tags[b][i] == t and (nt or nnt) != 0
            hits.append(hit)
            if hit:
                candidates.append((confidence(nt, nnt), cfg.history_lengths[b], b))
        conf, _, chosen = self._choose(candidates)
        if chosen < 0:
            taken = counter >= 2
        else:
            i = keys[chosen][0]
            taken = self.n_t[chosen][i] > self.n_nt[chosen][i]
        meta = PredictMeta(
            pc, tuple(k[0] for k in keys), tuple(k[1] for k in keys), tuple(hits),
            chosen, conf, taken, base_index, self.updates,
        )
        return taken, meta

    def update(self, meta: PredictMeta, taken: bool) -> None:
        if meta.epoch != self.updates:
            raise ContractViolation(
                f"stale prediction metadata (epoch {meta.epoch}, state at {self.updates})"
            )
        self.updates += 1
        if meta.chosen < 0:
            c = self.base[meta.base_index]
            self.base[meta.base_index] = min(c + 1, 3) if taken else max(c - 1, 0)
        else:
            self._train(meta.chosen, meta.indices[meta.chosen], taken)
        if meta.taken != taken or meta.confidence != Confidence.HIGH:
            self._allocate(meta, taken)

    def _train(self, bank: int, i: int, taken: bool) -> None:
        cmax = self.config.counter_max
        inc, dec = (self.n_t, self.n_nt) if taken else (self.n_nt, self.n_t)
        if inc[bank][i] < cmax:
            inc[bank][i] += 1
        elif dec[bank][i] > 0:
            dec[bank][i] -= 1

    def _decay(self, bank: int, i: int) -> None:
        if self.n_t[bank][i] >= self.n_nt[bank][i]:
            if self.n_t[bank][i]:
                self.n_t[bank][i] -= 1
        else:
            self.n_nt[bank][i] -= 1

    def _allocate(self, meta: PredictMeta, taken: bool) -> None:
        cfg = self.config
        first = meta.chosen + 1
        if first >= cfg.num_banks:
            return
        if self.rngs[RNG_THROTTLE].next() % (cfg.cat_max + 1) < self.cat:
            return
        start = first + self.rngs[RNG_ALLOC_BANK].next() % (cfg.num_banks - first)
        for b in range(start, cfg.num_banks):
            i = meta.indices[b]
            if confidence(self.n_t[b][i], self.n_nt[b][i]) == Confidence.HIGH:
                if self.rngs[RNG_DECAY].next() & 3 == 0:
                    self._decay(b, i)
                continue
            self.tags[b][i] = meta.tags[b]
            self.n_t[b][i], self.n_nt[b][i] = (1, 0) if taken else (0, 1)
            self.cat = max(self.cat - 1, 0)
            return
        self.cat = min(self.cat + 1, cfg.cat_max)

    def entries(self) -> Iterable[tuple[int, int, int, int, int]]:
        for b in range(self.config.num_banks):
            tags, nt, nnt = self.tags[b], self.n_t[b], self.n_nt[b]
            for i in range(self.config.entries_per_bank):
                if tags[i] or nt[i] or nnt[i]:
                    yield (b, i, tags[i], nt[i], nnt[i])

    def digest(self) -> str:
        return canonical_digest(self.base, self.entries(), self.cat, [r.x for r in self.rngs])

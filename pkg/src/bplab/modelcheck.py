"""Naive reference BATAGE and a randomized equivalence driver.

The reference keeps its tagged entries in a dict, holds history as a plain
integer (newest outcome at bit 0), folds that history from scratch on every
lookup and computes confidence with exact fractions. None of the optimized
predictor's machinery is reused apart from the digest serialization.
"""
from __future__ import annotations

import functools
import gc
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

from .batage import SEEDS, Batage, BatageConfig, canonical_digest

_M32 = 0xFFFFFFFF


def _xorshift(x: int) -> int:
    x ^= (x << 13) & _M32
    x ^= x >> 17
    return x ^ ((x << 5) & _M32)


def _window_folds(history: int, lengths: tuple[int, ...], width: int) -> list[int]:
    """Fold of the newest ``L`` bits for every ``L`` in ``lengths`` (ascending).

    Walks the history once in width-bit chunks: a window's fold is the XOR of
    the whole chunks inside it plus its partial top chunk.
    """
    mask = (1 << width) - 1
    out, acc, done = [], 0, 0
    for length in lengths:
        full = length // width
        while done < full:
            acc ^= (history >> (done * width)) & mask
            done += 1
        out.append(acc ^ ((history >> (full * width)) & ((1 << (length - full * width)) - 1)))
    return out


@functools.cache
def _confidence(n_t: int, n_nt: int) -> int:
    p_miss = Fraction(min(n_t, n_nt) + 1, n_t + n_nt + 2)
    if p_miss <= Fraction(1, 6):
        return 2
    if p_miss <= Fraction(1, 3):
        return 1
    return 0


class ReferenceBatage:
    def __init__(self, config: BatageConfig = BatageConfig()):
        self.cfg = config
        self.entries: dict[tuple[int, int], list[int]] = {}  # (bank, index) -> [tag, n_t, n_nt]
        self.base = [1] * config.base_entries
        self.cat = 0
        self.rng = list(SEEDS)

    def _rand(self, which: int) -> int:
        self.rng[which] = _xorshift(self.rng[which])
        return self.rng[which]

    def _keys(self, pc: int, history: int) -> list[tuple[int, int]]:
        cfg = self.cfg
        ibits = cfg.entries_per_bank.bit_length() - 1
        tbits = cfg.tag_bits
        word = pc >> 2
        keys = []
        lengths = cfg.history_lengths
        f_index = _window_folds(history, lengths, ibits)
        f_tag = f_index if tbits == ibits else _window_folds(history, lengths, tbits)
        f_tag2 = _window_folds(history, lengths, tbits - 1)
        for b in range(cfg.num_banks):
            index = (word ^ (word >> ibits) ^ f_index[b]) % (1 << ibits)
            tag = (word ^ (word >> tbits) ^ f_tag[b] ^ (f_tag2[b] << 1)) % (1 << tbits)
            keys.append((index, tag))
        return keys

    def predict(self, pc: int, history: int) -> tuple[bool, dict]:
        """Return the prediction and a dict of everything ``update`` needs."""
        keys = self._keys(pc, history)
        base_index = (pc >> 2) % self.cfg.base_entries
        counter = self.base[base_index]
        best = (1 if counter in (0, 3) else 0, 0, -1)
        for bank, (index, tag) in enumerate(keys):
            entry = self.entries.get((bank, index))
            if entry is None or entry[0] != tag or entry[1] + entry[2] == 0:
                continue
            cand = (_confidence(entry[1], entry[2]), self.cfg.history_lengths[bank], bank)
            if cand[0] > best[0] or (cand[0] == best[0] and cand[1] > best[1]):
                best = cand
        conf, _, chosen = best
        if chosen == -1:
            taken = counter >= 2
        else:
            entry = self.entries[(chosen, keys[chosen][0])]
            taken = entry[1] > entry[2]
        return taken, {"keys": keys, "base": base_index, "chosen": chosen, "conf": conf, "taken": taken}

    def update(self, info: dict, taken: bool) -> None:
        cfg = self.cfg
        chosen, keys = info["chosen"], info["keys"]
        if chosen == -1:
            c = self.base[info["base"]]
            self.base[info["base"]] = min(3, c + 1) if taken else max(0, c - 1)
        else:
            entry = self.entries[(chosen, keys[chosen][0])]
            up, down = (1, 2) if taken else (2, 1)
            if entry[up] < cfg.counter_max:
                entry[up] += 1
            elif entry[down] > 0:
                entry[down] -= 1
        if info["taken"] == taken and info["conf"] == 2:
            return
        longer = list(range(chosen + 1, cfg.num_banks))
        if not longer:
            return
        if self._rand(1) % (cfg.cat_max + 1) < self.cat:
            return
        start = longer[self._rand(0) % len(longer)]
        for bank in range(start, cfg.num_banks):
            index, tag = keys[bank]
            entry = self.entries.setdefault((bank, index), [0, 0, 0])
            if _confidence(entry[1], entry[2]) == 2:
                if self._rand(2) % 4 == 0:
                    if entry[1] >= entry[2]:
                        entry[1] = max(0, entry[1] - 1)
                    else:
                        entry[2] -= 1
                continue
            entry[:] = [tag, 1, 0] if taken else [tag, 0, 1]
            self.cat = max(0, self.cat - 1)
            return
        self.cat = min(cfg.cat_max, self.cat + 1)

    def digest(self) -> str:
        entries = ((b, i, *e) for (b, i), e in self.entries.items())
        return canonical_digest(self.base, entries, self.cat, self.rng)


def reference_predict_update(ref: ReferenceBatage, pc: int, history: int, outcome: bool) -> tuple[bool, str]:
    taken, info = ref.predict(pc, history)
    ref.update(info, outcome)
    return taken, ref.digest()


@dataclass
class Verdict:
    passed: bool
    steps: int
    step: Optional[int] = None
    stimulus: Optional[tuple[int, bool]] = None
    impl_digest: Optional[str] = None
    ref_digest: Optional[str] = None
    detail: str = ""

    def __str__(self) -> str:
        if self.passed:
            return f"PASS after {self.steps} steps"
        return (f"FAIL at step {self.step}: {self.detail}; stimulus pc={self.stimulus[0]:#x} "
                f"outcome={int(self.stimulus[1])}; impl={self.impl_digest} ref={self.ref_digest}")


class _Stimuli:
    """Seeded branch stream with a mix of biased, periodic and correlated branches."""

    def __init__(self, seed: int, num_pcs: int = 48):
        self.rand = random.Random(seed)
        r = self.rand
        self.pcs = [r.randrange(0, 1 << 14) * 4 for _ in range(num_pcs)]
        self.behaviour = []
        for _ in range(num_pcs):
            kind = r.choice(("bias", "period", "corr"))
            if kind == "bias":
                self.behaviour.append(("bias", r.choice((0.02, 0.1, 0.5, 0.9, 0.98))))
            elif kind == "period":
                self.behaviour.append(("period", [r.random() < 0.5 for _ in range(r.randint(2, 6))]))
            else:
                self.behaviour.append(("corr", r.randint(0, 12)))
        self.counts = [0] * num_pcs

    def next(self, history: int) -> tuple[int, bool]:
        r = self.rand
        k = r.randrange(len(self.pcs))
        kind, arg = self.behaviour[k]
        if kind == "bias":
            outcome = r.random() < arg
        elif kind == "period":
            outcome = arg[self.counts[k] % len(arg)]
        else:
            outcome = bool((history >> arg) & 1) ^ (r.random() < 0.05)
        self.counts[k] += 1
        return self.pcs[k], outcome


def run_equivalence(seed: int, steps: int, *, config: Optional[BatageConfig] = None,
                    impl_factory: Callable[[BatageConfig], Batage] = Batage,
                    digest_every: int = 1000) -> Verdict:
    """Drive the optimized and reference predictors with identical stimuli.

    Predictions, provider choice, allocation throttle and PRNG states are
    compared every step; the full state digest every ``digest_every`` steps
    and after the last one.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    # the loop allocates only acyclic garbage; pausing the cycle collector
    # keeps long runs from rescanning the caller's heap
    paused = gc.isenabled()
    gc.disable()
    try:
        return _drive(seed, steps, config or BatageConfig(), impl_factory, digest_every)
    finally:
        if paused:
            gc.enable()


def _drive(seed: int, steps: int, config: BatageConfig,
           impl_factory: Callable[[BatageConfig], Batage], digest_every: int) -> Verdict:
    impl = impl_factory(config)
    ref = ReferenceBatage(config)
    hist = impl.new_history()
    ref_hist = 0
    hmask = (1 << (max(config.history_lengths) + 1)) - 1
    stim = _Stimuli(seed)

    def fail(step, st, detail):
        return Verdict(False, step, step, st, impl.digest(), ref.digest(), detail)

    for step in range(steps):
        pc, outcome = stim.next(ref_hist)
        got, meta = impl.predict(pc, hist)
        want, info = ref.predict(pc, ref_hist)
        if got != want or meta.chosen != info["chosen"]:
            return fail(step, (pc, outcome),
                        f"prediction {got}/{want}, provider {meta.chosen}/{info['chosen']}")
        impl.update(meta, outcome)
        ref.update(info, outcome)
        if impl.cat != ref.cat or [g.x for g in impl.rngs] != ref.rng:
            return fail(step, (pc, outcome), "throttle or PRNG state diverged")
        if (step + 1) % digest_every == 0 or step + 1 == steps:
            if impl.digest() != ref.digest():
                return fail(step, (pc, outcome), "state digest mismatch")

        # wrong-path noise on the speculative history, then the real outcome
        if stim.rand.random() < 0.1:
            cp = hist.checkpoint()
            for _ in range(stim.rand.randint(1, 3)):
                hist.push(stim.rand.random() < 0.5)
            hist.restore(cp)
        hist.push(outcome)
        ref_hist = ((ref_hist << 1) | outcome) & hmask
        if stim.rand.random() < 0.2:  # an interleaved jump
            hist.push(True)
            ref_hist = ((ref_hist << 1) | 1) & hmask
    return Verdict(True, steps)

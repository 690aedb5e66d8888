"""Trace-driven timing model of the 4-stage in-order frontend.

Every retired instruction costs one cycle. A decode-stage redirect that
changes the fetch-stage next pc adds ``decode_redirect_bubbles``; a wrong
final prediction, found in execute, adds ``execute_mispredict_bubbles``.
Wrong-path instructions are never executed, so penalties are pure bubbles.

Frontend levels are cumulative, mirroring an ablation study::

    none < static < static+ras < static+ras+btb < +bimodal < +batage
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .batage import Batage, BatageConfig, PredictMeta
from .bimodal import Bimodal
from .btb import Btb, BtbConfig, BtbHit, BtbKind
from .core import RetireEvent
from .errors import ContractViolation
from .history import GlobalHistory
from .isa import CtKind, DecodedCt
from .ras import Ras
from .static import predict_at_decode

LEVELS = ("none", "static", "static+ras", "static+ras+btb", "+bimodal", "+batage")
CLASSES = ("cond_branch", "direct_jump", "indirect_jump", "ret")
JUMP_CLASSES = ("direct_jump", "indirect_jump", "ret")


@dataclass(frozen=True)
class TimingConfig:
    decode_redirect_bubbles: int = 1
    execute_mispredict_bubbles: int = 2

    def __post_init__(self):
        if self.decode_redirect_bubbles < 0 or self.execute_mispredict_bubbles < 0:
            raise ValueError("bubble counts must be >= 0")


@dataclass
class ClassStats:
    count: int = 0
    mispredicts: int = 0


@dataclass
class SimStats:
    retired: int = 0
    cycles: int = 0
    penalty_cycles: int = 0
    decode_redirects: int = 0
    classes: dict[str, ClassStats] = field(default_factory=lambda: {c: ClassStats() for c in CLASSES})

    @property
    def ipc(self) -> float:
        return self.retired / self.cycles if self.cycles else 0.0

    @property
    def perfect_ipc(self) -> float:
        return perfect_ipc(self)

    def mpki(self, cls: str) -> float:
        return self.classes[cls].mispredicts * 1000 / self.retired if self.retired else 0.0

    @property
    def jump_mpki(self) -> float:
        return sum(self.classes[c].mispredicts for c in JUMP_CLASSES) * 1000 / self.retired if self.retired else 0.0

    @property
    def branch_mpki(self) -> float:
        return self.mpki("cond_branch")

    @property
    def branch_accuracy(self) -> float:
        b = self.classes["cond_branch"]
        return 1.0 - b.mispredicts / b.count if b.count else 1.0

    def to_dict(self) -> dict:
        return {
            "retired": self.retired,
            "cycles": self.cycles,
            "penalty_cycles": self.penalty_cycles,
            "decode_redirects": self.decode_redirects,
            "ipc": self.ipc,
            "perfect_ipc": self.perfect_ipc,
            "classes": {
                name: {"count": c.count, "mispredicts": c.mispredicts, "mpki": self.mpki(name)}
                for name, c in self.classes.items()
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SimStats":
        stats = cls(doc["retired"], doc["cycles"], doc["penalty_cycles"], doc.get("decode_redirects", 0))
        for name in CLASSES:
            c = doc["classes"][name]
            stats.classes[name] = ClassStats(c["count"], c["mispredicts"])
        return stats


def perfect_ipc(stats: SimStats) -> float:
    """IPC with every misprediction bubble removed."""
    base = stats.cycles - stats.penalty_cycles
    return stats.retired / base if base else 0.0


@dataclass
class Frontend:
    level: str
    static: bool = False
    ras: Optional[Ras] = None
    btb: Optional[Btb] = None
    bimodal: Optional[Bimodal] = None
    batage: Optional[Batage] = None
    history: Optional[GlobalHistory] = None

    @classmethod
    def for_level(cls, level: str, *, ras_size: int = 16, btb: BtbConfig = BtbConfig(),
                  bimodal_entries: int = 4096, batage: BatageConfig = BatageConfig()) -> "Frontend":
        if level not in LEVELS:
            raise ValueError(f"unknown level {level!r}; expected one of {', '.join(LEVELS)}")
        rank = LEVELS.index(level)
        fe = cls(level, static=rank >= 1)
        if rank >= 2:
            fe.ras = Ras(ras_size)
        if rank >= 3:
            fe.btb = Btb(btb)
        if level == "+bimodal":
            fe.bimodal = Bimodal(bimodal_entries)
        if level == "+batage":
            fe.batage = Batage(batage)
            fe.history = fe.batage.new_history()
        return fe


@dataclass(frozen=True, slots=True)
class EventRecord:
    """Per control-transfer outcome of one simulated instruction."""
    retire_index: int
    pc: int
    stat_class: str
    taken: bool
    predicted: int
    correct: bool
    decode_redirect: bool
    history_bit: Optional[int]
    provider: str


def _btb_matches(hit: BtbHit, ct: DecodedCt) -> bool:
    if hit.kind is BtbKind.BRANCH:
        return ct.kind is CtKind.COND_BRANCH
    if hit.kind is BtbKind.RETURN:
        return ct.is_return
    return ct.kind is not CtKind.COND_BRANCH and not ct.is_return


def simulate(trace: Iterable[RetireEvent], frontend: Frontend, cfg: TimingConfig = TimingConfig(),
             *, retired: Optional[int] = None, log: Optional[list[EventRecord]] = None,
             check_recovery: bool = False) -> SimStats:
    """Run ``trace`` through ``frontend`` and return the timing statistics.

    ``retired`` gives the total instruction count when the trace lists only
    control transfers. With ``check_recovery`` every misprediction recovery is
    verified against a from-scratch recomputation of the history folds.
    """
    stats = SimStats()
    fe = frontend
    ras, btb, hist = fe.ras, fe.btb, fe.history
    last_index = -1
    seen = 0

    for ev in trace:
        if ev.retire_index <= last_index:
            raise ContractViolation(
                f"trace out of order: retire_index {ev.retire_index} after {last_index}"
            )
        last_index = ev.retire_index
        seen += 1
        pc, ct = ev.pc, ev.ct
        fallthrough = (pc + 4) & 0xFFFFFFFF

        # fetch: only the pc is known
        hit = btb.lookup(pc) if btb is not None else None
        fetch_next = fallthrough
        fetch_taken = False
        meta: Optional[PredictMeta] = None
        dyn_taken: Optional[bool] = None
        if fe.batage is not None and ct is not None and ct.kind is CtKind.COND_BRANCH:
            dyn_taken, meta = fe.batage.predict(pc, hist)
        if hit is not None:
            if hit.kind is BtbKind.JUMP:
                fetch_next = hit.target
            elif hit.kind is BtbKind.RETURN:
                fetch_next = ras.peek()
            else:
                if fe.batage is not None:
                    fetch_taken = dyn_taken if dyn_taken is not None else fe.batage.predict(pc, hist)[0]
                elif fe.bimodal is not None:
                    fetch_taken = fe.bimodal.predict(pc)
                else:
                    fetch_taken = True  # a BTB alone acts as always-taken
                if fetch_taken:
                    fetch_next = hit.target

        if ct is None:
            if fetch_next != fallthrough:
                stats.penalty_cycles += cfg.decode_redirect_bubbles
                stats.decode_redirects += 1
            continue

        # decode: the instruction is known
        valid_hit = hit is not None and _btb_matches(hit, ct)
        provider = "none"
        pred_taken = True
        if ct.kind is CtKind.COND_BRANCH:
            if valid_hit:
                pred_taken = fetch_taken
                provider = "batage" if fe.batage else "bimodal" if fe.bimodal else "btb"
            elif meta is not None and meta.from_tagged:
                pred_taken = dyn_taken
                provider = "batage-tagged"
            elif fe.static:
                pred_taken = predict_at_decode(ct, pc).predicted_taken
                provider = "static"
            else:
                pred_taken = False
            decode_next = (pc + ct.imm) & 0xFFFFFFFF if pred_taken else fallthrough
        elif ct.kind is CtKind.DIRECT_JUMP:
            if fe.static:
                decode_next = predict_at_decode(ct, pc).redirect
                provider = "static"
            else:
                decode_next = fetch_next
        else:
            if ct.is_return and ras is not None:
                decode_next = ras.pop()
                provider = "ras"
            elif valid_hit:
                decode_next = fetch_next
                provider = "btb"
            else:
                decode_next = fallthrough

        if ras is not None and ct.is_call:
            ras.push(fallthrough)
        ras_cp = ras.snapshot() if ras is not None else None

        hist_cp = None
        pushed = None
        if hist is not None:
            hist_cp = hist.checkpoint()
            pushed = 1 if pred_taken else 0
            hist.push(pred_taken)

        redirected = decode_next != fetch_next
        if redirected:
            stats.penalty_cycles += cfg.decode_redirect_bubbles
            stats.decode_redirects += 1

        # execute: resolve
        cls_stats = stats.classes[ct.stat_class]
        cls_stats.count += 1
        correct = decode_next == ev.target
        if not correct:
            cls_stats.mispredicts += 1
            stats.penalty_cycles += cfg.execute_mispredict_bubbles
            if ras is not None:
                ras.restore(ras_cp)
            if hist is not None:
                hist.restore(hist_cp)
                if check_recovery and hist.folds != hist.scratch_folds():
                    raise ContractViolation(f"history folds diverged after recovery at pc {pc:#x}")
                pushed = 1 if ev.taken else 0
                hist.push(ev.taken)

        # retire: train
        if btb is not None:
            btb.insert_on_retire(ev)
        if ct.kind is CtKind.COND_BRANCH:
            if fe.bimodal is not None:
                fe.bimodal.update(pc, ev.taken)
            if meta is not None:
                fe.batage.update(meta, ev.taken)

        if log is not None:
            log.append(EventRecord(ev.retire_index, pc, ct.stat_class, ev.taken, decode_next,
                                   correct, redirected, pushed, provider))

    total = seen if retired is None else retired
    if total < seen:
        raise ValueError(f"retired count {total} is smaller than the {seen} listed events")
    stats.retired = total
    stats.cycles = total + stats.penalty_cycles
    return stats

"""Glue between programs, traces, configuration and the timing model."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .batage import BatageConfig
from .btb import BtbConfig
from .core import MachineState, RetireEvent, run
from .pipeline import LEVELS, Frontend, SimStats, TimingConfig, simulate


@dataclass(frozen=True)
class BenchConfig:
    timing: TimingConfig = field(default_factory=TimingConfig)
    ras_size: int = 16
    btb: BtbConfig = field(default_factory=BtbConfig)
    bimodal_entries: int = 4096
    batage: BatageConfig = field(default_factory=BatageConfig)

    @classmethod
    def from_dict(cls, doc: dict) -> "BenchConfig":
        """Build from ``{"timing": {...}, "ras": {"size": K}, "btb": {...},
        "bimodal": {"entries": N}, "batage": {...}}``; every section optional."""
        unknown = set(doc) - {"timing", "ras", "btb", "bimodal", "batage"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")

        def make(kind, section, rename=None):
            data = dict(doc.get(section, {}))
            if rename:
                data = {rename.get(k, k): v for k, v in data.items()}
            names = {f.name for f in dataclasses.fields(kind)}
            bad = set(data) - names
            if bad:
                raise ValueError(f"unknown keys in [{section}]: {sorted(bad)}")
            if kind is BatageConfig and data.get("history_lengths") is not None:
                data["history_lengths"] = tuple(data["history_lengths"])
            return kind(**data)

        ras = doc.get("ras", {})
        bimodal = doc.get("bimodal", {})
        if set(ras) - {"size"} or set(bimodal) - {"entries"}:
            raise ValueError("ras accepts only 'size'; bimodal accepts only 'entries'")
        return cls(
            timing=make(TimingConfig, "timing"),
            ras_size=ras.get("size", 16),
            btb=make(BtbConfig, "btb"),
            bimodal_entries=bimodal.get("entries", 4096),
            batage=make(BatageConfig, "batage"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "BenchConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def frontend(self, level: str) -> Frontend:
        return Frontend.for_level(level, ras_size=self.ras_size, btb=self.btb,
                                  bimodal_entries=self.bimodal_entries, batage=self.batage)


def expand_levels(level: str) -> tuple[str, ...]:
    if level == "all":
        return LEVELS
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}; expected 'all' or one of {', '.join(LEVELS)}")
    return (level,)


def run_bench(trace: Sequence[RetireEvent], level: str, config: BenchConfig = BenchConfig(),
              retired: Optional[int] = None, log: Optional[list] = None) -> SimStats:
    return simulate(trace, config.frontend(level), config.timing, retired=retired, log=log)


def execute(state: MachineState, max_steps: int) -> tuple[list[RetireEvent], MachineState, bool]:
    result = run(state, max_steps)
    return result.trace, result.state, result.truncated

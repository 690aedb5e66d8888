"""Bundled fixture programs.

Each fixture is an assembly source (``NAME.s``) and the memory image
assembled from it (``NAME.hex``). Run ``python -m bplab.fixtures`` to
regenerate the images after editing a source.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..asm import assemble, to_image
from ..core import MachineState, load_image

FIXTURES = ("program1", "fib_recursive", "loop_parity_1000", "strsort_small", "btb_regression")
DEFAULT_STEPS = 1_000_000


def source(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.s").read_text()


def image_text(name: str) -> str:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(FIXTURES)}")
    return resources.files(__name__).joinpath(f"{name}.hex").read_text()


def load(name: str) -> MachineState:
    return load_image(image_text(name), entry=0)


def build_image(name: str) -> str:
    src = source(name)
    header = f"{name}: assembled from {name}.s\nentry 0x00000000"
    return to_image(assemble(src), header)


def main() -> None:
    here = Path(__file__).parent
    for name in FIXTURES:
        (here / f"{name}.hex").write_text(build_image(name))
        print(f"wrote {name}.hex")


if __name__ == "__main__":
    main()

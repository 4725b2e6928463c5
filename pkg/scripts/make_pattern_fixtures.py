"""Regenerate fixtures/pattern_fixtures.json.

The fixture file pins the pattern bit-encoding (bit r*k+c = cell at row
r, col c; 1 = white) as 32 pattern -> cell-matrix pairs.  Both the
Python tests and the web UI tests consume it, so the two sides can
never drift apart on rendering.
"""

import json
from pathlib import Path

from scenestat.grid import Pattern, pattern_hex_width
from scenestat.rng import SplitMix64

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    specials = [
        (4, 0x0000),
        (4, 0xFFFF),
        (4, 0xA5A5),
        (4, 0x5A5A),
        (4, 0x000F),  # top row white
        (4, 0x8888),  # right column white
        (4, 0x0001),
        (4, 0x8000),
        (2, 0x0),
        (2, 0xF),
        (2, 0x6),
        (2, 0x9),
        (3, 0x000),
        (3, 0x1FF),
        (3, 0x0AA),
        (3, 0x111),
    ]
    rng = SplitMix64(2024)
    fixtures = []
    seen = set(specials)
    while len(specials) + len(fixtures) < 32:
        k = [2, 3, 4][rng.bounded(3)]
        bits = rng.bounded(1 << (k * k))
        if (k, bits) in seen:
            continue
        seen.add((k, bits))
        fixtures.append((k, bits))
    entries = []
    for k, bits in specials + fixtures:
        p = Pattern(k, bits)
        entries.append(
            {
                "k": k,
                "pattern_hex": format(bits, f"0{pattern_hex_width(k)}x"),
                "cells": p.to_cells().tolist(),
            }
        )
    out = ROOT / "fixtures" / "pattern_fixtures.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(json.dumps(entries, indent=1) + "\n")
    print(f"wrote {out} ({len(entries)} fixtures)")


if __name__ == "__main__":
    main()

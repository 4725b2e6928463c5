"""Algorithmic complexity of small binary patterns.

Complexity is estimated by the frequency with which uniformly random
two-dimensional Turing machines produce a pattern and halt: machines
start on a blank (all-0) unbounded grid and a pattern "is produced"
when the bounding box of every cell the machine ever wrote is exactly
k x k at the halt step.  The estimate for a pattern class u is

    ctm(u) = log2(total qualifying outputs) - log2(outputs in class u)

over dihedral-8 classes (the move set is rotation/reflection symmetric,
so pooling the 8 orientations of a pattern only reduces variance).
Classes never produced get a ceiling of (max observed ctm) + 1 bit so
the table stays total.  Larger grids are scored by block decomposition:
the grid is tiled into table-sized blocks and

    bdm(grid) = sum over distinct block classes u of ctm(u) + log2(multiplicity(u)).

Machine sampling is deterministic given (seed, parameters): draws come
from per-batch SplitMix64 sub-streams (see :mod:`scenestat.rng`), so a
parallel batch schedule cannot change the result.  The hot loop is a
numba kernel; ``run_machine`` is an independent pure-Python interpreter
used both as public API and as the kernel's test oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from numba import njit

from scenestat.grid import BitGrid, Pattern, extract_patch_bits, pattern_hex_width
from scenestat.rng import GOLDEN_GAMMA, SplitMix64, derive_seed

HALT = 0
UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
_MOVE_DELTAS = ((-1, 0), (1, 0), (0, -1), (0, 1))

# machines per sub-seeded batch; fixed so results never depend on scheduling
BATCH_SIZE = 8192


class InsufficientSamplesError(RuntimeError):
    """No halting machine produced a k x k output; carries ``n_halting``."""

    def __init__(self, message: str, n_halting: int):
        super().__init__(message)
        self.n_halting = n_halting


class CtmTableFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TuringMachine2D:
    """A 2-symbol Turing machine on an unbounded grid.

    Entry (state, read symbol) -> (write symbol, move, next state) with
    states 1..n_states and next state 0 meaning halt.  Flat arrays are
    indexed by (state - 1) * 2 + symbol.
    """

    n_states: int
    writes: tuple[int, ...]
    moves: tuple[int, ...]
    nexts: tuple[int, ...]

    def __post_init__(self):
        if self.n_states < 1:
            raise ValueError(f"n_states must be >= 1, got {self.n_states}")
        n = 2 * self.n_states
        if not len(self.writes) == len(self.moves) == len(self.nexts) == n:
            raise ValueError(f"transition table must have exactly {n} entries")
        if any(w not in (0, 1) for w in self.writes):
            raise ValueError("write symbols must be 0/1")
        if any(m not in (UP, DOWN, LEFT, RIGHT) for m in self.moves):
            raise ValueError("moves must be up/down/left/right")
        if any(not 0 <= nx <= self.n_states for nx in self.nexts):
            raise ValueError("next states must be in 0..n_states (0 = halt)")

    def transition(self, state: int, symbol: int) -> tuple[int, int, int]:
        return (
            self.writes[(state - 1) * 2 + symbol],
            self.moves[(state - 1) * 2 + symbol],
            self.nexts[(state - 1) * 2 + symbol],
        )


@dataclass
class MachineRun:
    """Outcome of running a machine: non-halting is normal, not an error."""

    halted: bool
    steps: int
    grid: BitGrid | None  # bounding box of all written cells, when halted


def run_machine(machine: TuringMachine2D, max_steps: int) -> MachineRun:
    """Reference interpreter: blank grid, head at origin, state 1.

    Each step writes, moves, then either halts or changes state.  On
    halt the result grid is the bounding box of every cell ever written
    (unwritten cells inside the box read as blank 0).
    """
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")
    tape: dict[tuple[int, int], int] = {}
    row = col = 0
    state = 1
    for step in range(1, max_steps + 1):
        symbol = tape.get((row, col), 0)
        write, move, nxt = machine.transition(state, symbol)
        tape[(row, col)] = write
        dr, dc = _MOVE_DELTAS[move]
        row += dr
        col += dc
        if nxt == HALT:
            rows = [r for r, _ in tape]
            cols = [c for _, c in tape]
            r0, c0 = min(rows), min(cols)
            cells = np.zeros((max(rows) - r0 + 1, max(cols) - c0 + 1), dtype=np.uint8)
            for (r, c), v in tape.items():
                cells[r - r0, c - c0] = v
            return MachineRun(halted=True, steps=step, grid=BitGrid(cells))
        state = nxt
    return MachineRun(halted=False, steps=max_steps, grid=None)


def draw_machine(rng: SplitMix64, n_states: int) -> TuringMachine2D:
    """Uniform machine: each entry uniform over 2 * 4 * (n_states + 1) choices.

    One bounded draw per entry, decomposed as write = v & 1,
    move = (v >> 1) & 3, next = v >> 3; the sampling kernel consumes the
    stream identically, which tests cross-check.
    """
    span = 8 * (n_states + 1)
    writes, moves, nexts = [], [], []
    for _ in range(2 * n_states):
        v = rng.bounded(span)
        writes.append(v & 1)
        moves.append((v >> 1) & 3)
        nexts.append(v >> 3)
    return TuringMachine2D(n_states, tuple(writes), tuple(moves), tuple(nexts))


# --- dihedral-8 canonicalization -----------------------------------------


def dihedral_variants(bits: int, k: int) -> tuple[int, ...]:
    """The 8 rotations/reflections of a pattern, as packed bit values."""
    cells = Pattern(k, bits).to_cells()
    out = []
    for flipped in (cells, np.fliplr(cells)):
        for rot in range(4):
            out.append(Pattern.from_cells(np.rot90(flipped, rot)).bits)
    return tuple(out)


def canonical_form(bits: int, k: int) -> int:
    """Least packed value among the 8 orientations of the pattern."""
    return min(dihedral_variants(bits, k))


def orbit_size(bits: int, k: int) -> int:
    """Number of distinct orientations of the pattern (1, 2, 4, or 8)."""
    return len(set(dihedral_variants(bits, k)))


@lru_cache(maxsize=None)
def canonical_map(k: int) -> np.ndarray:
    """canonical_map(k)[bits] = canonical form, for all 2**(k*k) patterns."""
    if k > 3:
        raise ValueError("full canonical maps are built only for k <= 3")
    space = 1 << (k * k)
    table = np.empty(space, dtype=np.uint32)
    for bits in range(space):
        table[bits] = canonical_form(bits, k)
    return table


@lru_cache(maxsize=None)
def canonical_classes(k: int) -> tuple[int, ...]:
    """Sorted canonical representatives of all side-k patterns."""
    return tuple(sorted(set(canonical_map(k).tolist())))


# --- CTM table -------------------------------------------------------------


def _round12(value: float) -> float:
    # table values are pinned at 12 significant digits so the CSV
    # serialization round-trips losslessly
    return float(f"{value:.12g}")


@dataclass
class CtmTable:
    """Complexity estimates per canonical pattern class.

    ``entries`` covers every canonical class of the side (never-produced
    classes hold ``ceiling``), so lookups are total.  The metadata fully
    determines the table: regenerating with it is bit-identical.
    """

    side: int
    entries: dict[int, float]
    n_states: int
    n_samples: int
    max_steps: int
    seed: int
    n_halting: int
    ceiling: float

    def __post_init__(self):
        classes = canonical_classes(self.side)
        if set(self.entries) != set(classes):
            missing = set(classes) - set(self.entries)
            extra = set(self.entries) - set(classes)
            raise ValueError(
                f"entries must cover exactly the canonical classes of side {self.side}"
                + (f"; missing {sorted(missing)}" if missing else "")
                + (f"; non-canonical keys {sorted(extra)}" if extra else "")
            )
        for bits, value in self.entries.items():
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"ctm value for {bits:#x} must be finite and >= 0")

    def value(self, pattern: Pattern | int) -> float:
        bits = pattern.bits if isinstance(pattern, Pattern) else pattern
        return self.entries[int(canonical_map(self.side)[bits])]


@dataclass(frozen=True)
class BdmParams:
    """Block decomposition settings: tiled b x b blocks."""

    block_side: int = 2

    def __post_init__(self):
        if self.block_side not in (2, 3, 4):
            raise ValueError(f"block side must be 2, 3, or 4, got {self.block_side}")


# --- sampling kernel ---------------------------------------------------------

_U64 = np.uint64
_GOLDEN = _U64(GOLDEN_GAMMA)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_LOW32 = _U64(0xFFFFFFFF)


@njit(cache=True)
def _mix64_nb(z):
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    return z ^ (z >> _U64(31))


@njit(cache=True)
def _next_u64(state):
    state = state + _GOLDEN
    return _mix64_nb(state), state


@njit(cache=True)
def _bounded(state, n, threshold):
    # Lemire multiply-shift on the high 32 bits, with rejection
    while True:
        z, state = _next_u64(state)
        m = (z >> _U64(32)) * n
        if (m & _LOW32) >= threshold:
            return m >> _U64(32), state


@njit(cache=True)
def _sample_batch(batch_seed, n_machines, n_states, max_steps, k, canon, freq):
    """Run one sub-seeded batch; accumulates class counts, returns n_halting."""
    side = 2 * max_steps + 1
    tape = np.zeros(side * side, dtype=np.uint8)
    stamp = np.zeros(side * side, dtype=np.int64)
    n_entries = 2 * n_states
    writes = np.empty(n_entries, dtype=np.uint8)
    moves = np.empty(n_entries, dtype=np.uint8)
    nexts = np.empty(n_entries, dtype=np.uint8)
    span = _U64(8 * (n_states + 1))
    threshold = (_U64(1 << 32) - span) % span
    state = _U64(batch_seed)
    n_halting = 0
    for gen in range(1, n_machines + 1):
        for e in range(n_entries):
            v, state = _bounded(state, span, threshold)
            writes[e] = v & _U64(1)
            moves[e] = (v >> _U64(1)) & _U64(3)
            nexts[e] = v >> _U64(3)
        row = max_steps
        col = max_steps
        st = 1
        min_r = side
        max_r = -1
        min_c = side
        max_c = -1
        halted = False
        for _ in range(max_steps):
            idx = row * side + col
            sym = tape[idx] if stamp[idx] == gen else 0
            e = (st - 1) * 2 + sym
            tape[idx] = writes[e]
            stamp[idx] = gen
            if row < min_r:
                min_r = row
            if row > max_r:
                max_r = row
            if col < min_c:
                min_c = col
            if col > max_c:
                max_c = col
            mv = moves[e]
            if mv == 0:
                row -= 1
            elif mv == 1:
                row += 1
            elif mv == 2:
                col -= 1
            else:
                col += 1
            nxt = nexts[e]
            if nxt == 0:
                halted = True
                break
            st = nxt
        if halted:
            n_halting += 1
            if max_r - min_r + 1 == k and max_c - min_c + 1 == k:
                bits = 0
                for rr in range(k):
                    for cc in range(k):
                        idx = (min_r + rr) * side + (min_c + cc)
                        if stamp[idx] == gen and tape[idx] == 1:
                            bits |= 1 << (rr * k + cc)
                freq[canon[bits]] += 1
    return n_halting


def sample_output_frequencies(
    k: int, n_states: int, n_samples: int, max_steps: int, seed: int
) -> tuple[np.ndarray, int]:
    """Class-production counts over ``n_samples`` random machines.

    Returns (freq indexed by canonical pattern value, total machines
    halted).  Batches are independent sub-streams, so partial sums over
    any batch partition agree.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")
    canon = canonical_map(k)
    freq = np.zeros(1 << (k * k), dtype=np.int64)
    n_halting = 0
    remaining = n_samples
    batch_index = 0
    while remaining > 0:
        size = min(BATCH_SIZE, remaining)
        n_halting += _sample_batch(
            np.uint64(derive_seed(seed, batch_index)),
            size,
            n_states,
            max_steps,
            k,
            canon,
            freq,
        )
        remaining -= size
        batch_index += 1
    return freq, n_halting


def sample_ctm(
    k: int,
    n_states: int = 4,
    n_samples: int = 1_000_000,
    max_steps: int = 200,
    seed: int = 1,
) -> CtmTable:
    """Estimate complexity for every canonical side-k class by sampling.

    Raises :class:`InsufficientSamplesError` when no halting machine
    produced a k x k bounding box.
    """
    freq, n_halting = sample_output_frequencies(k, n_states, n_samples, max_steps, seed)
    total = int(freq.sum())
    if total == 0:
        raise InsufficientSamplesError(
            f"no halting machine produced a {k}x{k} output in {n_samples} samples "
            f"({n_halting} halted)",
            n_halting,
        )
    # Per-pattern production frequency is the class count averaged over the
    # class orbit: the move set is symmetric under the dihedral group, so
    # each orientation is equiprobable and pooling/orbit-averaging is the
    # unbiased, lower-variance estimate.
    log_total = math.log2(total)
    observed = {
        bits: _round12(log_total - math.log2(int(freq[bits]) / orbit_size(bits, k)))
        for bits in canonical_classes(k)
        if freq[bits] > 0
    }
    ceiling = _round12(max(observed.values()) + 1.0)
    entries = {bits: observed.get(bits, ceiling) for bits in canonical_classes(k)}
    return CtmTable(
        side=k,
        entries=entries,
        n_states=n_states,
        n_samples=n_samples,
        max_steps=max_steps,
        seed=seed,
        n_halting=n_halting,
        ceiling=ceiling,
    )


def sample_ctm_reference(
    k: int, n_states: int, n_samples: int, max_steps: int, seed: int
) -> tuple[np.ndarray, int]:
    """Pure-Python twin of :func:`sample_output_frequencies` (test oracle)."""
    freq = np.zeros(1 << (k * k), dtype=np.int64)
    n_halting = 0
    remaining = n_samples
    batch_index = 0
    while remaining > 0:
        size = min(BATCH_SIZE, remaining)
        rng = SplitMix64(derive_seed(seed, batch_index))
        for _ in range(size):
            machine = draw_machine(rng, n_states)
            run = run_machine(machine, max_steps)
            if run.halted:
                n_halting += 1
                if run.grid.cells.shape == (k, k):
                    bits = Pattern.from_cells(run.grid.cells).bits
                    freq[canonical_form(bits, k)] += 1
        remaining -= size
        batch_index += 1
    return freq, n_halting


# --- block decomposition ------------------------------------------------------


def bdm(
    grid: BitGrid | Pattern, table: CtmTable, params: BdmParams | None = None
) -> float:
    """Complexity of a grid from table-sized tiled blocks.

    Both grid dimensions must be divisible by the block side; block
    classes share one ctm term plus log2 of their multiplicity.
    """
    if params is None:
        params = BdmParams(table.side)
    if table.side != params.block_side:
        raise ValueError(f"table side {table.side} != block side {params.block_side}")
    if isinstance(grid, Pattern):
        grid = BitGrid(grid.to_cells())
    b = params.block_side
    if grid.height % b or grid.width % b:
        raise ValueError(
            f"grid {grid.width}x{grid.height} not divisible into {b}x{b} blocks"
        )
    canon = canonical_map(b)
    multiplicity: dict[int, int] = {}
    for bits in extract_patch_bits(grid, b, "tiled"):
        key = int(canon[bits])
        multiplicity[key] = multiplicity.get(key, 0) + 1
    # summation in sorted class order so equal block multisets give
    # bit-identical values regardless of block arrangement
    return sum(table.entries[u] + math.log2(multiplicity[u]) for u in sorted(multiplicity))


# --- serialization -------------------------------------------------------------

_META_KEYS = ("side", "n_states", "n_samples", "max_steps", "seed", "n_halting")


def save_ctm_table(table: CtmTable) -> bytes:
    """CSV with '#' metadata lines; values at 12 significant digits."""
    width = pattern_hex_width(table.side)
    lines = [
        "# side={side} n_states={n_states} n_samples={n_samples} max_steps={max_steps}"
        " seed={seed} n_halting={n_halting} ceiling={ceiling:.12g}".format(
            side=table.side,
            n_states=table.n_states,
            n_samples=table.n_samples,
            max_steps=table.max_steps,
            seed=table.seed,
            n_halting=table.n_halting,
            ceiling=table.ceiling,
        ),
        "pattern_hex,ctm_bits",
    ]
    for bits in sorted(table.entries):
        lines.append(f"{bits:0{width}x},{table.entries[bits]:.12g}")
    return ("\n".join(lines) + "\n").encode()


def load_ctm_table(data: bytes | str) -> CtmTable:
    text = data.decode() if isinstance(data, bytes) else data
    meta: dict[str, str] = {}
    entries: dict[int, float] = {}
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for part in line[1:].split():
                if "=" in part:
                    key, _, value = part.partition("=")
                    meta[key] = value
            continue
        if not header_seen:
            if line != "pattern_hex,ctm_bits":
                raise CtmTableFormatError(
                    f"line {lineno}: expected 'pattern_hex,ctm_bits' header"
                )
            header_seen = True
            continue
        hex_part, _, value_part = line.partition(",")
        bits = int(hex_part, 16)
        value = float(value_part)
        if value < 0 or not math.isfinite(value):
            raise CtmTableFormatError(f"line {lineno}: ctm value must be finite >= 0")
        entries[bits] = value
    missing = [key for key in _META_KEYS + ("ceiling",) if key not in meta]
    if missing:
        raise CtmTableFormatError(f"missing metadata: {', '.join(missing)}")
    side = int(meta["side"])
    for bits in entries:
        if canonical_form(bits, side) != bits:
            raise CtmTableFormatError(f"non-canonical pattern key {bits:#x}")
    try:
        return CtmTable(
            side=side,
            entries=entries,
            n_states=int(meta["n_states"]),
            n_samples=int(meta["n_samples"]),
            max_steps=int(meta["max_steps"]),
            seed=int(meta["seed"]),
            n_halting=int(meta["n_halting"]),
            ceiling=float(meta["ceiling"]),
        )
    except ValueError as err:
        raise CtmTableFormatError(str(err)) from err

"""Image ingestion, median binarization, patch statistics, and the
natural-randomness score.

The pipeline atom is a k x k binary patch packed into an integer: bit
r*k + c holds cell (row r, col c), bit value 1 = white = above the
image median.  Frequencies of those patches over a binarized corpus
give the empirical probability a patch occurs "in nature"; the
natural-randomness score compares that against the chance probability
2**(-k*k) of the patch under independent fair cell flips.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

ExtractionMode = Literal["tiled", "sliding"]

# Vectorized packing uses uint64 bit weights, so k*k <= 64 there; larger
# windows fall back to Python ints (tests exercise k up to the grid side).
_VECTOR_MAX_SIDE = 8


class PgmParseError(ValueError):
    """Malformed PGM input; ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UnobservedPatternError(ValueError):
    """Unsmoothed score requested for a pattern with zero corpus count."""


def pattern_hex_width(side: int) -> int:
    return (side * side + 3) // 4


@dataclass(frozen=True)
class Pattern:
    """A side x side binary array packed into an integer.

    Bit r*side + c holds cell (row r, col c); bit value 1 = white.
    """

    side: int
    bits: int

    def __post_init__(self):
        if self.side < 1:
            raise ValueError(f"side must be >= 1, got {self.side}")
        if not 0 <= self.bits < (1 << (self.side * self.side)):
            raise ValueError(f"bits {self.bits:#x} out of range for side {self.side}")

    def to_cells(self) -> np.ndarray:
        """Unpack to a (side, side) array of {0, 1}."""
        k = self.side
        flat = np.array([(self.bits >> i) & 1 for i in range(k * k)], dtype=np.uint8)
        return flat.reshape(k, k)

    @classmethod
    def from_cells(cls, cells: np.ndarray | Sequence[Sequence[int]]) -> "Pattern":
        arr = np.asarray(cells, dtype=np.uint8)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"cells must be square, got shape {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("cells must be 0/1")
        k = arr.shape[0]
        bits = 0
        for i, v in enumerate(arr.ravel()):
            bits |= int(v) << i
        return cls(k, bits)

    def hex(self) -> str:
        return format(self.bits, f"0{pattern_hex_width(self.side)}x")

    @classmethod
    def from_hex(cls, text: str, side: int) -> "Pattern":
        return cls(side, int(text, 16))


@dataclass(eq=False)
class GrayImage:
    """Grayscale image; ``pixels`` is (height, width) uint8, row-major."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"pixels must be a non-empty 2-D array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if not (np.issubdtype(arr.dtype, np.integer) and arr.min() >= 0 and arr.max() <= 255):
                raise ValueError("intensities must be integers in [0, 255]")
            arr = arr.astype(np.uint8)
        self.pixels = arr

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def intensities(self) -> np.ndarray:
        """Row-major flat view, length width * height."""
        return self.pixels.ravel()

    @classmethod
    def from_values(cls, width: int, height: int, values: Sequence[int]) -> "GrayImage":
        arr = np.asarray(values)
        if arr.size != width * height:
            raise ValueError(f"expected {width * height} intensities, got {arr.size}")
        return cls(arr.reshape(height, width))


@dataclass(eq=False)
class BitGrid:
    """Binary grid; ``cells`` is (height, width) uint8 with 1 = white."""

    cells: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.cells)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"cells must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("cells must be 0/1")
        self.cells = arr.astype(np.uint8)

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @classmethod
    def from_values(cls, width: int, height: int, values: Sequence[int]) -> "BitGrid":
        arr = np.asarray(values)
        if arr.size != width * height:
            raise ValueError(f"expected {width * height} cells, got {arr.size}")
        return cls(arr.reshape(height, width))


@dataclass
class FrequencyTable:
    """Patch occurrence counts over a scanned corpus.

    Only observed patterns are stored (count >= 1); ``total`` is the sum
    of counts and equals the number of windows contributing.
    """

    side: int
    mode: ExtractionMode
    counts: dict[int, int] = field(default_factory=dict)
    n_images: int = 0

    def __post_init__(self):
        space = 1 << (self.side * self.side)
        for bits, count in self.counts.items():
            if not 0 <= bits < space:
                raise ValueError(f"pattern {bits:#x} out of range for side {self.side}")
            if count < 1:
                raise ValueError(f"count for {bits:#x} must be >= 1, got {count}")

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def count(self, pattern: Pattern | int) -> int:
        bits = pattern.bits if isinstance(pattern, Pattern) else pattern
        return self.counts.get(bits, 0)


# --- PGM ---------------------------------------------------------------

_WS = b" \t\r\n\v\f"


class _PgmCursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def skip_space(self) -> None:
        data, n = self.data, len(self.data)
        while self.pos < n:
            b = data[self.pos : self.pos + 1]
            if b == b"#":
                nl = data.find(b"\n", self.pos)
                self.pos = n if nl < 0 else nl + 1
            elif b in _WS_SET:
                self.pos += 1
            else:
                return

    def token(self, what: str) -> tuple[bytes, int]:
        self.skip_space()
        if self.pos >= len(self.data):
            raise PgmParseError(f"unexpected end of file while reading {what}", self.pos)
        start = self.pos
        while self.pos < len(self.data) and self.data[self.pos : self.pos + 1] not in _WS_SET:
            if self.data[self.pos : self.pos + 1] == b"#":
                break
            self.pos += 1
        return self.data[start : self.pos], start

    def int_token(self, what: str) -> tuple[int, int]:
        tok, start = self.token(what)
        if not re.fullmatch(rb"[0-9]+", tok):
            raise PgmParseError(f"expected integer for {what}, got {tok!r}", start)
        return int(tok), start


_WS_SET = {bytes([c]) for c in _WS}


def _rescale(values: np.ndarray, maxval: int) -> np.ndarray:
    if maxval == 255:
        return values.astype(np.uint8)
    # exact integer round-half-up of v * 255 / maxval
    scaled = (values.astype(np.uint32) * 510 + maxval) // (2 * maxval)
    return scaled.astype(np.uint8)


def load_pgm(data: bytes) -> GrayImage:
    """Decode a P2 (ASCII) or P5 (binary) portable graymap.

    maxval must be <= 255; a smaller maxval rescales intensities to
    [0, 255] by round-half-up of v * 255 / maxval.  '#' comments are
    allowed anywhere whitespace is allowed in the header (and between
    P2 samples).  Faults raise :class:`PgmParseError` with the byte
    offset of the problem.
    """
    cur = _PgmCursor(data)
    magic, magic_off = cur.token("magic number")
    if magic not in (b"P2", b"P5"):
        raise PgmParseError(f"unsupported magic {magic!r}, want P2 or P5", magic_off)
    width, w_off = cur.int_token("width")
    height, h_off = cur.int_token("height")
    if width < 1:
        raise PgmParseError(f"width must be >= 1, got {width}", w_off)
    if height < 1:
        raise PgmParseError(f"height must be >= 1, got {height}", h_off)
    maxval, mv_off = cur.int_token("maxval")
    if not 1 <= maxval <= 255:
        raise PgmParseError(f"maxval must be in [1, 255], got {maxval}", mv_off)

    n = width * height
    if magic == b"P5":
        if cur.pos >= len(data) or data[cur.pos : cur.pos + 1] not in _WS_SET:
            raise PgmParseError("expected single whitespace byte after maxval", cur.pos)
        start = cur.pos + 1
        raster = data[start : start + n]
        if len(raster) < n:
            raise PgmParseError(
                f"truncated raster: expected {n} bytes, got {len(raster)}", len(data)
            )
        values = np.frombuffer(raster, dtype=np.uint8, count=n)
        if maxval < 255:
            high = np.flatnonzero(values > maxval)
            if high.size:
                off = start + int(high[0])
                raise PgmParseError(
                    f"sample {int(values[high[0]])} exceeds maxval {maxval}", off
                )
    else:
        out = np.empty(n, dtype=np.uint16)
        for i in range(n):
            v, off = cur.int_token(f"sample {i}")
            if v > maxval:
                raise PgmParseError(f"sample {v} exceeds maxval {maxval}", off)
            out[i] = v
        values = out
    return GrayImage(_rescale(values, maxval).reshape(height, width))


def save_pgm(img: GrayImage, binary: bool = True) -> bytes:
    """Encode as P5 (binary) or P2 (ASCII) with maxval 255."""
    header = f"{'P5' if binary else 'P2'}\n{img.width} {img.height}\n255\n".encode()
    if binary:
        return header + img.pixels.tobytes()
    body = "\n".join(" ".join(str(v) for v in row) for row in img.pixels) + "\n"
    return header + body.encode()


# --- binarization and patch extraction ----------------------------------


def binarize_median(img: GrayImage) -> BitGrid:
    """Threshold at the image's own lower median; cell = 1 iff intensity > t.

    The lower median (element (n-1)//2 of the sorted multiset) plus the
    strict comparison make ties deterministic: a constant image maps to
    all zeros.
    """
    flat = np.sort(img.intensities)
    threshold = flat[(flat.size - 1) // 2]
    return BitGrid((img.pixels > threshold).astype(np.uint8))


def _pack_windows(windows: np.ndarray, k: int) -> np.ndarray:
    # windows: (n, k*k) uint8 rows in row-major cell order
    weights = (np.uint64(1) << np.arange(k * k, dtype=np.uint64))
    return windows.astype(np.uint64) @ weights


def extract_patch_bits(grid: BitGrid, k: int, mode: ExtractionMode = "tiled") -> list[int]:
    """Packed bit values of every k x k window, in row-major window order.

    tiled: non-overlapping windows at offsets that are multiples of k,
    partial edges discarded.  sliding: stride-1 windows.  Grids smaller
    than k x k yield an empty list.
    """
    if k < 1:
        raise ValueError(f"window side must be >= 1, got {k}")
    if mode not in ("tiled", "sliding"):
        raise ValueError(f"unknown extraction mode: {mode!r}")
    h, w = grid.cells.shape
    if k > h or k > w:
        return []
    if k <= _VECTOR_MAX_SIDE:
        if mode == "tiled":
            nh, nw = h // k, w // k
            blocks = (
                grid.cells[: nh * k, : nw * k]
                .reshape(nh, k, nw, k)
                .transpose(0, 2, 1, 3)
                .reshape(-1, k * k)
            )
        else:
            view = np.lib.stride_tricks.sliding_window_view(grid.cells, (k, k))
            blocks = view.reshape(-1, k * k)
        return [int(b) for b in _pack_windows(blocks, k)]
    # wide windows: Python ints carry arbitrary bit width
    offsets = range(0, (h // k) * k, k) if mode == "tiled" else range(h - k + 1)
    offsets_c = range(0, (w // k) * k, k) if mode == "tiled" else range(w - k + 1)
    out = []
    for r in offsets:
        for c in offsets_c:
            bits = 0
            window = grid.cells[r : r + k, c : c + k].ravel()
            for i, v in enumerate(window):
                bits |= int(v) << i
            out.append(bits)
    return out


def extract_patches(grid: BitGrid, k: int, mode: ExtractionMode = "tiled") -> list[Pattern]:
    """Every k x k window of the grid as a :class:`Pattern` sequence."""
    return [Pattern(k, bits) for bits in extract_patch_bits(grid, k, mode)]


# --- corpus statistics ---------------------------------------------------


def scan_image(img: GrayImage, k: int, mode: ExtractionMode = "tiled") -> FrequencyTable:
    """Single-image table: binarize, extract, count."""
    counts = Counter(extract_patch_bits(binarize_median(img), k, mode))
    return FrequencyTable(side=k, mode=mode, counts=dict(counts), n_images=1)


def merge_tables(tables: Iterable[FrequencyTable]) -> FrequencyTable:
    """Commutative, associative merge of same-shape tables."""
    tables = list(tables)
    if not tables:
        raise ValueError("nothing to merge")
    side, mode = tables[0].side, tables[0].mode
    counts: Counter = Counter()
    n_images = 0
    for t in tables:
        if (t.side, t.mode) != (side, mode):
            raise ValueError(
                f"cannot merge table (side={t.side}, mode={t.mode}) "
                f"into (side={side}, mode={mode})"
            )
        counts.update(t.counts)
        n_images += t.n_images
    return FrequencyTable(side=side, mode=mode, counts=dict(counts), n_images=n_images)


def scan_corpus(
    images: Iterable[GrayImage], k: int, mode: ExtractionMode = "tiled"
) -> FrequencyTable:
    """Binarize each image independently and accumulate patch counts.

    Counts are order-insensitive, so any parallel per-image split that
    merges with :func:`merge_tables` gives the same table.
    """
    per_image = [scan_image(img, k, mode) for img in images]
    if not per_image:
        return FrequencyTable(side=k, mode=mode, counts={}, n_images=0)
    return merge_tables(per_image)


# --- scores --------------------------------------------------------------


def chance_probability(k: int) -> float:
    """Probability 2**(-k*k) of a given patch under fair random cells."""
    if k < 1:
        raise ValueError(f"side must be >= 1, got {k}")
    return math.ldexp(1.0, -(k * k))


def natural_randomness(x: Pattern, table: FrequencyTable, alpha: float = 1.0) -> float:
    """log2 of chance probability over smoothed corpus probability, in bits.

    P(x|n) = (count + alpha) / (total + alpha * 2**(k*k)) with Laplace
    smoothing over the full pattern space.  Patterns more frequent than
    chance score negative, rarer than chance positive.  alpha = 0 keeps
    the raw relative frequency and rejects unobserved patterns.
    """
    if table.side != x.side:
        raise ValueError(f"pattern side {x.side} != table side {table.side}")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    count = table.count(x)
    if count == 0 and alpha == 0:
        raise UnobservedPatternError(
            f"pattern {x.hex()} unobserved and alpha=0; smooth or exclude it"
        )
    # log2(P(x|r) / P(x|n)) as a single ratio, so a table that matches
    # chance (e.g. uniform counts, alpha = 0) scores exactly 0
    space = 2.0 ** (x.side * x.side)
    return math.log2((table.total + alpha * space) / ((count + alpha) * space))


# --- serialization -------------------------------------------------------


def frequency_table_to_csv(table: FrequencyTable) -> str:
    """CSV with '#' metadata header, rows sorted ascending by pattern."""
    width = pattern_hex_width(table.side)
    lines = [
        f"# side={table.side} mode={table.mode} total={table.total} n_images={table.n_images}",
        "pattern_hex,count",
    ]
    for bits in sorted(table.counts):
        lines.append(f"{bits:0{width}x},{table.counts[bits]}")
    return "\n".join(lines) + "\n"


def frequency_table_from_csv(text: str) -> FrequencyTable:
    meta: dict[str, str] = {}
    counts: dict[int, int] = {}
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
            if line != "pattern_hex,count":
                raise ValueError(f"line {lineno}: expected 'pattern_hex,count' header")
            header_seen = True
            continue
        hex_part, _, count_part = line.partition(",")
        counts[int(hex_part, 16)] = int(count_part)
    for key in ("side", "mode", "total", "n_images"):
        if key not in meta:
            raise ValueError(f"missing '{key}' in table metadata")
    table = FrequencyTable(
        side=int(meta["side"]),
        mode=meta["mode"],  # type: ignore[arg-type]
        counts=counts,
        n_images=int(meta["n_images"]),
    )
    if table.total != int(meta["total"]):
        raise ValueError(
            f"total mismatch: header says {meta['total']}, rows sum to {table.total}"
        )
    return table

"""5x7 bitmap glyph font used by the synthetic generator and stub recognizer.

Each glyph is five column bytes, bit 0 = top row (the classic LCD/GLCD
layout). The alphabet is digits, ASCII letters and space. Glyph cells are
5 columns wide, 7 rows tall, with a 1-column advance gap between glyphs.
"""

from __future__ import annotations

import numpy as np

GLYPH_W = 5
GLYPH_H = 7
ADVANCE = GLYPH_W + 1  # columns consumed per glyph, including the gap

_COLUMNS: dict[str, tuple[int, int, int, int, int]] = {
    " ": (0x00, 0x00, 0x00, 0x00, 0x00),
    "0": (0x3E, 0x51, 0x49, 0x45, 0x3E),
    "1": (0x00, 0x42, 0x7F, 0x40, 0x00),
    "2": (0x42, 0x61, 0x51, 0x49, 0x46),
    "3": (0x21, 0x41, 0x45, 0x4B, 0x31),
    "4": (0x18, 0x14, 0x12, 0x7F, 0x10),
    "5": (0x27, 0x45, 0x45, 0x45, 0x39),
    "6": (0x3C, 0x4A, 0x49, 0x49, 0x30),
    "7": (0x01, 0x71, 0x09, 0x05, 0x03),
    "8": (0x36, 0x49, 0x49, 0x49, 0x36),
    "9": (0x06, 0x49, 0x49, 0x29, 0x1E),
    "A": (0x7E, 0x11, 0x11, 0x11, 0x7E),
    "B": (0x7F, 0x49, 0x49, 0x49, 0x36),
    "C": (0x3E, 0x41, 0x41, 0x41, 0x22),
    "D": (0x7F, 0x41, 0x41, 0x22, 0x1C),
    "E": (0x7F, 0x49, 0x49, 0x49, 0x41),
    "F": (0x7F, 0x09, 0x09, 0x09, 0x01),
    "G": (0x3E, 0x41, 0x49, 0x49, 0x7A),
    "H": (0x7F, 0x08, 0x08, 0x08, 0x7F),
    "I": (0x00, 0x41, 0x7F, 0x41, 0x00),
    "J": (0x20, 0x40, 0x41, 0x3F, 0x01),
    "K": (0x7F, 0x08, 0x14, 0x22, 0x41),
    "L": (0x7F, 0x40, 0x40, 0x40, 0x40),
    "M": (0x7F, 0x02, 0x0C, 0x02, 0x7F),
    "N": (0x7F, 0x04, 0x08, 0x10, 0x7F),
    "O": (0x3E, 0x41, 0x41, 0x41, 0x3E),
    "P": (0x7F, 0x09, 0x09, 0x09, 0x06),
    "Q": (0x3E, 0x41, 0x51, 0x21, 0x5E),
    "R": (0x7F, 0x09, 0x19, 0x29, 0x46),
    "S": (0x46, 0x49, 0x49, 0x49, 0x31),
    "T": (0x01, 0x01, 0x7F, 0x01, 0x01),
    "U": (0x3F, 0x40, 0x40, 0x40, 0x3F),
    "V": (0x1F, 0x20, 0x40, 0x20, 0x1F),
    "W": (0x3F, 0x40, 0x38, 0x40, 0x3F),
    "X": (0x63, 0x14, 0x08, 0x14, 0x63),
    "Y": (0x07, 0x08, 0x70, 0x08, 0x07),
    "Z": (0x61, 0x51, 0x49, 0x45, 0x43),
    "a": (0x20, 0x54, 0x54, 0x54, 0x78),
    "b": (0x7F, 0x48, 0x44, 0x44, 0x38),
    "c": (0x38, 0x44, 0x44, 0x44, 0x20),
    "d": (0x38, 0x44, 0x44, 0x48, 0x7F),
    "e": (0x38, 0x54, 0x54, 0x54, 0x18),
    "f": (0x08, 0x7E, 0x09, 0x01, 0x02),
    "g": (0x0C, 0x52, 0x52, 0x52, 0x3E),
    "h": (0x7F, 0x08, 0x04, 0x04, 0x78),
    "i": (0x00, 0x44, 0x7D, 0x40, 0x00),
    "j": (0x20, 0x40, 0x44, 0x3D, 0x00),
    "k": (0x7F, 0x10, 0x28, 0x44, 0x00),
    "l": (0x00, 0x41, 0x7F, 0x40, 0x00),
    "m": (0x7C, 0x04, 0x18, 0x04, 0x78),
    "n": (0x7C, 0x08, 0x04, 0x04, 0x78),
    "o": (0x38, 0x44, 0x44, 0x44, 0x38),
    "p": (0x7C, 0x14, 0x14, 0x14, 0x08),
    "q": (0x08, 0x14, 0x14, 0x18, 0x7C),
    "r": (0x7C, 0x08, 0x04, 0x04, 0x08),
    "s": (0x48, 0x54, 0x54, 0x54, 0x20),
    "t": (0x04, 0x3F, 0x44, 0x40, 0x20),
    "u": (0x3C, 0x40, 0x40, 0x20, 0x7C),
    "v": (0x1C, 0x20, 0x40, 0x20, 0x1C),
    "w": (0x3C, 0x40, 0x30, 0x40, 0x3C),
    "x": (0x44, 0x28, 0x10, 0x28, 0x44),
    "y": (0x0C, 0x50, 0x50, 0x50, 0x3C),
    "z": (0x44, 0x64, 0x54, 0x4C, 0x44),
}

ALPHABET = "".join(sorted(_COLUMNS))


def glyph_bitmap(ch: str) -> np.ndarray:
    """The 7x5 bool bitmap of one glyph (rows x columns)."""
    try:
        cols = _COLUMNS[ch]
    except KeyError:
        raise KeyError(f"character {ch!r} is not in the stub font alphabet") from None
    bits = np.zeros((GLYPH_H, GLYPH_W), dtype=bool)
    for c, byte in enumerate(cols):
        for r in range(GLYPH_H):
            bits[r, c] = bool(byte >> r & 1)
    return bits


def glyph_ink_box(ch: str) -> tuple[int, int, int, int] | None:
    """Tight (col0, row0, width, height) of a glyph's ink, None for blanks."""
    bits = glyph_bitmap(ch)
    if not bits.any():
        return None
    rows = np.nonzero(bits.any(axis=1))[0]
    cols = np.nonzero(bits.any(axis=0))[0]
    return int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1)


def text_size(text: str, scale: int) -> tuple[int, int]:
    """(width, height) in pixels of rendered text, without the trailing gap."""
    if not text:
        return 0, GLYPH_H * scale
    return (len(text) * ADVANCE - 1) * scale, GLYPH_H * scale


def draw_text(canvas: np.ndarray, x: int, y: int, text: str, scale: int = 2,
              ink: int = 0, jitter_y: int = 0,
              rng: np.random.Generator | None = None) -> None:
    """Render text onto a uint8 canvas, top-left corner at (x, y).

    ``jitter_y`` shifts each glyph independently by up to that many pixels
    vertically (handwriting-style wobble); requires ``rng`` when nonzero.
    Horizontal spacing is never jittered so glyph gaps stay separable.
    Pixels are only darkened, never brightened. Glyphs falling outside the
    canvas are clipped.
    """
    if scale < 1:
        raise ValueError(f"scale must be >= 1, got {scale}")
    if jitter_y and rng is None:
        raise ValueError("jitter_y requires an rng")
    for i, ch in enumerate(text):
        bits = glyph_bitmap(ch)
        if not bits.any():
            continue
        gx = x + i * ADVANCE * scale
        gy = y
        if jitter_y:
            gy += int(rng.integers(-jitter_y, jitter_y + 1))
        block = np.kron(bits, np.ones((scale, scale), dtype=bool))
        h, w = block.shape
        y0, x0 = max(gy, 0), max(gx, 0)
        y1, x1 = min(gy + h, canvas.shape[0]), min(gx + w, canvas.shape[1])
        if y1 <= y0 or x1 <= x0:
            continue
        part = block[y0 - gy:y1 - gy, x0 - gx:x1 - gx]
        region = canvas[y0:y1, x0:x1]
        region[part] = np.minimum(region[part], ink)

"""Bitmap font table and printed-text rendering.

The packaged font lives at ``data/font8x16.bin``. Binary layout
(little-endian):

    bytes 0-3   magic ``GFNT``
    byte  4     format version (1)
    byte  5     cell width in pixels (8)
    byte  6     cell height in pixels (16)
    byte  7     reserved (0)
    bytes 8-9   glyph count, u16
    per glyph, sorted by codepoint:
        u32       codepoint (ASCII plus U+00E4 ae-umlaut, U+00F6 oe-umlaut,
                  U+00FC ue-umlaut, U+00DF eszett)
        16 bytes  row bitmasks top to bottom, bit 7 = leftmost pixel

Model-space images are float32 ``(H, W)`` arrays in [-1, 1] with ink at -1
and background at +1.  Rendering is pure table lookup, so it is bit-identical
across runs and platforms.
"""

import struct
from importlib import resources

import numpy as np

INK = np.float32(-1.0)
BACKGROUND = np.float32(1.0)


class BitmapFont:
    """Fixed-cell glyph bitmaps keyed by character."""

    def __init__(self, cell_w, cell_h, glyphs):
        self.cell_w = cell_w
        self.cell_h = cell_h
        self.glyphs = glyphs

    @classmethod
    def from_blob(cls, data):
        if data[:4] != b"GFNT":
            raise ValueError("not a font table: bad magic")
        version, cell_w, cell_h, _ = struct.unpack_from("<BBBB", data, 4)
        if version != 1:
            raise ValueError(f"unsupported font table version {version}")
        (count,) = struct.unpack_from("<H", data, 8)
        glyphs = {}
        off = 10
        for _ in range(count):
            (cp,) = struct.unpack_from("<I", data, off)
            off += 4
            rows = data[off:off + cell_h]
            off += cell_h
            bits = np.unpackbits(np.frombuffer(rows, dtype=np.uint8).reshape(-1, 1), axis=1)
            glyphs[chr(cp)] = bits[:, :cell_w].astype(bool)
        return cls(cell_w, cell_h, glyphs)

    @classmethod
    def load(cls, path=None):
        if path is None:
            data = resources.files("glyphdiff").joinpath("data/font8x16.bin").read_bytes()
        else:
            with open(path, "rb") as f:
                data = f.read()
        return cls.from_blob(data)

    def __contains__(self, ch):
        return ch in self.glyphs

    def bitmap(self, ch):
        return self.glyphs[ch]

    def chars(self):
        return sorted(self.glyphs, key=ord)


_default_font = None


def default_font():
    global _default_font
    if _default_font is None:
        _default_font = BitmapFont.load()
    return _default_font


def max_chars(canvas, font=None):
    font = font or default_font()
    return canvas[0] // font.cell_w


def render_printed(text, canvas, font=None):
    """Render text in the monospace cell grid onto a (W, H) canvas.

    Glyph cells start at x=0; the glyph box is centred vertically.  Output is
    a model-space image whose pixels take exactly the two values {-1, +1}.
    """
    font = font or default_font()
    w, h = canvas
    if h < font.cell_h:
        raise ValueError(f"canvas height {h} below glyph height {font.cell_h}")
    capacity = w // font.cell_w
    if len(text) > capacity:
        raise ValueError(
            f"text {text!r} does not fit: {len(text)} chars, canvas holds {capacity}"
        )
    img = np.full((h, w), BACKGROUND, dtype=np.float32)
    y0 = (h - font.cell_h) // 2
    for k, ch in enumerate(text):
        if ch not in font:
            raise ValueError(f"character {ch!r} (index {k}) not in font")
        cell = img[y0:y0 + font.cell_h, k * font.cell_w:(k + 1) * font.cell_w]
        cell[font.bitmap(ch)] = INK
    return img

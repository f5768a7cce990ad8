"""Builder for the packaged 8x16 bitmap font.

Glyphs are original pixel art (no external font data), drawn on a 6-wide
design grid and placed one column in from the left of the 8-pixel cell.
Vertical metrics: caps and digits occupy rows 2-11, lowercase x-height
rows 6-11, descenders reach row 14, umlaut dots sit on rows 3-4.

Running ``python -m glyphdiff.fontgen`` regenerates ``data/font8x16.bin``;
the packed layout is documented in :mod:`glyphdiff.font`.
"""

import struct
import sys

CELL_W = 8
CELL_H = 16
GLYPH_X_OFFSET = 1  # design column 0 lands on cell column 1

CAP_TOP = 2
X_TOP = 6
DOT_TOP = 3

_DOTS = (DOT_TOP, [
    " #  # ",
    " #  # ",
])

# (top_row, rows) per character; rows use '#' for ink, ' ' for background
GLYPH_ART = {
    " ": (0, []),
    "0": (CAP_TOP, [
        " #### ",
        "#    #",
        "#    #",
        "#   ##",
        "#  # #",
        "# #  #",
        "##   #",
        "#    #",
        "#    #",
        " #### ",
    ]),
    "1": (CAP_TOP, [
        "  #   ",
        " ##   ",
        "# #   ",
        "  #   ",
        "  #   ",
        "  #   ",
        "  #   ",
        "  #   ",
        "  #   ",
        "##### ",
    ]),
    "2": (CAP_TOP, [
        " #### ",
        "#    #",
        "     #",
        "     #",
        "    # ",
        "   #  ",
        "  #   ",
        " #    ",
        "#     ",
        "######",
    ]),
    "3": (CAP_TOP, [
        " #### ",
        "#    #",
        "     #",
        "     #",
        "  ### ",
        "     #",
        "     #",
        "     #",
        "#    #",
        " #### ",
    ]),
    "4": (CAP_TOP, [
        "    # ",
        "   ## ",
        "  # # ",
        " #  # ",
        "#   # ",
        "######",
        "    # ",
        "    # ",
        "    # ",
        "    # ",
    ]),
    "5": (CAP_TOP, [
        "######",
        "#     ",
        "#     ",
        "#     ",
        "##### ",
        "     #",
        "     #",
        "     #",
        "#    #",
        " #### ",
    ]),
    "6": (CAP_TOP, [
        " #### ",
        "#    #",
        "#     ",
        "#     ",
        "##### ",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        " #### ",
    ]),
    "7": (CAP_TOP, [
        "######",
        "     #",
        "     #",
        "    # ",
        "    # ",
        "   #  ",
        "   #  ",
        "  #   ",
        "  #   ",
        "  #   ",
    ]),
    "8": (CAP_TOP, [
        " #### ",
        "#    #",
        "#    #",
        "#    #",
        " #### ",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        " #### ",
    ]),
    "9": (CAP_TOP, [
        " #### ",
        "#    #",
        "#    #",
        "#    #",
        " #####",
        "     #",
        "     #",
        "     #",
        "#    #",
        " #### ",
    ]),
    "A": (CAP_TOP, [
        "  ##  ",
        " #  # ",
        " #  # ",
        "#    #",
        "#    #",
        "######",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
    ]),
    "B": (CAP_TOP, [
        "##### ",
        "#    #",
        "#    #",
        "#    #",
        "##### ",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "##### ",
    ]),
    "C": (CAP_TOP, [
        " #### ",
        "#    #",
        "#     ",
        "#     ",
        "#     ",
        "#     ",
        "#     ",
        "#     ",
        "#    #",
        " #### ",
    ]),
    "D": (CAP_TOP, [
        "####  ",
        "#   # ",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#   # ",
        "####  ",
    ]),
    "E": (CAP_TOP, [
        "######",
        "#     ",
        "#     ",
        "#     ",
        "##### ",
        "#     ",
        "#     ",
        "#     ",
        "#     ",
        "######",
    ]),
    "F": (CAP_TOP, [
        "######",
        "#     ",
        "#     ",
        "#     ",
        "##### ",
        "#     ",
        "#     ",
        "#     ",
        "#     ",
        "#     ",
    ]),
    "G": (CAP_TOP, [
        " #### ",
        "#    #",
        "#     ",
        "#     ",
        "#     ",
        "#  ###",
        "#    #",
        "#    #",
        "#    #",
        " #### ",
    ]),
    "H": (CAP_TOP, [
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "######",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
    ]),
    "I": (CAP_TOP, [
        " ###  ",
        "  #   ",
        "  #   ",
        "  #   ",
        "  #   ",
        "  #   ",
        "  #   ",
        "  #   ",
        "  #   ",
        " ###  ",
    ]),
    "J": (CAP_TOP, [
        "  ####",
        "    # ",
        "    # ",
        "    # ",
        "    # ",
        "    # ",
        "    # ",
        "#   # ",
        "#   # ",
        " ###  ",
    ]),
    "K": (CAP_TOP, [
        "#    #",
        "#   # ",
        "#  #  ",
        "# #   ",
        "##    ",
        "##    ",
        "# #   ",
        "#  #  ",
        "#   # ",
        "#    #",
    ]),
    "L": (CAP_TOP, [
        "#     ",
        "#     ",
        "#     ",
        "#     ",
        "#     ",
        "#     ",
        "#     ",
        "#     ",
        "#     ",
        "######",
    ]),
    "M": (CAP_TOP, [
        "#    #",
        "##  ##",
        "# ## #",
        "# ## #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
    ]),
    "N": (CAP_TOP, [
        "#    #",
        "##   #",
        "##   #",
        "# #  #",
        "# #  #",
        "#  # #",
        "#  # #",
        "#   ##",
        "#   ##",
        "#    #",
    ]),
    "O": (CAP_TOP, [
        " #### ",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        " #### ",
    ]),
    "P": (CAP_TOP, [
        "##### ",
        "#    #",
        "#    #",
        "#    #",
        "##### ",
        "#     ",
        "#     ",
        "#     ",
        "#     ",
        "#     ",
    ]),
    "Q": (CAP_TOP, [
        " #### ",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "# #  #",
        "#  # #",
        " #### ",
    ]),
    "R": (CAP_TOP, [
        "##### ",
        "#    #",
        "#    #",
        "#    #",
        "##### ",
        "# #   ",
        "#  #  ",
        "#   # ",
        "#   # ",
        "#    #",
    ]),
    "S": (CAP_TOP, [
        " #### ",
        "#    #",
        "#     ",
        "#     ",
        " #### ",
        "     #",
        "     #",
        "     #",
        "#    #",
        " #### ",
    ]),
    "T": (CAP_TOP, [
        "######",
        "  ##  ",
        "  ##  ",
        "  ##  ",
        "  ##  ",
        "  ##  ",
        "  ##  ",
        "  ##  ",
        "  ##  ",
        "  ##  ",
    ]),
    "U": (CAP_TOP, [
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        " #### ",
    ]),
    "V": (CAP_TOP, [
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        " #  # ",
        " #  # ",
        " #  # ",
        " #  # ",
        "  ##  ",
        "  ##  ",
    ]),
    "W": (CAP_TOP, [
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "# ## #",
        "# ## #",
        "# ## #",
        "##  ##",
        "#    #",
    ]),
    "X": (CAP_TOP, [
        "#    #",
        "#    #",
        " #  # ",
        " #  # ",
        "  ##  ",
        "  ##  ",
        " #  # ",
        " #  # ",
        "#    #",
        "#    #",
    ]),
    "Y": (CAP_TOP, [
        "#    #",
        "#    #",
        " #  # ",
        " #  # ",
        "  ##  ",
        "  ##  ",
        "  ##  ",
        "  ##  ",
        "  ##  ",
        "  ##  ",
    ]),
    "Z": (CAP_TOP, [
        "######",
        "     #",
        "     #",
        "    # ",
        "   #  ",
        "  #   ",
        " #    ",
        "#     ",
        "#     ",
        "######",
    ]),
    "a": (X_TOP, [
        " #### ",
        "     #",
        " #####",
        "#    #",
        "#   ##",
        " ### #",
    ]),
    "b": (CAP_TOP, [
        "#     ",
        "#     ",
        "#     ",
        "#     ",
        "# ### ",
        "##   #",
        "#    #",
        "#    #",
        "##   #",
        "# ### ",
    ]),
    "c": (X_TOP, [
        " #### ",
        "#    #",
        "#     ",
        "#     ",
        "#    #",
        " #### ",
    ]),
    "d": (CAP_TOP, [
        "     #",
        "     #",
        "     #",
        "     #",
        " ### #",
        "#   ##",
        "#    #",
        "#    #",
        "#   ##",
        " ### #",
    ]),
    "e": (X_TOP, [
        " #### ",
        "#    #",
        "######",
        "#     ",
        "#    #",
        " #### ",
    ]),
    "f": (CAP_TOP, [
        "  ### ",
        " #    ",
        " #    ",
        " #    ",
        "####  ",
        " #    ",
        " #    ",
        " #    ",
        " #    ",
        " #    ",
    ]),
    "g": (X_TOP, [
        " ### #",
        "#   ##",
        "#    #",
        "#   ##",
        " ### #",
        "     #",
        "     #",
        "#    #",
        " #### ",
    ]),
    "h": (CAP_TOP, [
        "#     ",
        "#     ",
        "#     ",
        "#     ",
        "# ### ",
        "##   #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
    ]),
    "i": (DOT_TOP, [
        "  #   ",
        "  #   ",
        "      ",
        " ##   ",
        "  #   ",
        "  #   ",
        "  #   ",
        "  #   ",
        " ###  ",
    ]),
    "j": (DOT_TOP, [
        "   #  ",
        "   #  ",
        "      ",
        "   #  ",
        "   #  ",
        "   #  ",
        "   #  ",
        "   #  ",
        "   #  ",
        "   #  ",
        "#  #  ",
        " ##   ",
    ]),
    "k": (CAP_TOP, [
        "#     ",
        "#     ",
        "#     ",
        "#     ",
        "#   # ",
        "#  #  ",
        "# #   ",
        "###   ",
        "#  #  ",
        "#   # ",
    ]),
    "l": (CAP_TOP, [
        " ##   ",
        "  #   ",
        "  #   ",
        "  #   ",
        "  #   ",
        "  #   ",
        "  #   ",
        "  #   ",
        "  #   ",
        " ###  ",
    ]),
    "m": (X_TOP, [
        "## ## ",
        "# # # ",
        "# # # ",
        "# # # ",
        "# # # ",
        "# # # ",
    ]),
    "n": (X_TOP, [
        "# ### ",
        "##   #",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
    ]),
    "o": (X_TOP, [
        " #### ",
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        " #### ",
    ]),
    "p": (X_TOP, [
        "# ### ",
        "##   #",
        "#    #",
        "##   #",
        "# ### ",
        "#     ",
        "#     ",
        "#     ",
        "#     ",
    ]),
    "q": (X_TOP, [
        " ### #",
        "#   ##",
        "#    #",
        "#   ##",
        " ### #",
        "     #",
        "     #",
        "     #",
        "     #",
    ]),
    "r": (X_TOP, [
        "# ### ",
        "##   #",
        "#     ",
        "#     ",
        "#     ",
        "#     ",
    ]),
    "s": (X_TOP, [
        " #### ",
        "#     ",
        " #### ",
        "     #",
        "#    #",
        " #### ",
    ]),
    "t": (DOT_TOP, [
        "  #   ",
        "  #   ",
        "  #   ",
        " #### ",
        "  #   ",
        "  #   ",
        "  #   ",
        "  #   ",
        "   ## ",
    ]),
    "u": (X_TOP, [
        "#    #",
        "#    #",
        "#    #",
        "#    #",
        "#   ##",
        " ### #",
    ]),
    "v": (X_TOP, [
        "#    #",
        "#    #",
        " #  # ",
        " #  # ",
        "  ##  ",
        "  ##  ",
    ]),
    "w": (X_TOP, [
        "#    #",
        "#    #",
        "# ## #",
        "# ## #",
        "# ## #",
        " #  # ",
    ]),
    "x": (X_TOP, [
        "#    #",
        " #  # ",
        "  ##  ",
        "  ##  ",
        " #  # ",
        "#    #",
    ]),
    "y": (X_TOP, [
        "#    #",
        "#    #",
        "#    #",
        "#   ##",
        " ### #",
        "     #",
        "     #",
        "#   # ",
        " ###  ",
    ]),
    "z": (X_TOP, [
        "######",
        "    # ",
        "   #  ",
        "  #   ",
        " #    ",
        "######",
    ]),
    "ß": (CAP_TOP, [  # eszett
        " ###  ",
        "#   # ",
        "#   # ",
        "# ##  ",
        "#   # ",
        "#    #",
        "#    #",
        "#    #",
        "#   # ",
        "# ##  ",
    ]),
}

# umlauts compose the base lowercase glyph with a pair of dots
for _uml, _base in (("ä", "a"), ("ö", "o"), ("ü", "u")):
    _top, _rows = GLYPH_ART[_base]
    _gap = [" " * 6] * (_top - (_DOTS[0] + len(_DOTS[1])))
    GLYPH_ART[_uml] = (_DOTS[0], list(_DOTS[1]) + _gap + list(_rows))


def glyph_rows(ch):
    """16 row-bitmasks for one character (MSB = leftmost cell pixel)."""
    top, art = GLYPH_ART[ch]
    rows = [0] * CELL_H
    for i, line in enumerate(art):
        if len(line) > CELL_W - GLYPH_X_OFFSET:
            raise ValueError(f"glyph {ch!r} row {i} wider than design grid")
        bits = 0
        for x, px in enumerate(line):
            if px == "#":
                bits |= 1 << (7 - (x + GLYPH_X_OFFSET))
            elif px != " ":
                raise ValueError(f"glyph {ch!r} has invalid pixel {px!r}")
        rows[top + i] = bits
    return rows


def build_font_blob():
    """Pack every glyph into the binary table format described in glyphdiff.font."""
    chars = sorted(GLYPH_ART, key=ord)
    out = bytearray()
    out += b"GFNT"
    out += struct.pack("<BBBB", 1, CELL_W, CELL_H, 0)
    out += struct.pack("<H", len(chars))
    for ch in chars:
        out += struct.pack("<I", ord(ch))
        out += bytes(glyph_rows(ch))
    return bytes(out)


def main(argv=None):
    from pathlib import Path

    argv = sys.argv[1:] if argv is None else argv
    dest = Path(argv[0]) if argv else Path(__file__).parent / "data" / "font8x16.bin"
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_bytes(build_font_blob())
    print(f"wrote {dest} ({dest.stat().st_size} bytes, {len(GLYPH_ART)} glyphs)")


if __name__ == "__main__":
    main()

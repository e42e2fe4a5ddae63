"""Embedded 6x12 monospaced bitmap font covering printable ASCII."""

import numpy as np

CELL_W = 6
CELL_H = 12
FIRST_CHAR = 32

# one 24-hex-digit row per glyph (12 rows x 6 bits, MSB = leftmost pixel)
_GLYPH_HEX = (
    "000000000000000000000000",  # ' '
    "000000181818180018000000",  # '!'
    "000000141414000000000000",  # '"'
    "000014143e14143e14140000",  # '#'
    "00081e323c1e06363c080000",  # '$'
    "0000382a3c081e2a0e000000",  # '%'
    "0000001c30183e2c3e000000",  # '&'
    "00000c081000000000000000",  # "'"
    "000004081818181808040000",  # '('
    "000010080c0c0c0c08100000",  # ')'
    "0000083c1824000000000000",  # '*'
    "00000008083e080800000000",  # '+'
    "00000000000000000c081000",  # ','
    "00000000003e000000000000",  # '-'
    "000000000000000018000000",  # '.'
    "000002020404080810100000",  # '/'
    "00001c36363636361c000000",  # '0'
    "00000c3c0c0c0c0c3f000000",  # '1'
    "00001c36060c18363e000000",  # '2'
    "00001c36061c06361c000000",  # '3'
    "0000060e16363f0606000000",  # '4'
    "00003e303c3606263c000000",  # '5'
    "00001c36303c36361c000000",  # '6'
    "00003e36060c0c1818000000",  # '7'
    "00001c36361c36361c000000",  # '8'
    "00001c36361e06361c000000",  # '9'
    "000000000018000018000000",  # ':'
    "000000000018000018102000",  # ';'
    "0000000c1830180c00000000",  # '<'
    "000000003c003c0000000000",  # '='
    "000000180c060c1800000000",  # '>'
    "0000001c260c180018000000",  # '?'
    "00001c32262a2a27301c0000",  # '@'
    "0000003c1c143e3637000000",  # 'A'
    "0000003c363c36363c000000",  # 'B'
    "0000001e363030361c000000",  # 'C'
    "0000003c363636363c000000",  # 'D'
    "0000003e303c30363e000000",  # 'E'
    "0000003e303c303038000000",  # 'F'
    "0000001c36303e361e000000",  # 'G'
    "00000037363e363637000000",  # 'H'
    "0000003c181818183c000000",  # 'I'
    "0000001e0c0c2c2c38000000",  # 'J'
    "0000003634383c363b000000",  # 'K'
    "00000038303030363e000000",  # 'L'
    "0000002236363e2a2a000000",  # 'M'
    "000000373a3a363632000000",  # 'N'
    "0000001c363636361c000000",  # 'O'
    "0000003c36363c3038000000",  # 'P'
    "0000001c363636361c060000",  # 'Q'
    "0000003c36363c363b000000",  # 'R'
    "0000001e323c0e263c000000",  # 'S'
    "0000003e1a1818183c000000",  # 'T'
    "00000037363636361c000000",  # 'U'
    "0000003736141c1c08000000",  # 'V'
    "0000002b2a2a3e1c14000000",  # 'W'
    "000000331e0c0c1e33000000",  # 'X'
    "00000033331e0c0c1e000000",  # 'Y'
    "0000003e360c18363e000000",  # 'Z'
    "00001c1818181818181c0000",  # '['
    "000020201010080804040000",  # '\\'
    "00001c0c0c0c0c0c0c1c0000",  # ']'
    "0000081c3600000000000000",  # '^'
    "000000000000000000003f00",  # '_'
    "000018080400000000000000",  # '`'
    "000000001c361e363f000000",  # 'a'
    "000030303c3636363c000000",  # 'b'
    "000000001c3630361c000000",  # 'c'
    "00000e061e3636361f000000",  # 'd'
    "000000001c363e301e000000",  # 'e'
    "00000e183e1818183e000000",  # 'f'
    "000000001b3636361e063c00",  # 'g'
    "000030303c36363636000000",  # 'h'
    "00000c003c0c0c0c3f000000",  # 'i'
    "00000c003c0c0c0c0c0c3800",  # 'j'
    "00003030363c383c37000000",  # 'k'
    "00003c0c0c0c0c0c3f000000",  # 'l'
    "000000003c3e2a2a2a000000",  # 'm'
    "000000002c36363636000000",  # 'n'
    "000000001c3636361c000000",  # 'o'
    "000000003c3636363c303800",  # 'p'
    "000000001b3636361e060f00",  # 'q'
    "00000000371d18183c000000",  # 'r'
    "000000001e381e073e000000",  # 's'
    "000018183e18181b0e000000",  # 't'
    "00000000363636361f000000",  # 'u'
    "0000000036361c1c08000000",  # 'v'
    "000000002b2a3e1e14000000",  # 'w'
    "000000003b1e0c1e37000000",  # 'x'
    "00000000373636141c183000",  # 'y'
    "000000003e2c18363e000000",  # 'z'
    "0000060c0c180c0c0c060000",  # '{'
    "000000080808080808080000",  # '|'
    "00003018180c181818300000",  # '}'
    "000000001a2c000000000000",  # '~'
)


def _decode():
    out = np.zeros((len(_GLYPH_HEX), CELL_H, CELL_W), dtype=np.uint8)
    for g, row in enumerate(_GLYPH_HEX):
        for y in range(CELL_H):
            bits = int(row[2 * y:2 * y + 2], 16)
            for x in range(CELL_W):
                out[g, y, x] = (bits >> (CELL_W - 1 - x)) & 1
    return out


GLYPHS = _decode()


def glyph_index(ch: str) -> int:
    """Index into GLYPHS; characters outside printable ASCII render as '?'."""
    code = ord(ch)
    if code < FIRST_CHAR or code >= FIRST_CHAR + len(_GLYPH_HEX):
        code = ord('?')
    return code - FIRST_CHAR

"""UTF-8 cursors that carry the character index and the byte offset in one word.

A cursor (``StrIdx``) is a plain 64-bit int: the logical character index in
the high 32 bits and the physical byte offset in the low 32 bits.  Stepping
one character adds ``0x1_0000_0001`` and then moves the byte half over the
continuation bytes, so both indices stay in sync without any table.

The stepping functions trust the lead byte, like any cursor over a string
already known to be valid.  Use :func:`validate` on untrusted input.
"""

from __future__ import annotations

from typing import Iterator, NamedTuple, Optional, Tuple, Union

STEP = 0x1_0000_0001
HALF_MASK = 0xFFFF_FFFF
MAX_BYTES = 1 << 32

Buffer = Union[bytes, bytearray, memoryview]


class Utf8Error(ValueError):
    pass


class InvalidSequence(Utf8Error):
    def __init__(self, offset: int, msg: str = "invalid UTF-8 sequence"):
        super().__init__(f"{msg} at byte {offset}")
        self.offset = offset


class OutOfBounds(Utf8Error, IndexError):
    pass


def make(logical: int, physical: int) -> int:
    if not (0 <= logical <= HALF_MASK and 0 <= physical <= HALF_MASK):
        raise ValueError("both indices must fit in 32 bits")
    return (logical << 32) | physical


def logical(idx: int) -> int:
    return idx >> 32


def physical(idx: int) -> int:
    return idx & HALF_MASK


def check_buffer(buf: Buffer) -> None:
    if len(buf) >= MAX_BYTES:
        raise ValueError("buffer length must be below 2**32 bytes")


def decode_at(buf: Buffer, phys: int) -> int:
    """Code point of the sequence starting at byte ``phys``.

    Only the bit patterns are checked: overlong forms, surrogates and values
    above U+10FFFF decode without complaint.
    """
    n = len(buf)
    if not 0 <= phys < n:
        raise OutOfBounds(f"byte offset {phys} outside buffer of {n} bytes")
    b0 = buf[phys]
    if b0 < 0x80:
        return b0
    if b0 & 0xE0 == 0xC0:
        need = 2
    elif b0 & 0xF0 == 0xE0:
        need = 3
    elif b0 & 0xF8 == 0xF0:
        need = 4
    else:
        raise InvalidSequence(phys)
    if phys + need > n:
        raise OutOfBounds(f"{need}-byte sequence at {phys} runs past end of buffer")
    for k in range(1, need):
        if buf[phys + k] & 0xC0 != 0x80:
            raise InvalidSequence(phys)
    if need == 2:
        return ((b0 & 0x1F) << 6) | (buf[phys + 1] & 0x3F)
    if need == 3:
        return ((b0 & 0x0F) << 12) | ((buf[phys + 1] & 0x3F) << 6) | (buf[phys + 2] & 0x3F)
    return (
        ((b0 & 0x07) << 18)
        | ((buf[phys + 1] & 0x3F) << 12)
        | ((buf[phys + 2] & 0x3F) << 6)
        | (buf[phys + 3] & 0x3F)
    )


def next_idx(buf: Buffer, idx: int) -> int:
    """Step one character forward."""
    p = idx & HALF_MASK
    if p >= len(buf):
        raise OutOfBounds(f"cannot step past end of buffer (byte {p})")
    code = buf[p]
    idx += STEP
    if code & 0x80:
        while True:
            code <<= 1
            idx += 1
            if not code & 0x40:
                break
    if idx & HALF_MASK > len(buf):
        raise OutOfBounds(f"sequence at byte {p} is truncated")
    return idx


def prev_idx(buf: Buffer, idx: int) -> int:
    """Step one character backward.

    The scan skips bytes of the form 10xxxxxx only, so it stops on the lead
    byte and exactly undoes :func:`next_idx`.
    """
    if idx >> 32 == 0:
        raise OutOfBounds("cannot step before the first character")
    if idx & HALF_MASK == 0:
        raise InvalidSequence(0, "logical index ahead of physical index")
    idx -= STEP
    while buf[idx & HALF_MASK] & 0xC0 == 0x80:
        if idx & HALF_MASK == 0:
            raise InvalidSequence(0, "continuation byte at start of buffer")
        idx -= 1
    return idx


def decode_and_next(buf: Buffer, idx: int) -> Tuple[int, int]:
    """Decode the character under ``idx`` and step past it in one pass."""
    n = len(buf)
    p = idx & HALF_MASK
    if p >= n:
        raise OutOfBounds(f"cannot step past end of buffer (byte {p})")
    ucode = buf[p]
    idx += STEP
    if ucode & 0x80:
        msk = 0x40
        while True:
            p = idx & HALF_MASK
            if p >= n:
                raise OutOfBounds(f"sequence ending at byte {p} is truncated")
            ucode = (ucode << 6) | (buf[p] & 0x3F)
            msk <<= 5
            idx += 1
            if not ucode & msk:
                break
        ucode &= msk - 1
    return ucode, idx


def advance_by(buf: Buffer, idx: int, n: int) -> int:
    """Move ``n`` characters, forward for positive ``n``, backward otherwise."""
    if n >= 0:
        for _ in range(n):
            idx = next_idx(buf, idx)
    else:
        if (idx >> 32) + n < 0:
            raise OutOfBounds(f"cannot move {n} characters from logical index {idx >> 32}")
        for _ in range(-n):
            idx = prev_idx(buf, idx)
    return idx


def walk(buf: Buffer, start: int = 0) -> Iterator[Tuple[int, int]]:
    """Yield ``(idx, code point)`` for each character from ``start`` to the end."""
    idx = start
    n = len(buf)
    while idx & HALF_MASK < n:
        ucode, nxt = decode_and_next(buf, idx)
        yield idx, ucode
        idx = nxt


def end_index(buf: Buffer) -> int:
    idx = 0
    n = len(buf)
    while idx & HALF_MASK < n:
        idx = next_idx(buf, idx)
    return idx


class Validation(NamedTuple):
    ok: bool
    error_offset: Optional[int] = None


_MIN_FOR_LENGTH = {2: 0x80, 3: 0x800, 4: 0x10000}


def validate(buf: Buffer, strict: bool = False) -> Validation:
    """Check that the buffer decodes at every boundary reached by stepping.

    With ``strict`` also reject overlong encodings, surrogates and code
    points above U+10FFFF.
    """
    check_buffer(buf)
    p = 0
    n = len(buf)
    while p < n:
        try:
            cp = decode_at(buf, p)
        except Utf8Error:
            return Validation(False, p)
        width = physical(next_idx(buf, p)) - p
        if strict and (
            (width > 1 and cp < _MIN_FOR_LENGTH[width])
            or 0xD800 <= cp <= 0xDFFF
            or cp > 0x10FFFF
        ):
            return Validation(False, p)
        p += width
    return Validation(True, None)

"""Signed multi-precision integers packed into a single 64-bit word.

Every integer is one unsigned 64-bit word ``w`` in exactly one of three
formats, chosen by the value alone:

TINY   bit 63 clear.  The low 63 bits hold the value in two's complement,
       so the range is [-2**62, 2**62 - 1].
LARGE  bit 63 set, bits 59-62 = log2(capacity) in 0..14, bits 45-58 =
       size - 1, bits 0-44 = limb buffer address >> 3.  Up to 16384 limbs.
HUGE   bits 59-63 all set, bits 0-47 = address of a 3-word header
       ``[capacity, size, storage]``.

Limbs are little-endian 64-bit words in two's complement; the top limb
carries the sign and every stored limb sequence is minimal.  Words are
immutable: each operation returns a fresh word and the caller releases
buffers with :func:`free_z`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from .tagcore import ADDR_MASK, PACKED_MASK, Arena, default_arena, pack, unpack

LIMB_BITS = 64
LIMB_MASK = (1 << 64) - 1
SIGN_BIT = 1 << 63

TINY_MIN = -(1 << 62)
TINY_MAX = (1 << 62) - 1
TINY_MASK = (1 << 63) - 1

CAP_SHIFT = 59
SIZE_SHIFT = 45
CAP_FIELD = 0xF
SIZE_FIELD = 0x3FFF
HUGE_TAG = 0x1F << CAP_SHIFT  # 0xF800_0000_0000_0000
LARGE_MAX_LIMBS = 1 << 14  # 16384
HUGE_HEADER_BYTES = 24

DEC_CHUNK = 10 ** 19
DEC_DIGITS = 19

# below this many limbs in the shorter operand, multiply limb-by-limb in Python
_VECTOR_MUL_THRESHOLD = 12
_DC_DECIMAL_DIGITS = 4000  # longer decimal input is converted by splitting


class Format(enum.Enum):
    TINY = "TINY"
    LARGE = "LARGE"
    HUGE = "HUGE"


class Order(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


class IntegrityError(ValueError):
    """A word whose fields cannot describe a valid integer."""


class ParseError(ValueError):
    pass


@dataclass
class LimbView:
    """Decoded integer storage: ``limbs`` holds the ``size`` limbs in use."""

    limbs: List[int]
    size: int
    capacity: int
    fmt: Format
    addr: Optional[int] = None  # limb buffer; None for TINY
    header: Optional[int] = None  # HUGE only

    @property
    def negative(self) -> bool:
        return bool(self.limbs[self.size - 1] & SIGN_BIT)


# -- pure word-level helpers --------------------------------------------------


def classify(w: int) -> Format:
    if not w & SIGN_BIT:
        return Format.TINY
    if w & HUGE_TAG == HUGE_TAG:
        return Format.HUGE
    return Format.LARGE


def decode_tiny(w: int) -> int:
    if w & SIGN_BIT:
        raise ValueError(f"0x{w:016x} is not a TINY word")
    # (signed64)(w << 1) >> 1
    return w - (1 << 63) if w & (1 << 62) else w


def encode_tiny(v: int) -> int:
    if not TINY_MIN <= v <= TINY_MAX:
        raise ValueError(f"{v} is outside the TINY range")
    return v & TINY_MASK


def pack_large(cap_log2: int, size: int, addr: int) -> int:
    if not 0 <= cap_log2 <= 14:
        raise ValueError("LARGE capacity exponent must be in 0..14")
    if not 1 <= size <= (1 << cap_log2):
        raise ValueError("LARGE size must be in 1..capacity")
    return SIGN_BIT | (cap_log2 << CAP_SHIFT) | ((size - 1) << SIZE_SHIFT) | pack(addr)


def large_fields(w: int):
    """(buffer address, size, capacity) of a LARGE word, no memory access."""
    buf = unpack(w & PACKED_MASK)
    size = ((w >> SIZE_SHIFT) & SIZE_FIELD) + 1
    cap = 1 << ((w >> CAP_SHIFT) & CAP_FIELD)
    return buf, size, cap


def next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length() if n > 1 else 1


# -- limb-list arithmetic (two's complement, little-endian) --------------------


def normalize(limbs: Sequence[int]) -> List[int]:
    """Strip redundant sign-extension limbs."""
    out = list(limbs)
    if not out:
        return [0]
    while len(out) > 1:
        top, below = out[-1], out[-2]
        if (top == 0 and not below & SIGN_BIT) or (top == LIMB_MASK and below & SIGN_BIT):
            out.pop()
        else:
            break
    return out


def _ext(limbs: Sequence[int]) -> int:
    return LIMB_MASK if limbs[-1] & SIGN_BIT else 0


def _add_limbs(a: Sequence[int], b: Sequence[int]) -> List[int]:
    if len(a) < len(b):
        a, b = b, a
    ea, eb = _ext(a), _ext(b)
    nb = len(b)
    out = []
    carry = 0
    for i in range(len(a)):
        t = a[i] + (b[i] if i < nb else eb) + carry
        out.append(t & LIMB_MASK)
        carry = t >> 64
    out.append((ea + eb + carry) & LIMB_MASK)
    return normalize(out)


def _neg_limbs(a: Sequence[int]) -> List[int]:
    out = []
    carry = 1
    for x in a:
        t = (x ^ LIMB_MASK) + carry
        out.append(t & LIMB_MASK)
        carry = t >> 64
    out.append(((_ext(a) ^ LIMB_MASK) + carry) & LIMB_MASK)
    return normalize(out)


def _magnitude(a: Sequence[int]):
    """(negative, unsigned magnitude limbs) with the same limb count."""
    if not a[-1] & SIGN_BIT:
        return False, list(a)
    out = []
    carry = 1
    for x in a:
        t = (x ^ LIMB_MASK) + carry
        out.append(t & LIMB_MASK)
        carry = t >> 64
    return True, out


def _umul_small(a: Sequence[int], b: Sequence[int]) -> List[int]:
    nb = len(b)
    res = [0] * (len(a) + nb)
    for i, ai in enumerate(a):
        if not ai:
            continue
        carry = 0
        k = i
        for bj in b:
            t = res[k] + ai * bj + carry
            res[k] = t & LIMB_MASK
            carry = t >> 64
            k += 1
        res[i + nb] = carry
    return res


def _umul_vector(a: Sequence[int], b: Sequence[int]) -> List[int]:
    # Schoolbook over 32-bit digits.  Each digit product is split into its
    # low and high halves before accumulating, so a column collects at most
    # min(len) * 2 terms below 2**32 and cannot overflow uint64.
    if len(a) < len(b):
        a, b = b, a
    da = np.array(a, dtype=np.uint64).view(np.uint32).astype(np.uint64)
    db = np.array(b, dtype=np.uint64).view(np.uint32).tolist()
    m = len(da)
    ndig = m + len(db) + 1
    lo = np.zeros(ndig, dtype=np.uint64)
    hi = np.zeros(ndig, dtype=np.uint64)
    low_mask = np.uint64(0xFFFFFFFF)
    shift = np.uint64(32)
    row = np.empty(m, dtype=np.uint64)
    for i, d in enumerate(db):
        if not d:
            continue
        np.multiply(da, np.uint64(d), out=row)
        lo[i:i + m] += row & low_mask
        hi[i + 1:i + 1 + m] += row >> shift
    cols = (lo + hi).tolist()
    out = []
    carry = 0
    for k in range(0, ndig - 1, 2):
        t = cols[k] + carry
        low = t & 0xFFFFFFFF
        t = (t >> 32) + cols[k + 1]
        out.append(low | ((t & 0xFFFFFFFF) << 32))
        carry = t >> 32
    return out


def _mul_limbs(a: Sequence[int], b: Sequence[int]) -> List[int]:
    neg_a, ma = _magnitude(a)
    neg_b, mb = _magnitude(b)
    if min(len(ma), len(mb)) >= _VECTOR_MUL_THRESHOLD:
        prod = _umul_vector(ma, mb)
    else:
        prod = _umul_small(ma, mb)
    prod.append(0)
    if neg_a != neg_b:
        return _neg_limbs(prod)
    return normalize(prod)


def _chunks_to_limbs(chunks: Sequence[int], powers: dict) -> List[int]:
    """Signed limbs of base-10**19 digits (most significant first).

    Splits in half and joins with one multiplication, so the cost follows
    the multiplier instead of growing with digits squared.
    """
    n = len(chunks)
    if n <= 32:
        mag = [0]
        for c in chunks:
            carry = c
            for i in range(len(mag)):
                t = mag[i] * DEC_CHUNK + carry
                mag[i] = t & LIMB_MASK
                carry = t >> 64
            if carry:
                mag.append(carry)
        mag.append(0)
        return normalize(mag)
    low = n // 2
    high = _chunks_to_limbs(chunks[:n - low], powers)
    rest = _chunks_to_limbs(chunks[n - low:], powers)
    return _add_limbs(_mul_limbs(high, _dec_power(low, powers)), rest)


def _dec_power(k: int, powers: dict) -> List[int]:
    """Limbs of 10**(19*k), memoized in ``powers``."""
    if k not in powers:
        if k == 1:
            powers[k] = normalize([DEC_CHUNK, 0])
        else:
            half = _dec_power(k // 2, powers)
            p = _mul_limbs(half, half)
            powers[k] = _mul_limbs(p, _dec_power(1, powers)) if k % 2 else p
    return powers[k]


def _cmp_same_width(a: Sequence[int], b: Sequence[int]) -> Order:
    for i in range(len(a) - 1, -1, -1):
        if a[i] != b[i]:
            return Order.LESS if a[i] < b[i] else Order.GREATER
    return Order.EQUAL


# -- operations that touch memory ---------------------------------------------


class ZContext:
    """Integer operations bound to the arena that owns the limb buffers."""

    def __init__(self, arena: Optional[Arena] = None):
        self.arena = arena if arena is not None else default_arena()

    # decoding

    def fields(self, w: int):
        """Return ``(format, buffer, size, capacity)`` without reading limbs."""
        fmt = classify(w)
        if fmt is Format.TINY:
            return fmt, None, 1, 1
        if fmt is Format.HUGE:
            a = w & ADDR_MASK
            cap, size, buf = self.arena.read_words(a, 3)
            if size > cap or size <= LARGE_MAX_LIMBS:
                raise IntegrityError(f"HUGE header at 0x{a:x}: size={size} capacity={cap}")
            return fmt, buf, size, cap
        buf, size, cap = large_fields(w)
        if size > cap:
            raise IntegrityError(f"LARGE word 0x{w:016x}: size {size} > capacity {cap}")
        return fmt, buf, size, cap

    def decode(self, w: int) -> LimbView:
        fmt, buf, size, cap = self.fields(w)
        if fmt is Format.TINY:
            return LimbView([decode_tiny(w) & LIMB_MASK], 1, 1, fmt)
        header = w & ADDR_MASK if fmt is Format.HUGE else None
        return LimbView(self.arena.read_words(buf, size), size, cap, fmt, buf, header)

    def limbs(self, w: int) -> List[int]:
        if not w & SIGN_BIT:
            return [decode_tiny(w) & LIMB_MASK]
        _, buf, size, _ = self.fields(w)
        return self.arena.read_words(buf, size)

    def _top_limb(self, w: int) -> int:
        _, buf, size, _ = self.fields(w)
        return self.arena.read_word(buf + (size - 1) * 8)

    # construction

    def encode_i64(self, v: int) -> int:
        if not -(1 << 63) <= v < (1 << 63):
            raise ValueError(f"{v} does not fit in a signed 64-bit word")
        if TINY_MIN <= v <= TINY_MAX:
            return v & TINY_MASK
        return self._store([v & LIMB_MASK])

    def from_limbs(self, view: Union[LimbView, Sequence[int]]) -> int:
        """Canonical word for a (possibly non-minimal) limb sequence."""
        if isinstance(view, LimbView):
            view = view.limbs[:view.size]
        return self._store(normalize(view))

    def _store(self, limbs: List[int]) -> int:
        n = len(limbs)
        if n == 1:
            top = limbs[0]
            v = top - (1 << 64) if top & SIGN_BIT else top
            if TINY_MIN <= v <= TINY_MAX:
                return v & TINY_MASK
        cap = next_pow2(n)
        buf = self.arena.alloc(cap * 8)
        self.arena.write_words(buf, limbs)
        if n <= LARGE_MAX_LIMBS:
            return SIGN_BIT | ((cap.bit_length() - 1) << CAP_SHIFT) | ((n - 1) << SIZE_SHIFT) | pack(buf)
        header = self.arena.alloc(HUGE_HEADER_BYTES)
        self.arena.write_words(header, [cap, n, buf])
        return HUGE_TAG | header

    def grow(self, view: LimbView, needed: int) -> LimbView:
        """Move ``view`` into a buffer of at least ``needed`` limbs.

        Capacity at least doubles.  Past 16384 limbs the storage can only be
        described by a HUGE header.  The old buffer is released.
        """
        if needed <= view.capacity:
            raise ValueError("grow called without a capacity shortfall")
        cap = max(2 * view.capacity, next_pow2(needed))
        buf = self.arena.alloc(cap * 8)
        if view.addr is not None:
            self.arena.word_view(buf, view.size)[:] = self.arena.word_view(view.addr, view.size)
            self.arena.free(view.addr)
        else:
            self.arena.write_words(buf, view.limbs[:view.size])
        fmt = Format.LARGE if cap <= LARGE_MAX_LIMBS else Format.HUGE
        return LimbView(self.arena.read_words(buf, view.size), view.size, cap, fmt, buf)

    def free_z(self, w: int) -> None:
        fmt = classify(w)
        if fmt is Format.TINY:
            return
        if fmt is Format.LARGE:
            self.arena.free(large_fields(w)[0])
            return
        header = w & ADDR_MASK
        buf = self.arena.read_word(header + 16)
        self.arena.free(buf)
        self.arena.free(header)

    # arithmetic

    def add(self, a: int, b: int) -> int:
        if not (a | b) & SIGN_BIT:
            s = decode_tiny(a) + decode_tiny(b)
            if TINY_MIN <= s <= TINY_MAX:
                return s & TINY_MASK
        return self._store(_add_limbs(self.limbs(a), self.limbs(b)))

    def sub(self, a: int, b: int) -> int:
        if not (a | b) & SIGN_BIT:
            s = decode_tiny(a) - decode_tiny(b)
            if TINY_MIN <= s <= TINY_MAX:
                return s & TINY_MASK
        return self._store(_add_limbs(self.limbs(a), _neg_limbs(self.limbs(b))))

    def neg(self, a: int) -> int:
        if not a & SIGN_BIT:
            v = decode_tiny(a)
            if v != TINY_MIN:
                return -v & TINY_MASK
        return self._store(_neg_limbs(self.limbs(a)))

    def mul(self, a: int, b: int) -> int:
        if not (a | b) & SIGN_BIT:
            p = decode_tiny(a) * decode_tiny(b)
            if TINY_MIN <= p <= TINY_MAX:
                return p & TINY_MASK
        return self._store(_mul_limbs(self.limbs(a), self.limbs(b)))

    def cmp(self, a: int, b: int) -> Order:
        if not (a | b) & SIGN_BIT:
            # both TINY: signed compare of the words shifted left by one
            x, y = decode_tiny(a), decode_tiny(b)
            return Order.LESS if x < y else Order.GREATER if x > y else Order.EQUAL
        neg_a = decode_tiny(a) < 0 if not a & SIGN_BIT else bool(self._top_limb(a) & SIGN_BIT)
        neg_b = decode_tiny(b) < 0 if not b & SIGN_BIT else bool(self._top_limb(b) & SIGN_BIT)
        if neg_a != neg_b:
            return Order.LESS if neg_a else Order.GREATER
        # same sign: under canonicality a wider value has the larger magnitude
        size_a = self.fields(a)[2] if a & SIGN_BIT else 0
        size_b = self.fields(b)[2] if b & SIGN_BIT else 0
        if size_a != size_b:
            wider_is_greater = (size_a > size_b) != neg_a
            return Order.GREATER if wider_is_greater else Order.LESS
        return _cmp_same_width(self.limbs(a), self.limbs(b))

    def equal(self, a: int, b: int) -> bool:
        if not (a | b) & SIGN_BIT:
            return a == b
        return self.cmp(a, b) is Order.EQUAL

    # decimal I/O

    def to_decimal(self, w: int) -> str:
        if not w & SIGN_BIT:
            return str(decode_tiny(w))
        negative, mag = _magnitude(self.limbs(w))
        while len(mag) > 1 and mag[-1] == 0:
            mag.pop()
        chunks = []
        while len(mag) > 1 or mag[0]:
            rem = 0
            for i in range(len(mag) - 1, -1, -1):
                cur = (rem << 64) | mag[i]
                q = cur // DEC_CHUNK
                rem = cur - q * DEC_CHUNK
                mag[i] = q
            chunks.append(rem)
            while len(mag) > 1 and mag[-1] == 0:
                mag.pop()
        text = str(chunks[-1]) + "".join(f"{c:019d}" for c in reversed(chunks[:-1]))
        return "-" + text if negative else text

    def from_decimal(self, s: str) -> int:
        text = s.strip()
        negative = False
        if text[:1] in ("-", "−"):
            negative = True
            text = text[1:]
        if not text or not all("0" <= c <= "9" for c in text):
            raise ParseError(f"not a decimal integer: {s!r}")
        if len(text) <= 18:
            v = int(text)
            return self.encode_i64(-v if negative else v)
        if len(text) > _DC_DECIMAL_DIGITS:
            head = len(text) % DEC_DIGITS or DEC_DIGITS
            chunks = [int(text[:head])] + [
                int(text[i:i + DEC_DIGITS]) for i in range(head, len(text), DEC_DIGITS)
            ]
            limbs = _chunks_to_limbs(chunks, {})
            return self._store(_neg_limbs(limbs) if negative else limbs)

        # accumulate the magnitude in a growable scratch buffer
        view = LimbView([0], 1, 1, Format.LARGE, self.arena.alloc(8))
        head = len(text) % DEC_DIGITS or DEC_DIGITS
        pos = 0
        step = head
        while pos < len(text):
            chunk = text[pos:pos + step]
            pos += step
            step = DEC_DIGITS
            mult = 10 ** len(chunk)
            carry = int(chunk)
            mem = self.arena.word_view(view.addr, view.size)
            for i in range(view.size):
                t = mem[i] * mult + carry
                mem[i] = t & LIMB_MASK
                carry = t >> 64
            mem.release()
            if carry:
                if view.size == view.capacity:
                    view = self.grow(view, view.size + 1)
                self.arena.write_word(view.addr + view.size * 8, carry)
                view.size += 1
        mag = self.arena.read_words(view.addr, view.size)
        self.arena.free(view.addr)
        mag.append(0)
        return self._store(_neg_limbs(mag) if negative else normalize(mag))

    # rendering

    def inspect(self, w: int, max_limbs: int = 16) -> str:
        fmt = classify(w)
        if fmt is Format.TINY:
            return f"TINY w=0x{w:016x} value={decode_tiny(w)}"
        _, buf, size, cap = self.fields(w)
        limbs = _render_limbs(self.arena.read_words(buf, size), max_limbs)
        if fmt is Format.LARGE:
            k = cap.bit_length() - 1
            return f"LARGE w=0x{w:016x} cap=2^{k} size={size} addr=0x{buf:x} limbs={limbs}"
        return (
            f"HUGE w=0x{w:016x} header=0x{w & ADDR_MASK:x} cap={cap} size={size} "
            f"addr=0x{buf:x} limbs={limbs}"
        )


def _render_limbs(limbs: List[int], max_limbs: int) -> str:
    if len(limbs) <= max_limbs:
        return "[" + ", ".join(f"0x{x:016x}" for x in limbs) + "]"
    half = max_limbs // 2
    head = ", ".join(f"0x{x:016x}" for x in limbs[:half])
    tail = ", ".join(f"0x{x:016x}" for x in limbs[-half:])
    return f"[{head}, ...({len(limbs) - 2 * half} more)..., {tail}]"


_default = ZContext()

fields = _default.fields
decode = _default.decode
limbs_of = _default.limbs
encode_i64 = _default.encode_i64
from_limbs = _default.from_limbs
grow = _default.grow
free_z = _default.free_z
add = _default.add
sub = _default.sub
neg = _default.neg
mul = _default.mul
cmp = _default.cmp
equal = _default.equal
to_decimal = _default.to_decimal
from_decimal = _default.from_decimal
inspect = _default.inspect

"""Aligned 48-bit addresses and the arena that hands them out.

On x86-64 and AArch64 a user-space pointer carries 48 significant bits, and
anything allocated on a word boundary has its low 3 bits clear.  Shifting
those 3 bits away leaves a 45-bit quantity, which is what the integer and GC
modules pack next to their tag bits.

The :class:`Arena` reserves real anonymous mappings, so the addresses it
returns are genuine process addresses and the 48-bit assumption is checked
against the running platform instead of being simulated.
"""

from __future__ import annotations

import bisect
import ctypes
from array import array
import mmap
from typing import Dict, Iterable, List, Optional, Tuple

ADDR_BITS = 48
ADDR_LIMIT = 1 << ADDR_BITS
ADDR_MASK = ADDR_LIMIT - 1  # 0xFFFF_FFFF_FFFF
PACKED_BITS = 45
PACKED_LIMIT = 1 << PACKED_BITS
PACKED_MASK = PACKED_LIMIT - 1  # 0x1FFF_FFFF_FFFF
ALIGN = 8

MIN_CLASS = 8
MAX_CLASS = 128 * 1024
CHUNK_BYTES = 1 << 20
POISON = 0xDD


class AddressError(ValueError):
    """Address is misaligned or outside the range it is claimed to fit."""


class ArenaError(RuntimeError):
    """Arena misuse (double free, unknown address) or an unusable mapping."""


def pack(addr: int) -> int:
    """Drop the three alignment bits of a 48-bit address."""
    if addr < 0 or addr >= ADDR_LIMIT:
        raise AddressError(f"address 0x{addr:x} does not fit in {ADDR_BITS} bits")
    if addr & (ALIGN - 1):
        raise AddressError(f"address 0x{addr:x} is not {ALIGN}-byte aligned")
    return addr >> 3


def unpack(packed: int) -> int:
    if packed < 0 or packed >= PACKED_LIMIT:
        raise AddressError(f"packed value 0x{packed:x} does not fit in {PACKED_BITS} bits")
    return packed << 3


def is_address48(addr: int) -> bool:
    return 0 <= addr < ADDR_LIMIT and addr & (ALIGN - 1) == 0


def size_class(nbytes: int) -> Optional[int]:
    """Power-of-two slot size for ``nbytes``, or None when served individually."""
    if nbytes > MAX_CLASS:
        return None
    return max(MIN_CLASS, 1 << (nbytes - 1).bit_length())


class _Block:
    __slots__ = ("base", "size", "mm", "raw", "words")

    def __init__(self, base: int, mm: mmap.mmap):
        self.base = base
        self.size = len(mm)
        self.mm = mm
        self.raw = memoryview(mm)
        self.words = self.raw.cast("Q")

    def release(self) -> None:
        self.words.release()
        self.raw.release()
        self.mm.close()


class Arena:
    """Bump allocator with power-of-two free lists over anonymous mappings.

    Requests up to 128 KiB are rounded to a size class and carved out of
    1 MiB chunks; larger requests get a mapping of their own that is
    unmapped on free.  Every returned address is 8-byte aligned and below
    2^48; a mapping that violates this is rejected when it is reserved.

    Not thread-safe: use one arena per thread.
    """

    def __init__(self, poison: bool = __debug__):
        self.poison = poison
        self._bases: List[int] = []
        self._blocks: Dict[int, _Block] = {}
        self._free: Dict[int, List[int]] = {}
        self._outstanding: Dict[int, int] = {}  # addr -> slot bytes; negative = dedicated
        self._chunk: Optional[_Block] = None
        self._top = 0
        self.total_allocs = 0
        self.total_frees = 0

    # -- mappings -----------------------------------------------------------

    def _reserve(self, nbytes: int) -> Tuple[mmap.mmap, int]:
        mm = mmap.mmap(-1, nbytes)
        base = ctypes.addressof(ctypes.c_char.from_buffer(mm))
        return mm, base

    def _map(self, nbytes: int) -> _Block:
        mm, base = self._reserve(nbytes)
        if base & (ALIGN - 1) or base + nbytes > ADDR_LIMIT:
            mm.close()
            raise ArenaError(
                f"platform mapped 0x{base:x}+{nbytes} outside the {ADDR_BITS}-bit "
                "address space; refusing to truncate pointers"
            )
        block = _Block(base, mm)
        bisect.insort(self._bases, base)
        self._blocks[base] = block
        return block

    def _unmap(self, block: _Block) -> None:
        del self._blocks[block.base]
        self._bases.remove(block.base)
        block.release()

    def _locate(self, addr: int) -> Tuple[_Block, int]:
        i = bisect.bisect_right(self._bases, addr) - 1
        if i >= 0:
            block = self._blocks[self._bases[i]]
            off = addr - block.base
            if off < block.size:
                return block, off
        raise ArenaError(f"address 0x{addr:x} is not inside the arena")

    # -- allocation ---------------------------------------------------------

    def alloc(self, nbytes: int) -> int:
        """Return the address of ``nbytes`` zeroed bytes owned by the caller."""
        if nbytes <= 0:
            raise ValueError("allocation size must be positive")
        cls = size_class(nbytes)
        if cls is None:
            rounded = (nbytes + mmap.PAGESIZE - 1) // mmap.PAGESIZE * mmap.PAGESIZE
            addr = self._map(rounded).base
            self._outstanding[addr] = -rounded
        else:
            slots = self._free.get(cls)
            if slots:
                addr = slots.pop()
                block, off = self._locate(addr)
                block.raw[off:off + cls] = bytes(cls)
            else:
                if self._chunk is None or self._top + cls > self._chunk.size:
                    self._chunk = self._map(CHUNK_BYTES)
                    self._top = 0
                addr = self._chunk.base + self._top
                self._top += cls
            self._outstanding[addr] = cls
        if not is_address48(addr):
            raise ArenaError(f"allocator produced invalid address 0x{addr:x}")
        self.total_allocs += 1
        return addr

    def free(self, addr: int) -> None:
        slot = self._outstanding.pop(addr, None)
        if slot is None:
            raise ArenaError(f"free of 0x{addr:x}: not an outstanding allocation (double free?)")
        self.total_frees += 1
        if slot < 0:
            self._unmap(self._blocks[addr])
            return
        if self.poison:
            block, off = self._locate(addr)
            block.raw[off:off + slot] = bytes([POISON]) * slot
        self._free.setdefault(slot, []).append(addr)

    @property
    def live_count(self) -> int:
        return len(self._outstanding)

    def is_live(self, addr: int) -> bool:
        return addr in self._outstanding

    def slot_size(self, addr: int) -> int:
        return abs(self._outstanding[addr])

    # -- memory access ------------------------------------------------------

    def read_word(self, addr: int) -> int:
        block, off = self._locate(addr)
        return block.words[off >> 3]

    def write_word(self, addr: int, value: int) -> None:
        block, off = self._locate(addr)
        block.words[off >> 3] = value

    def read_words(self, addr: int, count: int) -> List[int]:
        block, off = self._locate(addr)
        i = off >> 3
        return block.words[i:i + count].tolist()

    def write_words(self, addr: int, values: Iterable[int]) -> None:
        block, off = self._locate(addr)
        i = off >> 3
        vals = array("Q", values)
        block.words[i:i + len(vals)] = vals

    def read_byte(self, addr: int) -> int:
        block, off = self._locate(addr)
        return block.raw[off]

    def write_byte(self, addr: int, value: int) -> None:
        block, off = self._locate(addr)
        block.raw[off] = value

    def read_bytes(self, addr: int, count: int) -> bytes:
        block, off = self._locate(addr)
        return bytes(block.raw[off:off + count])

    def write_bytes(self, addr: int, data: bytes) -> None:
        block, off = self._locate(addr)
        block.raw[off:off + len(data)] = data

    def word_view(self, addr: int, count: int) -> memoryview:
        """Writable uint64 view of ``count`` words starting at ``addr``."""
        block, off = self._locate(addr)
        i = off >> 3
        return block.words[i:i + count]

    # -- diagnostics --------------------------------------------------------

    def stats(self) -> Dict[str, int]:
        return {
            "live": self.live_count,
            "allocs": self.total_allocs,
            "frees": self.total_frees,
            "mappings": len(self._blocks),
            "mapped_bytes": sum(b.size for b in self._blocks.values()),
            "free_slots": sum(len(v) for v in self._free.values()),
        }

    def dump(self) -> str:
        lines = [f"{k}={v}" for k, v in self.stats().items()]
        for cls in sorted(self._free):
            if self._free[cls]:
                lines.append(f"free[{cls}]={len(self._free[cls])}")
        return "\n".join(lines)

    def close(self) -> None:
        for block in list(self._blocks.values()):
            self._unmap(block)
        self._free.clear()
        self._outstanding.clear()
        self._chunk = None

    def __enter__(self) -> "Arena":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


_default: Optional[Arena] = None


def default_arena() -> Arena:
    global _default
    if _default is None:
        _default = Arena()
    return _default

"""A small typed heap with a mark-and-sweep collector and no mark-bit field.

Objects live in arena memory with C-like layouts.  Each type chooses where
its mark bit goes:

* ``RefFieldHighBit(i)``: bit 63 of reference field ``i``.  Only the low 48
  bits of a reference slot are address, so every read masks them.
* ``TypeIdHighBit()``: bit 63 of the header word that holds the type id
  used for dynamic dispatch.
* ``PaddingByte(off)``: a byte that alignment padding would waste anyway,
  so the object is no larger than without it.

The collector is stop-the-world and single-threaded.  Marking walks an
explicit worklist from the roots; sweeping walks every allocation in order,
frees the unmarked ones and clears the mark on the rest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, NamedTuple, Optional, Sequence, Set, Tuple, Union

from .tagcore import ADDR_MASK, Arena

MARK_BIT = 1 << 63
TAG_MASK = ~ADDR_MASK & ((1 << 64) - 1)  # bits 48-63
TYPE_ID_MASK = 0xFF
HEADER_BYTES = 8
MAX_TYPE_ID = 255


class HeapError(Exception):
    pass


# -- descriptors ----------------------------------------------------------------


@dataclass(frozen=True)
class Ref:
    """Reference field.  ``target`` fixes the pointee type; None means polymorphic."""

    target: Optional[int] = None


@dataclass(frozen=True)
class Scalar:
    width: int  # bytes: 1, 2, 4 or 8


Field = Union[Ref, Scalar]


@dataclass(frozen=True)
class RefFieldHighBit:
    field_index: int

    label = "refbit"


@dataclass(frozen=True)
class TypeIdHighBit:
    label = "idbit"


@dataclass(frozen=True)
class PaddingByte:
    byte_offset: Optional[int] = None  # None: first padding byte of the layout

    label = "padbyte"


MarkStrategy = Union[RefFieldHighBit, TypeIdHighBit, PaddingByte]


def _field_width(f: Field) -> int:
    if isinstance(f, Ref):
        return 8
    if f.width not in (1, 2, 4, 8):
        raise HeapError(f"scalar width must be 1, 2, 4 or 8, not {f.width}")
    return f.width


def field_offsets(fields: Sequence[Field], header: bool = False) -> Tuple[List[int], int]:
    """Natural-alignment offsets of ``fields`` and the 8-aligned struct size."""
    off = HEADER_BYTES if header else 0
    offsets = []
    for f in fields:
        w = _field_width(f)
        off = (off + w - 1) // w * w
        offsets.append(off)
        off += w
    size = max(8, (off + 7) // 8 * 8)
    return offsets, size


def struct_size(fields: Sequence[Field], header: bool = False) -> int:
    return field_offsets(fields, header)[1]


def padding_bytes(fields: Sequence[Field], header: bool = False) -> List[int]:
    offsets, size = field_offsets(fields, header)
    used = bytearray(size)
    if header:
        used[0:HEADER_BYTES] = b"\x01" * HEADER_BYTES
    for f, off in zip(fields, offsets):
        used[off:off + _field_width(f)] = b"\x01" * _field_width(f)
    return [i for i in range(size) if not used[i]]


class TypeDescriptor:
    """Layout and mark-bit placement for one object type.

    ``dispatch`` gives the type a header word carrying its id, which any
    polymorphic reference to it needs.  ``TypeIdHighBit`` implies it.
    """

    def __init__(
        self,
        type_id: int,
        fields: Sequence[Field],
        strategy: MarkStrategy,
        dispatch: bool = False,
        name: str = "",
    ):
        if not 0 <= type_id <= MAX_TYPE_ID:
            raise HeapError(f"type id {type_id} does not fit in 8 bits")
        self.type_id = type_id
        self.name = name or f"T{type_id}"
        self.fields = tuple(fields)
        self.has_header = dispatch or isinstance(strategy, TypeIdHighBit)
        self.offsets, self.size_bytes = field_offsets(self.fields, self.has_header)
        self.ref_slots = [
            (off, f) for f, off in zip(self.fields, self.offsets) if isinstance(f, Ref)
        ]

        if isinstance(strategy, RefFieldHighBit):
            i = strategy.field_index
            if not 0 <= i < len(self.fields) or not isinstance(self.fields[i], Ref):
                raise HeapError(f"{self.name}: field {i} is not a reference field")
            self.mark_offset = self.offsets[i]
        elif isinstance(strategy, TypeIdHighBit):
            self.mark_offset = 0
        elif isinstance(strategy, PaddingByte):
            pad = padding_bytes(self.fields, self.has_header)
            if strategy.byte_offset is None:
                if not pad:
                    raise HeapError(f"{self.name}: layout has no padding byte to hold a mark")
                strategy = PaddingByte(pad[0])
            elif strategy.byte_offset not in pad:
                raise HeapError(
                    f"{self.name}: byte {strategy.byte_offset} is not alignment padding"
                )
            self.mark_offset = strategy.byte_offset
        else:
            raise HeapError(f"unknown mark strategy {strategy!r}")
        self.strategy = strategy

    def __repr__(self) -> str:
        return (
            f"TypeDescriptor({self.type_id}, {self.name!r}, size={self.size_bytes}, "
            f"strategy={self.strategy})"
        )


# -- heap ----------------------------------------------------------------------


class CollectStats(NamedTuple):
    freed: int
    live: int


TraceFn = Callable[[str, int, TypeDescriptor], None]


class Heap:
    """Object heap over an :class:`Arena`.  Confine to one thread."""

    def __init__(self, arena: Optional[Arena] = None):
        self.arena = arena if arena is not None else Arena()
        self.types: Dict[int, TypeDescriptor] = {}
        # Sweep list in allocation order.  Kept beside the objects, not in
        # them, so no type pays a link word.
        self._objects: Dict[int, TypeDescriptor] = {}
        self.roots: Dict[int, TypeDescriptor] = {}
        self.collections = 0

    def register_type(self, desc: TypeDescriptor) -> int:
        if desc.type_id in self.types:
            raise HeapError(f"type id {desc.type_id} already registered")
        self.types[desc.type_id] = desc
        return desc.type_id

    def alloc(self, type_id: int) -> int:
        desc = self.types.get(type_id)
        if desc is None:
            raise HeapError(f"unknown type id {type_id}")
        obj = self.arena.alloc(desc.size_bytes)
        if desc.has_header:
            self.arena.write_word(obj, desc.type_id)
        self._objects[obj] = desc
        return obj

    # -- object access -----------------------------------------------------

    def type_of(self, obj: int) -> TypeDescriptor:
        desc = self._objects.get(obj)
        if desc is None:
            raise HeapError(f"0x{obj:x} is not a live object")
        return desc

    def _ref_offset(self, desc: TypeDescriptor, field: int) -> int:
        if not 0 <= field < len(desc.fields) or not isinstance(desc.fields[field], Ref):
            raise HeapError(f"{desc.name}: field {field} is not a reference field")
        return desc.offsets[field]

    def set_ref(self, obj: int, field: int, target: Optional[int]) -> None:
        """Store ``target`` in the slot, keeping the slot's tag bits."""
        desc = self.type_of(obj)
        off = self._ref_offset(desc, field)
        if target is None:
            target = 0
        else:
            tdesc = self.type_of(target)
            want = desc.fields[field].target
            if want is None and not tdesc.has_header:
                raise HeapError(f"polymorphic field needs a dispatch header on {tdesc.name}")
            if want is not None and want != tdesc.type_id:
                raise HeapError(f"{desc.name}.{field} holds type {want}, not {tdesc.type_id}")
        slot = self.arena.read_word(obj + off)
        self.arena.write_word(obj + off, (slot & TAG_MASK) | target)

    def get_ref(self, obj: int, field: int) -> Optional[int]:
        desc = self.type_of(obj)
        addr = self.arena.read_word(obj + self._ref_offset(desc, field)) & ADDR_MASK
        return addr or None

    def raw_slot(self, obj: int, field: int) -> int:
        desc = self.type_of(obj)
        return self.arena.read_word(obj + desc.offsets[field])

    def set_scalar(self, obj: int, field: int, value: int) -> None:
        desc = self.type_of(obj)
        f = desc.fields[field]
        if not isinstance(f, Scalar):
            raise HeapError(f"{desc.name}: field {field} is not a scalar")
        data = (value & ((1 << (8 * f.width)) - 1)).to_bytes(f.width, "little")
        self.arena.write_bytes(obj + desc.offsets[field], data)

    def get_scalar(self, obj: int, field: int) -> int:
        desc = self.type_of(obj)
        f = desc.fields[field]
        if not isinstance(f, Scalar):
            raise HeapError(f"{desc.name}: field {field} is not a scalar")
        return int.from_bytes(self.arena.read_bytes(obj + desc.offsets[field], f.width), "little")

    def header(self, obj: int) -> int:
        desc = self.type_of(obj)
        if not desc.has_header:
            raise HeapError(f"{desc.name} has no header")
        return self.arena.read_word(obj)

    # -- roots ---------------------------------------------------------------

    def add_root(self, obj: int) -> None:
        self.roots[obj] = self.type_of(obj)

    def remove_root(self, obj: int) -> None:
        self.roots.pop(obj, None)

    def objects(self) -> Iterator[int]:
        return iter(self._objects)

    @property
    def live_count(self) -> int:
        return len(self._objects)

    # -- mark bit --------------------------------------------------------------

    def _test_and_set(self, obj: int, desc: TypeDescriptor) -> bool:
        """Set the mark; return False if it was already set."""
        arena = self.arena
        loc = obj + desc.mark_offset
        if isinstance(desc.strategy, PaddingByte):
            if arena.read_byte(loc):
                return False
            arena.write_byte(loc, 1)
            return True
        word = arena.read_word(loc)
        if word & MARK_BIT:
            return False
        arena.write_word(loc, word | MARK_BIT)
        return True

    def _is_marked(self, obj: int, desc: TypeDescriptor) -> bool:
        loc = obj + desc.mark_offset
        if isinstance(desc.strategy, PaddingByte):
            return bool(self.arena.read_byte(loc))
        return bool(self.arena.read_word(loc) & MARK_BIT)

    def _unmark(self, obj: int, desc: TypeDescriptor) -> None:
        loc = obj + desc.mark_offset
        if isinstance(desc.strategy, PaddingByte):
            self.arena.write_byte(loc, 0)
        else:
            self.arena.write_word(loc, self.arena.read_word(loc) & ~MARK_BIT)

    def is_marked(self, obj: int) -> bool:
        return self._is_marked(obj, self.type_of(obj))

    def _pointee_type(self, field: Ref, target: int) -> TypeDescriptor:
        if field.target is not None:
            return self.types[field.target]
        # polymorphic: dispatch on the id in the target's header
        return self.types[self.arena.read_word(target) & TYPE_ID_MASK]

    def _mark_from(self, work: List[Tuple[int, TypeDescriptor]], trace: Optional[TraceFn]) -> None:
        read = self.arena.read_word
        while work:
            obj, desc = work.pop()
            if not self._test_and_set(obj, desc):
                continue
            if trace:
                trace("mark", obj, desc)
            for off, field in desc.ref_slots:
                target = read(obj + off) & ADDR_MASK
                if target:
                    work.append((target, self._pointee_type(field, target)))

    def mark_object(self, obj: int) -> None:
        """Mark ``obj`` and everything reachable from it not yet marked."""
        self._mark_from([(obj, self.type_of(obj))], None)

    def sweep(self, trace: Optional[TraceFn] = None) -> int:
        freed = 0
        survivors: Dict[int, TypeDescriptor] = {}
        for obj, desc in self._objects.items():
            if self._is_marked(obj, desc):
                self._unmark(obj, desc)
                survivors[obj] = desc
                if trace:
                    trace("keep", obj, desc)
            else:
                if trace:
                    trace("free", obj, desc)
                self.arena.free(obj)
                freed += 1
        self._objects = survivors
        return freed

    def collect(self, trace: Optional[TraceFn] = None) -> CollectStats:
        self._mark_from(list(self.roots.items()), trace)
        freed = self.sweep(trace)
        self.collections += 1
        return CollectStats(freed=freed, live=len(self._objects))

    # -- test oracle -------------------------------------------------------------

    def reachable_oracle(self) -> Set[int]:
        """Objects reachable from the roots, found without touching mark bits."""
        seen: Set[int] = set()
        stack = list(self.roots)
        while stack:
            obj = stack.pop()
            if obj in seen:
                continue
            seen.add(obj)
            desc = self._objects[obj]
            for i, f in enumerate(desc.fields):
                if isinstance(f, Ref):
                    t = self.get_ref(obj, i)
                    if t is not None and t not in seen:
                        stack.append(t)
        return seen

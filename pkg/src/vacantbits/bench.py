"""Micro-benchmarks over the three libraries, written out as CSV rows."""

from __future__ import annotations

import csv
import random
import time
from dataclasses import dataclass
from typing import Callable, List, TextIO

from . import utf8idx
from .gcheap import Heap, PaddingByte, Ref, RefFieldHighBit, Scalar, TypeDescriptor, TypeIdHighBit
from .tagcore import Arena
from .zint import LIMB_MASK, ZContext

CSV_HEADER = ["name", "iterations", "ns_per_op", "label"]
SUITES = ("zint", "utf8", "gc")


@dataclass
class BenchRecord:
    name: str
    iterations: int
    ns_per_op: float
    label: str

    def row(self) -> List[str]:
        return [self.name, str(self.iterations), f"{self.ns_per_op:.1f}", self.label]


def measure(
    name: str,
    label: str,
    fn: Callable[[], object],
    iterations: int,
    budget_s: float = 2.0,
    ops_per_call: int = 1,
    warmup: bool = True,
) -> BenchRecord:
    """Mean time of ``fn`` over up to ``iterations`` calls.

    Stops early once ``budget_s`` is spent, so heavy cases report fewer
    iterations instead of running for minutes.  At least one call is timed.
    """
    if warmup:
        fn()
    deadline = time.perf_counter() + budget_s
    clock = time.perf_counter_ns
    total = 0
    done = 0
    while done < iterations:
        t0 = clock()
        fn()
        total += clock() - t0
        done += 1
        if time.perf_counter() > deadline:
            break
    return BenchRecord(name, done, total / (done * ops_per_call), label)


def _random_limbs(rng: random.Random, n: int) -> List[int]:
    limbs = [rng.getrandbits(64) for _ in range(n)]
    limbs[-1] = rng.getrandbits(62) | (1 << 61)  # positive, exactly n limbs wide
    return limbs


def bench_zint(rng: random.Random, iterations: int) -> List[BenchRecord]:
    ctx = ZContext(Arena(poison=False))
    out = []

    x, y = rng.getrandbits(40), rng.getrandbits(40)
    wx, wy = ctx.encode_i64(x), ctx.encode_i64(y)
    n = 1000
    add = ctx.add

    def tiny_add():
        for _ in range(n):
            add(wx, wy)

    def raw_add():
        for _ in range(n):
            (x + y) & LIMB_MASK

    out.append(measure("tiny_add", "TINY", tiny_add, iterations, ops_per_call=n))
    out.append(measure("raw64_add", "raw", raw_add, iterations, ops_per_call=n))

    def binop(op, a, b):
        def run():
            ctx.free_z(op(a, b))
        return run

    for size in (2, 16, 1024, 16384):
        a = ctx.from_limbs(_random_limbs(rng, size))
        b = ctx.from_limbs(_random_limbs(rng, size))
        out.append(measure(f"large_add_{size}", "LARGE", binop(ctx.add, a, b), iterations))
        heavy = size >= 1024
        out.append(
            measure(f"large_mul_{size}", "LARGE", binop(ctx.mul, a, b), iterations, warmup=not heavy)
        )
        ctx.free_z(a)
        ctx.free_z(b)

    a = ctx.from_limbs(_random_limbs(rng, 20000))
    b = ctx.from_limbs(_random_limbs(rng, 20000))
    out.append(measure("huge_add_20000", "HUGE", binop(ctx.add, a, b), iterations))
    ctx.free_z(a)
    ctx.free_z(b)
    ctx.arena.close()
    return out


_MIXED_POOL = (
    [chr(c) for c in range(0x20, 0x7F)]
    + [chr(c) for c in range(0xA0, 0x250)]
    + [chr(c) for c in range(0x4E00, 0x4F00)]
    + [chr(c) for c in range(0x1F600, 0x1F650)]
)


def utf8_corpus(rng: random.Random, chars: int, ascii_only: bool) -> bytes:
    if ascii_only:
        return bytes(rng.randrange(0x20, 0x7F) for _ in range(chars))
    return "".join(rng.choice(_MIXED_POOL) for _ in range(chars)).encode("utf-8")


def bench_utf8(rng: random.Random, iterations: int, chars: int = 10000) -> List[BenchRecord]:
    out = []
    for label in ("ascii", "mixed"):
        buf = utf8_corpus(rng, chars, label == "ascii")
        n = len(buf)

        def walk_next(buf=buf, n=n):
            idx = 0
            step = utf8idx.next_idx
            while idx & 0xFFFFFFFF < n:
                idx = step(buf, idx)

        def walk_decode(buf=buf, n=n):
            idx = 0
            step = utf8idx.decode_and_next
            while idx & 0xFFFFFFFF < n:
                _, idx = step(buf, idx)

        out.append(measure("utf8_next", label, walk_next, iterations, ops_per_call=chars))
        out.append(
            measure("utf8_decode_and_next", label, walk_decode, iterations, ops_per_call=chars)
        )
    return out


_STRATEGIES = {
    "refbit": lambda: RefFieldHighBit(0),
    "idbit": TypeIdHighBit,
    "padbyte": PaddingByte,
}


def build_graph(heap: Heap, strategy: str, objects: int, rng: random.Random) -> None:
    """Random graph of ``objects`` two-reference nodes, about half reachable."""
    tid = heap.register_type(
        TypeDescriptor(1, [Ref(1), Ref(1), Scalar(4)], _STRATEGIES[strategy](), name="Node")
    )
    nodes = [heap.alloc(tid) for _ in range(objects)]
    live = objects // 2
    # the first half forms a chain plus random back edges, the rest is garbage
    for i in range(1, live):
        heap.set_ref(nodes[i - 1], 0, nodes[i])
        heap.set_ref(nodes[i], 1, nodes[rng.randrange(i)])
    for i in range(live, objects):
        heap.set_ref(nodes[i], 0, nodes[rng.randrange(objects)])
    heap.add_root(nodes[0])


def bench_gc(rng: random.Random, iterations: int, objects: int = 100_000) -> List[BenchRecord]:
    out = []
    for strategy in _STRATEGIES:
        heap = Heap(Arena(poison=False))
        build_graph(heap, strategy, objects, rng)

        def collect(heap=heap):
            heap.collect()

        # the first collect frees the garbage half; later ones see only live objects
        rec = measure(f"gc_collect_{objects}", strategy, collect, iterations, warmup=False)
        out.append(rec)
        heap.arena.close()
    return out


def run(
    suite: str = "all",
    seed: int = 0,
    iterations: int = 1000,
    gc_objects: int = 100_000,
) -> List[BenchRecord]:
    rng = random.Random(seed)
    suites = SUITES if suite == "all" else (suite,)
    records: List[BenchRecord] = []
    for name in suites:
        if name == "zint":
            records += bench_zint(rng, iterations)
        elif name == "utf8":
            records += bench_utf8(rng, iterations)
        elif name == "gc":
            records += bench_gc(rng, iterations, gc_objects)
        else:
            raise ValueError(f"unknown suite {name!r}")
    return records


def write_csv(records: List[BenchRecord], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.row())

"""Command-line front end: ``vacantbits {zint,utf8,gc,bench} ...``."""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import bench, utf8idx
from .gcheap import (
    Heap,
    HeapError,
    PaddingByte,
    Ref,
    RefFieldHighBit,
    Scalar,
    TypeDescriptor,
    TypeIdHighBit,
)
from .tagcore import Arena
from .zint import ZContext, classify

STRATEGY_NAMES = ("refbit", "idbit", "padbyte")


class CliError(Exception):
    pass


# -- zint ------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+)|(.))")


def _tokenize(expr: str) -> List[str]:
    tokens = []
    pos = 0
    expr = expr.rstrip()
    while pos < len(expr):
        m = _TOKEN.match(expr, pos)
        num, op = m.groups()
        if op is not None and op not in "+-*()−":
            raise CliError(f"unexpected character {op!r} at position {m.start(2)}")
        tokens.append(num if num is not None else ("-" if op == "−" else op))
        pos = m.end()
    return tokens


class _ExprEvaluator:
    """Recursive descent over ``+ - *``, unary minus and parentheses.

    Intermediate words are freed as soon as they are consumed.
    """

    def __init__(self, ctx: ZContext, tokens: List[str]):
        self.ctx = ctx
        self.tokens = tokens
        self.pos = 0

    def _peek(self) -> Optional[str]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _take(self) -> str:
        tok = self._peek()
        if tok is None:
            raise CliError("unexpected end of expression")
        self.pos += 1
        return tok

    def parse(self) -> int:
        w = self._sum()
        if self._peek() is not None:
            raise CliError(f"unexpected token {self._peek()!r}")
        return w

    def _combine(self, op, a: int, b: int) -> int:
        r = op(a, b)
        self.ctx.free_z(a)
        self.ctx.free_z(b)
        return r

    def _sum(self) -> int:
        w = self._product()
        while self._peek() in ("+", "-"):
            op = self.ctx.add if self._take() == "+" else self.ctx.sub
            w = self._combine(op, w, self._product())
        return w

    def _product(self) -> int:
        w = self._unary()
        while self._peek() == "*":
            self._take()
            w = self._combine(self.ctx.mul, w, self._unary())
        return w

    def _unary(self) -> int:
        if self._peek() == "-":
            self._take()
            inner = self._unary()
            w = self.ctx.neg(inner)
            self.ctx.free_z(inner)
            return w
        if self._peek() == "+":
            self._take()
            return self._unary()
        tok = self._take()
        if tok == "(":
            w = self._sum()
            if self._take() != ")":
                raise CliError("expected ')'")
            return w
        if not tok.isdigit():
            raise CliError(f"expected a number, got {tok!r}")
        return self.ctx.from_decimal(tok)


def zint_eval(expr: str, ctx: Optional[ZContext] = None) -> str:
    ctx = ctx or ZContext(Arena())
    w = _ExprEvaluator(ctx, _tokenize(expr)).parse()
    text = f"{ctx.to_decimal(w)} [{classify(w).value}]"
    ctx.free_z(w)
    return text


def zint_inspect(value: str, ctx: Optional[ZContext] = None) -> str:
    ctx = ctx or ZContext(Arena())
    w = ctx.from_decimal(value)
    text = ctx.inspect(w)
    ctx.free_z(w)
    return text


# -- utf8 ------------------------------------------------------------------------


def _read_input(args) -> bytes:
    if args.file:
        return Path(args.file).read_bytes()
    if args.text is None:
        raise CliError("give a literal string or --file PATH")
    return args.text.encode("utf-8", "surrogateescape")


def utf8_walk(buf: bytes) -> List[str]:
    utf8idx.check_buffer(buf)
    lines = []
    for idx, cp in utf8idx.walk(buf):
        ch = chr(cp) if cp <= 0x10FFFF and not 0xD800 <= cp <= 0xDFFF else "�"
        if not ch.isprintable():
            ch = repr(ch)[1:-1]
        lines.append(f"{utf8idx.logical(idx)}\t{utf8idx.physical(idx)}\tU+{cp:04X}\t{ch}")
    return lines


# -- gc script ---------------------------------------------------------------------


def _strategy(name: str, fields: Sequence) -> object:
    if name == "refbit":
        for i, f in enumerate(fields):
            if isinstance(f, Ref):
                return RefFieldHighBit(i)
        raise CliError("refbit needs a type with at least one reference field")
    if name == "idbit":
        return TypeIdHighBit()
    if name == "padbyte":
        return PaddingByte()
    raise CliError(f"unknown strategy {name!r}")


_SCALARS = {"i8": 1, "i16": 2, "i32": 4, "i64": 8}


class GcScript:
    """Interpreter for the line-oriented heap scenario language.

    ::

        type Node ref ref i32 [strategy=padbyte]
        new a Node
        link a 0 b        # field 0 of a points to b; '-' stores null
        root a
        unroot a
        collect
    """

    def __init__(self, strategy: str, trace: bool = False):
        self.heap = Heap(Arena())
        self.default_strategy = strategy
        self.trace = trace
        self.type_ids: Dict[str, int] = {}
        self.vars: Dict[str, int] = {}
        self.names: Dict[int, str] = {}
        self.out: List[str] = []
        self.strategies_used: set = set()

    def _obj(self, name: str) -> int:
        if name not in self.vars:
            raise CliError(f"unknown object {name!r}")
        obj = self.vars[name]
        if self.names.get(obj) != name:
            raise CliError(f"object {name!r} has been collected")
        return obj

    def _event(self, kind: str, obj: int, desc: TypeDescriptor) -> None:
        name = self.names.get(obj, "?")
        self.out.append(f"  {kind} {name} ({desc.name} @0x{obj:x})")
        if kind == "free":
            self.names.pop(obj, None)

    def run_line(self, line: str) -> None:
        words = line.split("#", 1)[0].split()
        if not words:
            return
        cmd, args = words[0], words[1:]
        if cmd == "type":
            self._type(args)
        elif cmd == "new" and len(args) == 2:
            name, tname = args
            if tname not in self.type_ids:
                raise CliError(f"unknown type {tname!r}")
            obj = self.heap.alloc(self.type_ids[tname])
            self.vars[name] = obj
            self.names[obj] = name
        elif cmd == "link" and len(args) == 3:
            src, field, dst = args
            target = None if dst == "-" else self._obj(dst)
            self.heap.set_ref(self._obj(src), int(field), target)
        elif cmd == "root" and len(args) == 1:
            self.heap.add_root(self._obj(args[0]))
        elif cmd == "unroot" and len(args) == 1:
            self.heap.remove_root(self._obj(args[0]))
        elif cmd == "collect" and not args:
            stats = self.heap.collect(self._event if self.trace else None)
            if not self.trace:
                for obj in [o for o in self.names if not self.heap.arena.is_live(o)]:
                    del self.names[obj]
            label = "+".join(sorted(self.strategies_used)) or self.default_strategy
            self.out.append(f"collect: live={stats.live} freed={stats.freed} strategy={label}")
        else:
            raise CliError(f"bad command: {line.strip()!r}")

    def _type(self, args: List[str]) -> None:
        if not args:
            raise CliError("type needs a name")
        name, specs = args[0], args[1:]
        strategy = self.default_strategy
        fields = []
        for spec in specs:
            if spec.startswith("strategy="):
                strategy = spec.split("=", 1)[1]
            elif spec == "ref":
                fields.append(Ref())
            elif spec.startswith("ref:"):
                target = spec[4:]
                if target == name:
                    fields.append(Ref(len(self.type_ids) + 1))
                elif target in self.type_ids:
                    fields.append(Ref(self.type_ids[target]))
                else:
                    raise CliError(f"unknown type {target!r}")
            elif spec in _SCALARS:
                fields.append(Scalar(_SCALARS[spec]))
            else:
                raise CliError(f"bad field spec {spec!r}")
        tid = len(self.type_ids) + 1
        # every script type carries a dispatch header so plain `ref` can point anywhere
        desc = TypeDescriptor(tid, fields, _strategy(strategy, fields), dispatch=True, name=name)
        self.heap.register_type(desc)
        self.type_ids[name] = tid
        self.strategies_used.add(strategy)

    def run(self, text: str) -> List[str]:
        for lineno, line in enumerate(text.splitlines(), 1):
            try:
                self.run_line(line)
            except (CliError, HeapError, ValueError) as exc:
                raise CliError(f"line {lineno}: {exc}") from None
        return self.out


# -- entry point ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vacantbits", description=__doc__)
    sub = p.add_subparsers(dest="group", required=True)

    z = sub.add_parser("zint", help="multi-precision integers").add_subparsers(dest="cmd", required=True)
    ev = z.add_parser("eval", help="evaluate + - * over decimal literals")
    ev.add_argument("expr")
    ins = z.add_parser("inspect", help="show the packed word for a value")
    ins.add_argument("value")

    u = sub.add_parser("utf8", help="UTF-8 cursors").add_subparsers(dest="cmd", required=True)
    for name in ("walk", "validate"):
        sp = u.add_parser(name)
        sp.add_argument("text", nargs="?")
        sp.add_argument("--file")
        if name == "validate":
            sp.add_argument("--strict", action="store_true")

    g = sub.add_parser("gc", help="run a heap scenario").add_subparsers(dest="cmd", required=True)
    for name in ("demo", "trace"):
        sp = g.add_parser(name)
        sp.add_argument("script")
        sp.add_argument("--strategy", choices=STRATEGY_NAMES, default="refbit")

    b = sub.add_parser("bench", help="micro-benchmarks to CSV")
    b.add_argument("suite", nargs="?", choices=("zint", "utf8", "gc", "all"), default="all")
    b.add_argument("--out", help="CSV path (default: stdout)")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--iterations", type=int, default=1000)
    b.add_argument("--gc-objects", type=int, default=100_000)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.group == "zint":
            text = zint_eval(args.expr) if args.cmd == "eval" else zint_inspect(args.value)
            print(text)
        elif args.group == "utf8":
            buf = _read_input(args)
            if args.cmd == "walk":
                for line in utf8_walk(buf):
                    print(line)
            else:
                res = utf8idx.validate(buf, strict=args.strict)
                if not res.ok:
                    print(f"invalid at byte {res.error_offset}")
                    return 1
                print(f"valid: {utf8idx.logical(utf8idx.end_index(buf))} characters, {len(buf)} bytes")
        elif args.group == "gc":
            script = Path(args.script).read_text()
            for line in GcScript(args.strategy, trace=args.cmd == "trace").run(script):
                print(line)
        elif args.group == "bench":
            if args.iterations < 1:
                raise CliError("--iterations must be positive")
            records = bench.run(args.suite, args.seed, args.iterations, args.gc_objects)
            if args.out:
                with open(args.out, "w", newline="") as fh:
                    bench.write_csv(records, fh)
            else:
                bench.write_csv(records, sys.stdout)
    except (CliError, ValueError, OSError, HeapError) as exc:
        print(f"vacantbits: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

import random

import pytest
from hypothesis import given, settings, strategies as st

from vacantbits import zint
from vacantbits.tagcore import ArenaError
from vacantbits.zint import Format, IntegrityError, LimbView, Order, ParseError, classify, decode_tiny

import oracles
from oracles import TINY_MAX, TINY_MIN, to_limbs

M = (1 << 64) - 1


def make(ctx, v):
    return ctx.from_limbs(to_limbs(v))


# -- classification / TINY ----------------------------------------------------------


@pytest.mark.parametrize(
    "w, fmt",
    [
        (0x0, Format.TINY),
        (0x7FFF_FFFF_FFFF_FFFF, Format.TINY),
        (0xF800_0000_0000_0000, Format.HUGE),
        (0xF800_1234_5678_9ABC, Format.HUGE),
        (0xFFFF_FFFF_FFFF_FFFF, Format.HUGE),
        (0x8000_0000_0000_0000, Format.LARGE),
        (0xF000_0000_0000_0000, Format.LARGE),  # cap_log2 = 14
    ],
)
def test_classify(w, fmt):
    assert classify(w) is fmt


@pytest.mark.parametrize(
    "w, v",
    [(0x0, 0), (0x7FFF_FFFF_FFFF_FFFF, -1), (0x3FFF_FFFF_FFFF_FFFF, 2**62 - 1), (0x4000_0000_0000_0000, -(2**62))],
)
def test_decode_tiny(w, v):
    assert decode_tiny(w) == v


def test_decode_tiny_rejects_other_formats():
    with pytest.raises(ValueError):
        decode_tiny(0x8000_0000_0000_0000)


def test_encode_i64(ctx):
    assert ctx.encode_i64(0) == 0
    assert ctx.encode_i64(-(2**62)) == 0x4000_0000_0000_0000
    w = ctx.encode_i64(2**62)
    assert classify(w) is Format.LARGE
    view = ctx.decode(w)
    assert view.limbs == [0x4000_0000_0000_0000] and view.size == 1 and view.capacity == 1
    w = ctx.encode_i64(-(2**63))
    assert ctx.decode(w).limbs == [0x8000_0000_0000_0000]
    with pytest.raises(ValueError):
        ctx.encode_i64(2**63)


@given(st.integers(-(2**63), 2**63 - 1))
def test_encode_i64_round_trip(v):
    w = zint.encode_i64(v)
    assert oracles.value(zint._default, w) == v
    assert (classify(w) is Format.TINY) == (TINY_MIN <= v <= TINY_MAX)
    zint.free_z(w)


# -- decode / from_limbs -------------------------------------------------------------


def test_decode_examples(ctx):
    v = ctx.decode(ctx.encode_i64(5))
    assert v.limbs == [5] and v.size == 1 and v.fmt is Format.TINY
    w = ctx.from_limbs([0, 1])
    v = ctx.decode(w)
    assert (v.size, v.capacity, v.limbs) == (2, 2, [0, 1])
    assert v.addr is not None and v.addr % 8 == 0


def test_from_limbs_examples(ctx):
    assert ctx.from_limbs([7]) == 0x7
    w = ctx.from_limbs([0x8000_0000_0000_0000, 0])  # 2**63
    assert classify(w) is Format.LARGE
    v = ctx.decode(w)
    assert (v.size, v.capacity) == (2, 2)


def test_from_limbs_denormalized(ctx):
    assert ctx.from_limbs([5, 0, 0, 0]) == 5
    assert decode_tiny(ctx.from_limbs([M, M, M])) == -1
    w = ctx.from_limbs([0, 1, 0, 0, 0])
    assert ctx.decode(w).size == 2
    # sign limb is not redundant when the next limb has its top bit set
    w = ctx.from_limbs([0x8000_0000_0000_0000, 0, 0])
    assert ctx.decode(w).limbs == [0x8000_0000_0000_0000, 0]


def test_from_limbs_accepts_view(ctx):
    view = LimbView([3, 0, 99], 2, 4, Format.LARGE)
    assert ctx.from_limbs(view) == 3


def test_capacity_is_next_power_of_two(ctx):
    for n in (1, 2, 3, 5, 8, 9, 100):
        v = (1 << (64 * n - 2))
        w = make(ctx, v)
        view = ctx.decode(w)
        assert view.size == n
        assert view.capacity == (1 << (n - 1).bit_length())
        ctx.free_z(w)


def test_huge_frontier(ctx):
    w = ctx.from_limbs([0] * 16384 + [1])  # 2**(64*16384) needs 16385 limbs
    assert classify(w) is Format.HUGE
    view = ctx.decode(w)
    assert view.size == 16385 and view.limbs[-1] == 1 and view.header is not None
    w2 = ctx.from_limbs([0] * 16383 + [1])
    assert classify(w2) is Format.LARGE
    assert ctx.decode(w2).capacity == 16384


def test_large_corrupt_size_rejected(ctx):
    w = ctx.from_limbs([0, 1])
    bad = (w & ~(0xF << 59)) | (0 << 59)  # capacity 1 but size 2
    with pytest.raises(IntegrityError):
        ctx.decode(bad)


def test_huge_header_must_not_fit_large(ctx, arena):
    header = arena.alloc(24)
    buf = arena.alloc(8)
    arena.write_words(header, [1, 1, buf])
    with pytest.raises(IntegrityError):
        ctx.decode(0xF800_0000_0000_0000 | header)


# -- arithmetic examples ----------------------------------------------------------------


def test_add_examples(ctx):
    assert ctx.add(1, 2) == 3
    w = ctx.add(ctx.encode_i64(2**62 - 1), 1)
    assert classify(w) is Format.LARGE and oracles.value(ctx, w) == 2**62
    d = ctx.add(w, ctx.encode_i64(-1))
    assert d == ctx.encode_i64(2**62 - 1)


def test_sub_examples(ctx):
    x = make(ctx, 2**100)
    assert ctx.sub(x, x) == 0
    y = make(ctx, 2**100 - 5)
    assert ctx.sub(x, y) == 5
    w = ctx.sub(0, ctx.encode_i64(-(2**62)))
    assert classify(w) is Format.LARGE and oracles.value(ctx, w) == 2**62


def test_neg_examples(ctx):
    assert ctx.neg(0) == 0
    w = ctx.neg(ctx.encode_i64(-(2**62)))
    assert classify(w) is Format.LARGE and oracles.value(ctx, w) == 2**62
    back = ctx.neg(w)
    assert back == ctx.encode_i64(-(2**62))
    big = make(ctx, -(2**200) + 7)
    twice = ctx.neg(ctx.neg(big))
    assert ctx.decode(twice).limbs == ctx.decode(big).limbs


def test_mul_examples(ctx):
    x = make(ctx, 12345678901234567890123)
    assert ctx.decode(ctx.mul(x, 1)).limbs == ctx.decode(x).limbs
    w = ctx.mul(ctx.encode_i64(2**31), ctx.encode_i64(2**31))
    assert classify(w) is Format.LARGE and oracles.value(ctx, w) == 2**62
    s = make(ctx, 2**64)
    p = ctx.mul(s, s)
    view = ctx.decode(p)
    assert view.size == 3 and view.limbs == [0, 0, 1]


def test_mul_vector_path_matches_oracle(ctx):
    rng = random.Random(5)
    for na, nb in [(12, 12), (40, 13), (200, 150), (17, 600)]:
        for sa in (1, -1):
            a = sa * rng.getrandbits(64 * na - 1)
            b = -rng.getrandbits(64 * nb - 1)
            w = ctx.mul(make(ctx, a), make(ctx, b))
            assert oracles.value(ctx, w) == a * b


def test_cmp_examples(ctx):
    assert ctx.cmp(ctx.encode_i64(-1), 1) is Order.LESS
    big = make(ctx, 2**70)
    assert ctx.cmp(big, ctx.encode_i64(2**62 - 1)) is Order.GREATER
    assert ctx.cmp(big, big) is Order.EQUAL
    assert ctx.cmp(make(ctx, -(2**70)), ctx.encode_i64(-(2**62))) is Order.LESS
    assert ctx.cmp(make(ctx, -(2**70)), make(ctx, -(2**130))) is Order.GREATER
    assert ctx.cmp(make(ctx, 2**70), make(ctx, -(2**130))) is Order.GREATER


def test_cmp_tiny_fast_path_reads_no_memory(ctx, monkeypatch):
    def boom(*a, **k):
        raise AssertionError("TINY compare touched the arena")

    monkeypatch.setattr(ctx, "limbs", boom)
    monkeypatch.setattr(ctx.arena, "read_word", boom)
    assert ctx.cmp(ctx.encode_i64(-3), ctx.encode_i64(2)) is Order.LESS


# -- properties --------------------------------------------------------------------------

boundary_ints = st.one_of(
    st.integers(-(2**62) - 4, -(2**62) + 4),
    st.integers(2**62 - 4, 2**62 + 4),
    st.integers(2**64 - 4, 2**64 + 4),
    st.integers(-(2**64) - 4, -(2**64) + 4),
    st.integers(-(2**300), 2**300),
    st.integers(-1000, 1000),
)


@settings(max_examples=300, deadline=None)
@given(boundary_ints, boundary_ints)
def test_arithmetic_against_python_ints(a, b):
    ctx = zint._default
    wa, wb = make(ctx, a), make(ctx, b)
    for op, ref in ((ctx.add, a + b), (ctx.sub, a - b), (ctx.mul, a * b)):
        r = op(wa, wb)
        assert oracles.value(ctx, r) == ref
        assert classify(r).value == oracles.expected_format(ref)
        ctx.free_z(r)
    assert int(ctx.cmp(wa, wb)) == (a > b) - (a < b)
    ctx.free_z(wa)
    ctx.free_z(wb)


@given(st.integers(0, TINY_MAX << 1 | 1), st.integers(0, TINY_MAX << 1 | 1))
def test_tiny_order_on_shifted_words(a, b):
    def signed(x):
        x = (x << 1) & M
        return x - (1 << 64) if x >> 63 else x

    sa, sb = signed(a), signed(b)
    assert int(zint.cmp(a, b)) == (sa > sb) - (sa < sb)


@settings(max_examples=200, deadline=None)
@given(boundary_ints, boundary_ints)
def test_algebra(a, b):
    ctx = zint._default
    wa, wb = make(ctx, a), make(ctx, b)
    n = ctx.neg(wa)
    assert ctx.add(wa, n) == 0
    assert ctx.mul(wa, 0) == 0
    s1 = ctx.sub(wa, wb)
    nb = ctx.neg(wb)
    s2 = ctx.add(wa, nb)
    if classify(s1) is Format.TINY:
        assert s1 == s2
    else:
        assert ctx.decode(s1).limbs == ctx.decode(s2).limbs
        assert ctx.decode(s1).size == ctx.decode(s2).size
    for w in (wa, wb, n, s1, nb, s2):
        ctx.free_z(w)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, M), min_size=1, max_size=20), st.integers(0, 3))
def test_round_trip_random_limbs(limbs, pad):
    ctx = zint._default
    v = oracles.from_limbs(limbs)
    ext = [M if limbs[-1] >> 63 else 0] * pad
    w = ctx.from_limbs(limbs + ext)
    assert oracles.value(ctx, w) == v
    assert classify(w).value == oracles.expected_format(v)
    if classify(w) is not Format.TINY:
        assert ctx.decode(w).limbs == to_limbs(v)
    ctx.free_z(w)


@pytest.mark.parametrize("n", [16383, 16384, 16385])
def test_round_trip_frontier_sizes(ctx, n):
    rng = random.Random(n)
    limbs = [rng.getrandbits(64) for _ in range(n)]
    limbs[-1] |= 1 << 63  # negative, and the top limb is not redundant
    limbs[-1] &= ~(1 << 62)
    w = ctx.from_limbs(limbs)
    assert ctx.decode(w).limbs == limbs
    assert classify(w) is (Format.HUGE if n > 16384 else Format.LARGE)


# -- grow ---------------------------------------------------------------------------------


def _owned_view(ctx, limbs, cap):
    buf = ctx.arena.alloc(cap * 8)
    ctx.arena.write_words(buf, limbs)
    fmt = Format.LARGE if cap <= 16384 else Format.HUGE
    return LimbView(list(limbs), len(limbs), cap, fmt, buf)


@pytest.mark.parametrize("cap, needed, new_cap", [(1, 2, 2), (4, 9, 16), (2, 3, 4), (8, 9, 16), (8, 30, 32)])
def test_grow_capacity(ctx, cap, needed, new_cap):
    view = _owned_view(ctx, list(range(1, cap + 1)), cap)
    old = view.addr
    g = ctx.grow(view, needed)
    assert g.capacity == new_cap
    assert g.limbs == list(range(1, cap + 1))
    assert ctx.arena.read_words(g.addr, cap) == list(range(1, cap + 1))
    assert not ctx.arena.is_live(old)
    assert g.fmt is Format.LARGE


def test_grow_past_large_migrates_to_huge(ctx):
    view = _owned_view(ctx, [1] * 16384, 16384)
    g = ctx.grow(view, 16385)
    assert g.fmt is Format.HUGE and g.capacity == 32768


def test_grow_requires_shortfall(ctx):
    with pytest.raises(ValueError):
        ctx.grow(_owned_view(ctx, [1], 2), 2)


# -- decimal I/O ----------------------------------------------------------------------------


@pytest.mark.parametrize(
    "text, fmt",
    [
        ("0", Format.TINY),
        ("4611686018427387903", Format.TINY),
        ("-4611686018427387904", Format.TINY),
        ("4611686018427387904", Format.LARGE),
        ("-4611686018427387905", Format.LARGE),
    ],
)
def test_decimal_boundaries(ctx, text, fmt):
    w = ctx.from_decimal(text)
    assert classify(w) is fmt
    assert oracles.value(ctx, w) == int(text)
    assert ctx.to_decimal(w) == text


def test_decimal_accepts_unicode_minus_and_leading_zeros(ctx):
    assert ctx.from_decimal("−12") == ctx.encode_i64(-12)
    assert ctx.to_decimal(ctx.from_decimal("000123")) == "123"
    assert ctx.to_decimal(ctx.from_decimal("-0")) == "0"
    w = ctx.from_decimal("-" + "0" * 30 + "5")
    assert ctx.to_decimal(w) == "-5"


@pytest.mark.parametrize("bad", ["", "-", "12a", "1 2", "0x10", "--1", "1.5"])
def test_decimal_parse_errors(ctx, bad):
    with pytest.raises(ParseError):
        ctx.from_decimal(bad)


@settings(max_examples=300, deadline=None)
@given(st.integers(-(10**400), 10**400))
def test_decimal_round_trip(v):
    ctx = zint._default
    w = ctx.from_decimal(str(v))
    assert oracles.value(ctx, w) == v
    assert ctx.to_decimal(w) == str(v)
    ctx.free_z(w)


def test_from_decimal_uses_grow_and_frees_scratch(ctx):
    start = ctx.arena.live_count
    w = ctx.from_decimal("9" * 2000)
    assert ctx.arena.live_count == start + 1
    ctx.free_z(w)
    assert ctx.arena.live_count == start


# -- ownership ---------------------------------------------------------------------------------


def test_free_z(ctx):
    ctx.free_z(5)  # TINY: nothing to release
    w = make(ctx, 2**100)
    ctx.free_z(w)
    with pytest.raises(ArenaError):
        ctx.free_z(w)
    h = ctx.from_limbs([0] * 16384 + [1])
    start = ctx.arena.live_count
    ctx.free_z(h)
    assert ctx.arena.live_count == start - 2  # header and storage


def test_no_leak_over_random_values(ctx):
    rng = random.Random(2)
    start = ctx.arena.live_count
    for _ in range(10_000):
        v = rng.choice([rng.randint(-(2**62), 2**62), rng.getrandbits(rng.randint(1, 2000)) * rng.choice((1, -1))])
        w = make(ctx, v)
        r = ctx.add(w, w)
        ctx.free_z(w)
        ctx.free_z(r)
    assert ctx.arena.live_count == start


def test_operands_unchanged(ctx):
    a, b = make(ctx, 2**200 + 3), make(ctx, -(2**150))
    la, lb = ctx.decode(a).limbs, ctx.decode(b).limbs
    for op in (ctx.add, ctx.sub, ctx.mul, ctx.cmp):
        op(a, b)
    assert ctx.decode(a).limbs == la and ctx.decode(b).limbs == lb


# -- inspect ---------------------------------------------------------------------------------


def test_inspect(ctx):
    assert ctx.inspect(ctx.encode_i64(-5)) == "TINY w=0x7ffffffffffffffb value=-5"
    w = make(ctx, 2**64)
    text = ctx.inspect(w)
    buf = ctx.decode(w).addr
    assert text == (
        f"LARGE w=0x{w:016x} cap=2^1 size=2 addr=0x{buf:x} "
        "limbs=[0x0000000000000000, 0x0000000000000001]"
    )
    h = ctx.from_limbs([0] * 16384 + [1])
    assert ctx.inspect(h).startswith(f"HUGE w=0x{h:016x} header=0x")
    assert "size=16385" in ctx.inspect(h) and "more" in ctx.inspect(h)


def test_from_decimal_long_input_splits(ctx):
    rng = random.Random(12)
    for _ in range(20):
        v = rng.getrandbits(rng.randint(14_000, 60_000)) * rng.choice((1, -1))
        w = ctx.from_decimal(oracles.decimal(v))
        assert oracles.value(ctx, w) == v
        assert classify(w).name == oracles.expected_format(v)
        ctx.free_z(w)
    assert ctx.arena.live_count == 0

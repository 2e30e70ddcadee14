import itertools
import pickle
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dhtmetric import (
    Identifier,
    MetricParams,
    ParseError,
    Variant,
    chord_distance,
    distance,
    generalized_distance,
    parse_id,
    root_of_oracle,
    symmetric_distance,
)
from dhtmetric.identifiers import distance_array, roots_array
from oracles import EXAMPLE_IDS, digitwise, one_way, oracle_root, symmetric

P44 = MetricParams(16, 4)
P1 = MetricParams(16, 1)
CHORD16 = MetricParams(16, 16, Variant.CHORD_ONE_WAY)
PASTRY16 = MetricParams(16, 4, Variant.PASTRY_SYMMETRIC)


def test_parse_digits():
    assert parse_id("03A6", P44).digits(4)[::-1] == [0x0, 0x3, 0xA, 0x6]
    assert parse_id("4EFA", P44).digits(4)[::-1] == [0x4, 0xE, 0xF, 0xA]
    assert parse_id("4efa", 16) == 0x4EFA


@pytest.mark.parametrize("text, where", [("3A6", "wrong width"), ("03G6", "position 2"), ("", "wrong width")])
def test_parse_errors(text, where):
    with pytest.raises(ParseError, match=where):
        parse_id(text, P44)


def test_render_round_trip():
    for value in (0, 0x03A6, 0xFFFF):
        ident = Identifier(value, 16)
        assert parse_id(str(ident), 16) == ident
    assert str(parse_id("4efa", 16)) == "4EFA"
    wide = Identifier(2 ** 160 - 1, 160)
    assert parse_id(wide.hex(), 160) == wide
    assert pickle.loads(pickle.dumps(wide)).width == 160


def test_identifier_range():
    with pytest.raises(ValueError):
        Identifier(1 << 16, 16)
    with pytest.raises(ValueError):
        Identifier(-1, 16)


@given(st.integers(0, 2 ** 160 - 1), st.sampled_from([1, 2, 4, 8, 16, 32, 160]))
def test_digit_view(value, d):
    ident = Identifier(value, 160)
    digits = ident.digits(d)
    assert len(digits) == 160 // d
    assert all(digits[i] == (value // 2 ** (d * i)) % 2 ** d for i in range(len(digits)))
    assert sum(x << (d * i) for i, x in enumerate(digits)) == value


def test_generalized_examples():
    assert generalized_distance(0x03A6, 0x03A6, P44) == 0
    assert generalized_distance(0x4EFB, 0x4EFA, P44) == 0x0001
    assert generalized_distance(0x456B, 0x4EFA, P44) == 0x0771
    assert generalized_distance(0x03A6, 0x4EFA, P1) == 0x4D5C


def test_chord_and_symmetric_examples():
    assert chord_distance(0x4EFB, 0x4EFA, CHORD16) == 0x0001
    assert chord_distance(0x4EF7, 0x4EFA, CHORD16) == 0xFFFD
    assert chord_distance(0x1234, 0x1234, CHORD16) == 0
    assert symmetric_distance(0x4EF7, 0x4EFA, PASTRY16) == 3
    assert symmetric_distance(0x4EFB, 0x4EFA, PASTRY16) == 1
    assert symmetric_distance(0x0000, 0xFFFF, PASTRY16) == 1


def test_dispatch_specialisations():
    assert distance(0x03A6, 0x4EFA, P1) == 0x03A6 ^ 0x4EFA
    k1 = MetricParams(16, 16)
    assert distance(0x4EF7, 0x4EFA, k1) == 0xFFFD == chord_distance(0x4EF7, 0x4EFA, CHORD16)
    for params in (P44, P1, k1, CHORD16, PASTRY16):
        assert distance(0xBEEF, 0xBEEF, params) == 0


@settings(max_examples=300)
@given(st.sampled_from([1, 2, 4, 5, 8, 10, 20, 32, 40, 80, 160]), st.data())
def test_generalized_matches_digit_loop_at_160_bits(d, data):
    r = data.draw(st.integers(0, 2 ** 160 - 1))
    h = data.draw(st.integers(0, 2 ** 160 - 1))
    params = MetricParams(160, d)
    assert generalized_distance(r, h, params) == digitwise(r, h, d, 160 // d)


def test_xor_and_ring_identities_exhaustive_w8():
    p1, p8 = MetricParams(8, 1), MetricParams(8, 8)
    c8 = MetricParams(8, 8, Variant.CHORD_ONE_WAY)
    for r, h in itertools.product(range(256), repeat=2):
        assert generalized_distance(r, h, p1) == r ^ h
        assert generalized_distance(r, h, p8) == chord_distance(r, h, c8) == one_way(r, h, 8)


def test_zero_iff_equal():
    rng = random.Random(1)
    for params in (P44, P1, CHORD16, PASTRY16):
        for _ in range(2000):
            r, h = rng.getrandbits(16), rng.getrandbits(16)
            assert (distance(r, h, params) == 0) == (r == h)


@given(st.integers(0, 0xFFFF), st.integers(0, 0xFFFF))
def test_symmetric_metric_properties(r, h):
    assert symmetric_distance(r, h, PASTRY16) == symmetric_distance(h, r, PASTRY16) == symmetric(r, h, 16)
    assert symmetric_distance(r, h, PASTRY16) <= 2 ** 15


def test_generalized_is_not_symmetric():
    assert generalized_distance(0x456B, 0x4EFA, P44) == 0x0771
    reverse = digitwise(0x4EFA, 0x456B, 4, 4)
    assert reverse == 0x099F
    assert generalized_distance(0x4EFA, 0x456B, P44) == reverse != 0x0771


@pytest.mark.parametrize("d", [1, 2, 4, 8])
def test_injective_for_fixed_hash_w8(d):
    params = MetricParams(8, d)
    for h in range(256):
        assert len({generalized_distance(r, h, params) for r in range(256)}) == 256


def test_root_examples(example_ids):
    assert root_of_oracle(0x4EFA, example_ids, P44) == 0x4EFB
    assert root_of_oracle(0x4EFA, example_ids, CHORD16) == 0x4EFB
    assert root_of_oracle(0x4EF7, example_ids, P1) == 0x4EF7
    without = [n for n in example_ids if n != 0x4EFB]
    for params in (P44, P1, CHORD16, PASTRY16):
        assert root_of_oracle(0x4EFA, without, params) == 0x4EFC


def test_symmetric_tie_goes_to_predecessor():
    assert symmetric_distance(0x4EF7, 0x4EF9, PASTRY16) == symmetric_distance(0x4EFB, 0x4EF9, PASTRY16) == 2
    assert root_of_oracle(0x4EF9, [0x4EFB, 0x4EF7], PASTRY16) == 0x4EF7
    assert root_of_oracle(0x4EF9, [0x4EF7, 0x4EFB], PASTRY16) == 0x4EF7


def test_root_of_empty_set():
    with pytest.raises(ValueError):
        root_of_oracle(0, [], P44)


@pytest.mark.parametrize("kind, params", [("tapestry", P44), ("kademlia", P1), ("chord", CHORD16),
                                          ("pastry", PASTRY16)])
def test_root_matches_linear_scan(kind, params):
    rng = random.Random(7)
    nodes = rng.sample(range(2 ** 16), 40)
    for h in [rng.getrandbits(16) for _ in range(300)] + EXAMPLE_IDS:
        assert root_of_oracle(h, nodes, params) == oracle_root(h, nodes, kind)
        assert root_of_oracle(h, EXAMPLE_IDS, params) == oracle_root(h, EXAMPLE_IDS, kind)


@pytest.mark.parametrize("params", [P44, P1, CHORD16, PASTRY16, MetricParams(16, 2)])
def test_vectorised_forms_agree(params):
    rng = random.Random(3)
    hashes = np.arange(2 ** 16, dtype=np.uint64)
    for r in rng.sample(range(2 ** 16), 5):
        got = distance_array(r, hashes, params)
        want = [distance(r, int(h), params) for h in hashes[::97]]
        assert got[::97].tolist() == want
    nodes = rng.sample(range(2 ** 16), 25) + [0x1000, 0x1004]
    roots = roots_array(hashes[::13], nodes, params)
    assert roots.tolist() == [root_of_oracle(int(h), nodes, params) for h in hashes[::13]]


def test_hash_key():
    import hashlib

    from dhtmetric import hash_key

    full = int(hashlib.sha1(b"hello").hexdigest(), 16)
    assert hash_key("hello", 160) == full
    assert hash_key(b"hello", 16) == full >> 144
    assert hash_key("hello", 16).width == 16
    with pytest.raises(ValueError):
        hash_key("x", 161)

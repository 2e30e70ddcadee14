"""Identifiers, distance metrics and the brute-force root oracle.

Every metric here is a special case of one digit-wise formula: the
identifier is split into ``k`` digits of ``d`` bits, each digit contributes
its clockwise difference ``(r_i - h_i) mod 2**d`` at weight ``2**(d*i)``.
``d = 1`` gives the XOR metric, ``d = W`` gives the one-way ring metric.
"""
from __future__ import annotations

import enum
import hashlib
import string
from dataclasses import dataclass
from typing import Iterable

import numpy as np

MAX_WIDTH = 160


class ParseError(ValueError):
    pass


class Variant(enum.Enum):
    CHORD_ONE_WAY = "ChordOneWay"
    PASTRY_SYMMETRIC = "PastrySymmetric"
    DIGITWISE = "DigitwiseGeneralized"


class Identifier(int):
    """A W-bit node or hash identifier.

    Behaves as a plain ``int`` for arithmetic, hashing and comparison, and
    renders as fixed-width uppercase hex.
    """

    def __new__(cls, value: int, width: int = 16) -> "Identifier":
        if not 0 < width <= MAX_WIDTH or width % 4:
            raise ValueError(f"identifier width must be a multiple of 4 in (0, {MAX_WIDTH}], got {width}")
        if not 0 <= value < (1 << width):
            raise ValueError(f"value {value:#x} does not fit in {width} bits")
        obj = super().__new__(cls, value)
        obj.width = width
        return obj

    def __getnewargs__(self):
        return int(self), self.width

    def digits(self, d: int) -> list[int]:
        """Digits least significant first: ``digits(d)[i] == (self >> d*i) & (2**d - 1)``."""
        return digit_list(int(self), d, self.width // d)

    def hex(self) -> str:
        return render_id(int(self), self.width)

    def __str__(self) -> str:
        return self.hex()

    def __repr__(self) -> str:
        return f"Identifier('{self.hex()}')"


def digit_list(value: int, d: int, k: int) -> list[int]:
    mask = (1 << d) - 1
    return [(value >> (d * i)) & mask for i in range(k)]


@dataclass(frozen=True)
class MetricParams:
    """Identifier geometry and metric selection.

    ``width`` is W, ``d`` the bits per digit. The one-way and symmetric ring
    metrics always treat the whole identifier as one digit; for those
    variants ``d`` only describes the digit size of the prefix matrix
    (Pastry) and is otherwise unused.
    """

    width: int = 16
    d: int = 4
    variant: Variant = Variant.DIGITWISE
    m: int = 2
    leafset_size: int = 4

    def __post_init__(self):
        if not 0 < self.width <= MAX_WIDTH or self.width % 4:
            raise ValueError(f"width must be a multiple of 4 in (0, {MAX_WIDTH}]")
        if not 1 <= self.d <= self.width or self.width % self.d:
            raise ValueError(f"d={self.d} must divide width={self.width}")
        if self.m < 1 or self.width % self.m:
            raise ValueError(f"chord stride m={self.m} must divide width={self.width}")
        if self.leafset_size < 2 or self.leafset_size % 2:
            raise ValueError("leafset_size must be an even count >= 2")

    @property
    def k(self) -> int:
        return self.width // self.d

    @property
    def metric_d(self) -> int:
        """Digit size actually used by the distance metric."""
        return self.d if self.variant is Variant.DIGITWISE else self.width

    @property
    def h_max(self) -> int:
        return (1 << self.metric_d) - 1

    @property
    def modulus(self) -> int:
        return 1 << self.width

    def ident(self, value: int) -> Identifier:
        return Identifier(value, self.width)


def parse_id(text: str, params: MetricParams | int) -> Identifier:
    """Parse fixed-width hex text (case-insensitive) into an Identifier."""
    width = params.width if isinstance(params, MetricParams) else params
    text = text.strip()
    want = width // 4
    if len(text) != want:
        raise ParseError(f"{text!r}: wrong width, expected {want} hex characters, got {len(text)}")
    for pos, ch in enumerate(text):
        if ch not in string.hexdigits:
            raise ParseError(f"{text!r}: non-hex character {ch!r} at position {pos}")
    return Identifier(int(text, 16), width)


def render_id(value: int, width: int) -> str:
    return format(value, f"0{width // 4}X")


def hash_key(data: bytes | str, width: int) -> Identifier:
    """Leading ``width`` bits of SHA-1 of ``data``, as a W-bit identifier.

    A convenience for turning key names into hash identifiers; nothing in
    routing depends on it.
    """
    if not 1 <= width <= 160:
        raise ValueError(f"hash_key supports widths 1..160, got {width}")
    if isinstance(data, str):
        data = data.encode()
    digest = int.from_bytes(hashlib.sha1(data).digest(), "big")
    return Identifier(digest >> (160 - width), width)


def _high_bits(width: int, d: int) -> int:
    # top bit of every d-bit digit
    return sum(1 << (d * i + d - 1) for i in range(width // d))


_HIGH_CACHE: dict[tuple[int, int], int] = {}


def high_bits(width: int, d: int) -> int:
    key = (width, d)
    hi = _HIGH_CACHE.get(key)
    if hi is None:
        hi = _HIGH_CACHE[key] = _high_bits(width, d)
    return hi


def digitwise_distance(r: int, h: int, width: int, d: int) -> int:
    """Sum over digits of ``((r_i - h_i) mod 2**d) * 2**(d*i)``.

    Evaluated as a borrow-free lane subtraction: forcing each digit's top
    bit on in ``r`` and off in ``h`` keeps borrows inside their digit, and
    the XOR term restores the correct top bit per digit.
    """
    hi = high_bits(width, d)
    full = (1 << width) - 1
    return (((r | hi) - (h & ~hi & full)) ^ (~(r ^ h) & hi)) & full


def generalized_distance(r: int, h: int, params: MetricParams) -> int:
    return digitwise_distance(r, h, params.width, params.d)


def chord_distance(r: int, h: int, params: MetricParams) -> int:
    return (r - h) % params.modulus


def symmetric_distance(r: int, h: int, params: MetricParams) -> int:
    mod = params.modulus
    return min((r - h) % mod, (h - r) % mod)


def distance(r: int, h: int, params: MetricParams) -> int:
    if params.variant is Variant.DIGITWISE:
        return digitwise_distance(r, h, params.width, params.d)
    if params.variant is Variant.CHORD_ONE_WAY:
        return (r - h) % params.modulus
    return symmetric_distance(r, h, params)


def metric(params: MetricParams):
    """``distance`` specialised to ``params``: a two-argument callable."""
    mod = params.modulus
    full = mod - 1
    if params.variant is Variant.DIGITWISE:
        hi = high_bits(params.width, params.d)
        lo_mask = ~hi & full
        return lambda r, h: (((r | hi) - (h & lo_mask)) ^ (~(r ^ h) & hi)) & full
    if params.variant is Variant.CHORD_ONE_WAY:
        return lambda r, h: (r - h) % mod
    return lambda r, h: min((r - h) % mod, (h - r) % mod)


def root_key(r: int, h: int, params: MetricParams) -> tuple[int, int]:
    """Total order on candidate roots for ``h``.

    The second component breaks symmetric-metric ties toward the node that
    precedes ``h`` on the ring; for the other metrics ties cannot occur.
    """
    return distance(r, h, params), (h - r) % params.modulus


def root_of_oracle(h: int, nodes: Iterable[int], params: MetricParams) -> int:
    """Linear scan for the node minimising ``distance(node, h)``."""
    best = None
    best_key = None
    for node in nodes:
        key = root_key(node, h, params)
        if best_key is None or key < best_key:
            best, best_key = node, key
    if best is None:
        raise ValueError("root_of_oracle: empty node set")
    return best


# -- vectorised forms, used by sweeps over large hash sets (W <= 63) --------

def distance_array(r: int, hashes: np.ndarray, params: MetricParams) -> np.ndarray:
    """``distance(r, h)`` for every ``h`` in a uint64 array."""
    if params.width > 63:
        raise ValueError("vectorised distance supports width <= 63")
    h = hashes.astype(np.uint64, copy=False)
    full = np.uint64((1 << params.width) - 1)
    rr = np.uint64(r)
    if params.variant is Variant.DIGITWISE:
        hi = np.uint64(high_bits(params.width, params.d))
        return (((rr | hi) - (h & ~hi & full)) ^ (~(rr ^ h) & hi)) & full
    fwd = (rr - h) & full
    if params.variant is Variant.CHORD_ONE_WAY:
        return fwd
    return np.minimum(fwd, (h - rr) & full)


def roots_array(hashes: np.ndarray, nodes: list[int], params: MetricParams) -> np.ndarray:
    """Oracle root for every hash in ``hashes``; returns node values as uint64."""
    if not nodes:
        raise ValueError("roots_array: empty node set")
    full = np.uint64((1 << params.width) - 1)
    h = hashes.astype(np.uint64, copy=False)
    best_d = None
    best_tie = None
    best = np.zeros(h.shape, dtype=np.uint64)
    for node in nodes:
        dist = distance_array(node, h, params)
        tie = (h - np.uint64(node)) & full
        if best_d is None:
            better = np.ones(h.shape, dtype=bool)
        else:
            better = (dist < best_d) | ((dist == best_d) & (tie < best_tie))
        best_d = dist if best_d is None else np.where(better, dist, best_d)
        best_tie = tie if best_tie is None else np.where(better, tie, best_tie)
        best = np.where(better, np.uint64(node), best)
    return best

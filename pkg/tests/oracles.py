"""Reference implementations written straight from the formulas.

Deliberately naive: digit loops and linear scans, no shared code with the
package under test.
"""

EXAMPLE_IDS = [int(x, 16) for x in (
    "0156 0359 0379 03A6 03A9 03AF 04A5 25AB 456B "
    "4ABC 4E56 4EAB 4ECD 4EF7 4EFB 4EFC 4EFD 6754").split()]


def digitwise(r, h, d, k):
    base = 1 << d
    total = 0
    for i in range(k):
        ri = (r >> (d * i)) % base
        hi = (h >> (d * i)) % base
        total += ((ri - hi + base) % base) * base ** i
    return total


def one_way(r, h, width):
    return (r - h + 2 ** width) % 2 ** width


def symmetric(r, h, width):
    return min(one_way(r, h, width), one_way(h, r, width))


def oracle_root(h, nodes, kind, width=16, d=4):
    """Linear scan; ``kind`` in tapestry/kademlia/chord/pastry."""
    best = None
    for r in nodes:
        if kind == "tapestry":
            key = (digitwise(r, h, d, width // d),)
        elif kind == "kademlia":
            key = (r ^ h,)
        elif kind == "chord":
            key = (one_way(r, h, width),)
        else:
            key = (symmetric(r, h, width), one_way(h, r, width))
        if best is None or key < best[0]:
            best = (key, r)
    return best[1]


def successor(point, nodes, width=16):
    """First node at or after ``point`` going clockwise."""
    return min(nodes, key=lambda n: (n - point) % 2 ** width)


def leading_bits_shared(a, b, width=16):
    n = 0
    for i in range(width - 1, -1, -1):
        if (a >> i) & 1 != (b >> i) & 1:
            break
        n += 1
    return n

"""Subsets of a ground set {0, ..., n-1} represented as int bitmasks.

All solvers and oracles exchange subsets in this form: element i is in the
subset iff bit i is set. Python ints are arbitrary precision, so ground sets
larger than 64 elements need no special casing.
"""

from .errors import DomainError


def full_mask(n: int) -> int:
    """Bitmask of the full ground set of size n."""
    if n < 0:
        raise DomainError(f"ground set size must be >= 0, got {n}")
    return (1 << n) - 1


def mask_of(indices, n: int | None = None) -> int:
    """Build a bitmask from an iterable of element indices."""
    mask = 0
    for i in indices:
        i = int(i)
        if i < 0 or (n is not None and i >= n):
            raise DomainError(f"element {i} outside ground set of size {n}")
        mask |= 1 << i
    return mask


def indices_of(mask: int) -> list[int]:
    """Sorted element indices of a bitmask."""
    if mask < 0:
        raise DomainError("bitmask must be nonnegative")
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def popcount(mask: int) -> int:
    return mask.bit_count()


def iter_bits(mask: int):
    """Yield the set bit positions of mask in ascending order."""
    i = 0
    while mask:
        if mask & 1:
            yield i
        mask >>= 1
        i += 1
